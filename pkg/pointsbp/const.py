"""Constants for pointsbp."""

DOMAIN = "pointsbp"

CONF_KIND = "kind"
CONF_RESOLUTION = "resolution"
CONF_BETA = "beta"
CONF_SEED = "seed"
CONF_JITTER = "jitter"
CONF_PARAMS = "params"

CONF_GEOMETRY = "geometry"
CONF_DEGREE = "p"
CONF_TAU = "tau"
CONF_STUDY = "study"
CONF_SEEDS = "seeds"
CONF_RESOLUTIONS = "resolutions"
CONF_DEGREES = "degrees"
CONF_MIN_CUT_SIZE = "min_cut_size"
CONF_DISSIPATION = "dissipation"
CONF_THREADS = "threads"
CONF_FINAL_TIME = "final_time"
CONF_SAMPLES = "samples"
CONF_REGIMES = "regimes"
CONF_QP_OBJECTIVE = "qp_objective"
CONF_OUTPUT = "output"

GEOMETRY_BOX = "box"
GEOMETRY_BOX_CIRCLE = "box_circle"
GEOMETRY_ANNULUS = "annulus"
GEOMETRY_AIRFOIL = "airfoil"
GEOMETRY_CONIC = "conic"
GEOMETRIES = (
    GEOMETRY_BOX,
    GEOMETRY_BOX_CIRCLE,
    GEOMETRY_ANNULUS,
    GEOMETRY_AIRFOIL,
    GEOMETRY_CONIC,
)

INTEGRAL_BOX = "box"
INTEGRAL_ANNULUS = "annulus"
INTEGRAL_FOIL = "foil"

CELL_INTERIOR = "interior"
CELL_CUT = "cut"
CELL_IMMERSED = "immersed"

FACE_INTERFACE = "interface"
FACE_BOX_BOUNDARY = "box_boundary"
FACE_LEVELSET_BOUNDARY = "levelset_boundary"

TAU_LARGE = "large"
TAU_SMALL = "small"
TAU_TINY = "tiny"
TAU_AUTO = "auto"
TAU_REGIMES = (TAU_LARGE, TAU_SMALL, TAU_TINY, TAU_AUTO)
# fraction of the nominal node volume h0**2
TAU_REGIME_SCALE = {TAU_LARGE: 1 / 4, TAU_SMALL: 1 / 400, TAU_TINY: 1 / 40000}

STATUS_FEASIBLE = "feasible"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNDETERMINED = "undetermined"
STATUS_FAILED = "failed"

STUDY_BUILD = "build"
STUDY_QUAD_ACCURACY = "quad-accuracy"
STUDY_STEADY = "steady"
STUDY_UNSTEADY = "unsteady"
STUDY_SUCCESS_RATE = "success-rate"
STUDY_TIMING = "timing"
STUDY_WEIGHTS = "weights"
STUDIES = (
    STUDY_BUILD,
    STUDY_QUAD_ACCURACY,
    STUDY_STEADY,
    STUDY_UNSTEADY,
    STUDY_SUCCESS_RATE,
    STUDY_TIMING,
    STUDY_WEIGHTS,
)

TIMING_MESH = "mesh"
TIMING_STENCIL = "stencil"
TIMING_NORM = "M opt."
TIMING_SE = "S&E"
TIMING_DISSIPATION = "A"
TIMING_SYSTEM = "system"
TIMING_KEYS = (
    TIMING_MESH,
    TIMING_STENCIL,
    TIMING_NORM,
    TIMING_SE,
    TIMING_DISSIPATION,
    TIMING_SYSTEM,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_UNDETERMINED = 4

DEFAULT_DEGREE = 2
DEFAULT_SEEDS = [0]
DEFAULT_JITTER = 0.25
DEFAULT_BETA = 0.0
DEFAULT_DISSIPATION = 0.25
DEFAULT_THREADS = 1
DEFAULT_SAMPLES = 50
DEFAULT_OUTPUT = "out"
DEFAULT_LP_MAX_ITER = 500
DEFAULT_ANNULUS_ASPECT = 6

# quadtree and quadrature limits
MAX_TREE_LEVEL = 30
ROOT_SAMPLES = 32
MAX_LINE_ROOTS = 4
MAX_CUT_DEPTH = 8
# base-axis Gauss points added on cut boxes, where the integrand is not a polynomial
CUT_EXTRA_POINTS = 10
MIN_HEIGHT_RATIO = 0.3
CLASSIFY_SAFETY = 1.0
CLASSIFY_SUBSAMPLE_LEVELS = 3

RANK_CUTOFF = 1e-12
