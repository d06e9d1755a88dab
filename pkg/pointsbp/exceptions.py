"""Errors raised by pointsbp."""


class PointSbpError(Exception):
    """Base error for operator construction and solves."""


class ConfigError(PointSbpError):
    """Invalid configuration document."""


class GeometryError(PointSbpError):
    """Unknown geometry or bad geometry parameters."""


class SamplingError(PointSbpError):
    """Node sampling produced an unusable node set."""


class MeshError(PointSbpError):
    """Background mesh could not be built."""


class QuadratureError(PointSbpError):
    """Cut-cell quadrature failed."""


class StencilError(PointSbpError):
    """Stencil construction failed."""


class CellOperatorError(PointSbpError):
    """Cell operator construction failed."""


class AssemblyError(PointSbpError):
    """Global assembly failed."""


class NormError(PointSbpError):
    """Norm feasibility problem could not be set up or applied."""


class SolverError(PointSbpError):
    """Linear or time-marching solve failed."""
