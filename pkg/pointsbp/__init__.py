"""Degenerate SBP operators on point clouds over level-set geometries."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import voluptuous as vol

from .assembly import GlobalOperators, assemble, sbp_residuals
from .basis import basis_dim
from .cellops import CellOperator, build_cell_operator
from .const import (
    CONF_BETA,
    CONF_DEGREE,
    CONF_DEGREES,
    CONF_DISSIPATION,
    CONF_FINAL_TIME,
    CONF_GEOMETRY,
    CONF_JITTER,
    CONF_KIND,
    CONF_MIN_CUT_SIZE,
    CONF_OUTPUT,
    CONF_PARAMS,
    CONF_QP_OBJECTIVE,
    CONF_REGIMES,
    CONF_RESOLUTION,
    CONF_RESOLUTIONS,
    CONF_SAMPLES,
    CONF_SEED,
    CONF_SEEDS,
    CONF_STUDY,
    CONF_TAU,
    CONF_THREADS,
    DEFAULT_BETA,
    DEFAULT_DEGREE,
    DEFAULT_DISSIPATION,
    DEFAULT_JITTER,
    DEFAULT_LP_MAX_ITER,
    DEFAULT_OUTPUT,
    DEFAULT_SAMPLES,
    DEFAULT_SEEDS,
    DEFAULT_THREADS,
    FACE_LEVELSET_BOUNDARY,
    GEOMETRIES,
    STATUS_INFEASIBLE,
    STUDIES,
    STUDY_BUILD,
    TAU_AUTO,
    TAU_REGIMES,
    TAU_SMALL,
    TIMING_DISSIPATION,
    TIMING_KEYS,
    TIMING_MESH,
    TIMING_NORM,
    TIMING_SE,
    TIMING_STENCIL,
)
from .cutquad import QuadRule, cell_rules, face_rule
from .dissipation import DissipationOp, build_dissipation
from .exceptions import ConfigError
from .geometry import (
    LevelSetGeometry,
    NodeSet,
    SamplerConfig,
    exact_area,
    make_geometry,
    sample_nodes,
)
from .mesh import BackgroundMesh, build_mesh
from .normlp import (
    NormProblem,
    NormSolution,
    build_problem,
    finalize_norm,
    norm_tolerances,
    solve_norm,
)
from .stencil import Stencil, build_stencils

_LOGGER = logging.getLogger(__name__)


def ensure_list(value: Any) -> list:
    """Wrap value in list if it is not one."""
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def ensure_resolution(value: Any) -> int | tuple[int, int]:
    """Accept n or a pair (n_a, n_b), each at least 2."""
    count = vol.All(vol.Coerce(int), vol.Range(min=2))
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise vol.Invalid(f"Resolution pair expected, got {value!r}")
        return (count(value[0]), count(value[1]))
    return count(value)


def ensure_tau(value: Any) -> str | float:
    """Regime name or a positive number."""
    if isinstance(value, str) and value in TAU_REGIMES:
        return value
    try:
        number = float(value)
    except (TypeError, ValueError) as err:
        raise vol.Invalid(f"Unknown tolerance {value!r}") from err
    if not number > 0:
        raise vol.Invalid(f"Tolerance must be positive, got {value!r}")
    return number


positive_int = vol.All(vol.Coerce(int), vol.Range(min=1))
degree = vol.All(vol.Coerce(int), vol.Range(min=1, max=4))

SAMPLER_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): vol.In(GEOMETRIES),
        vol.Required(CONF_RESOLUTION): ensure_resolution,
        vol.Optional(CONF_BETA, default=DEFAULT_BETA): vol.All(
            vol.Coerce(float), vol.Range(min=0)
        ),
        vol.Optional(CONF_SEED, default=0): vol.Coerce(int),
        vol.Optional(CONF_JITTER, default=DEFAULT_JITTER): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=0.5)
        ),
        vol.Optional(CONF_PARAMS, default={}): dict,
    }
)

RUN_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_GEOMETRY): SAMPLER_SCHEMA,
        vol.Optional(CONF_DEGREE, default=DEFAULT_DEGREE): degree,
        vol.Optional(CONF_TAU, default=TAU_AUTO): ensure_tau,
        vol.Optional(CONF_STUDY, default=STUDY_BUILD): vol.In(STUDIES),
        vol.Optional(CONF_SEEDS, default=DEFAULT_SEEDS): vol.All(
            ensure_list, [vol.Coerce(int)], vol.Length(min=1)
        ),
        vol.Optional(CONF_RESOLUTIONS, default=[]): vol.All(
            ensure_list, [ensure_resolution]
        ),
        vol.Optional(CONF_DEGREES, default=[]): vol.All(ensure_list, [degree]),
        vol.Optional(CONF_MIN_CUT_SIZE): vol.All(
            vol.Coerce(float), vol.Range(min=0, min_included=False)
        ),
        vol.Optional(CONF_DISSIPATION, default=DEFAULT_DISSIPATION): vol.All(
            vol.Coerce(float), vol.Range(min=0)
        ),
        vol.Optional(CONF_THREADS, default=DEFAULT_THREADS): positive_int,
        vol.Optional(CONF_FINAL_TIME, default=2 * math.pi): vol.All(
            vol.Coerce(float), vol.Range(min=0)
        ),
        vol.Optional(CONF_SAMPLES, default=DEFAULT_SAMPLES): positive_int,
        vol.Optional(CONF_REGIMES, default=[TAU_SMALL]): vol.All(
            ensure_list, [vol.In(TAU_REGIMES)]
        ),
        vol.Optional(CONF_QP_OBJECTIVE, default=False): bool,
        vol.Optional(CONF_OUTPUT, default=DEFAULT_OUTPUT): str,
    }
)


def parse_config(data: dict) -> dict:
    """Validate a run document, raising ConfigError."""
    try:
        return RUN_SCHEMA(data)
    except vol.Invalid as err:
        raise ConfigError(f"Invalid configuration: {err}") from err


def sampler_from_config(
    config: dict,
    seed: int | None = None,
    resolution: int | tuple[int, int] | None = None,
) -> SamplerConfig:
    """SamplerConfig from a validated geometry block."""
    return SamplerConfig(
        kind=config[CONF_KIND],
        resolution=config[CONF_RESOLUTION] if resolution is None else resolution,
        beta=config[CONF_BETA],
        seed=config[CONF_SEED] if seed is None else seed,
        jitter=config[CONF_JITTER],
        params=dict(config[CONF_PARAMS]),
    )


@dataclass
class SbpBuild:
    """Holder for one constructed operator set."""

    geometry: LevelSetGeometry
    nodes: NodeSet
    mesh: BackgroundMesh
    stencils: dict[int, Stencil]
    volume_rules: dict[int, QuadRule]
    cell_ops: dict[int, CellOperator]
    problem: NormProblem
    solution: NormSolution
    ops: GlobalOperators
    diss: DissipationOp | None = None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def p(self) -> int:
        """Operator degree."""
        return self.ops.p

    @property
    def status(self) -> str:
        """Norm feasibility status."""
        return self.solution.status

    @property
    def feasible(self) -> bool:
        """Return True if the norm is positive."""
        return self.solution.feasible

    def report(self) -> dict[str, Any]:
        """Deterministic summary of the build."""
        residuals = sbp_residuals(self.mesh, self.ops, self.nodes.coords)
        area = float(self.ops.m.sum())
        exact = exact_area(self.geometry.kind, self.geometry.bounds)
        return {
            "geometry": self.geometry.kind,
            "seed": self.nodes.seed,
            "p": self.p,
            "resolution": self.nodes.resolution,
            "N": len(self.nodes),
            "N_C": len(self.cell_ops),
            "status": self.status,
            "message": self.solution.message,
            "min_m": float(self.ops.m.min()),
            "negative_m_min": int(np.count_nonzero(self.problem.m_min < 0)),
            "area": area,
            "area_error": None if exact is None else abs(area - exact),
            "residuals": residuals,
        }


class SbpBuilder:
    """Run the construction pipeline for one degree and tolerance choice."""

    def __init__(
        self,
        p: int,
        tau: str | float = TAU_AUTO,
        eps: float = DEFAULT_DISSIPATION,
        min_cut_size: float | None = None,
        threads: int = DEFAULT_THREADS,
        qp_objective: bool = False,
        max_iter: int = DEFAULT_LP_MAX_ITER,
    ) -> None:
        """Store the pipeline settings."""
        self.p = p
        self.tau = tau
        self.eps = eps
        self.min_cut_size = min_cut_size
        self.threads = threads
        self.qp_objective = qp_objective
        self.max_iter = max_iter

    @classmethod
    def from_config(cls, config: dict, p: int | None = None, tau: Any = None) -> SbpBuilder:
        """Builder from a validated run document."""
        return cls(
            p=config[CONF_DEGREE] if p is None else p,
            tau=config[CONF_TAU] if tau is None else tau,
            eps=config[CONF_DISSIPATION],
            min_cut_size=config.get(CONF_MIN_CUT_SIZE),
            threads=config[CONF_THREADS],
            qp_objective=config[CONF_QP_OBJECTIVE],
        )

    def _map(self, func, items: list) -> list:
        if self.threads <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(func, items))

    def sample(self, sampler: SamplerConfig) -> tuple[LevelSetGeometry, NodeSet]:
        """Geometry and nodes for a sampler, with enough nodes for the degree."""
        geometry = make_geometry(sampler.kind, sampler.params)
        nodes = sample_nodes(sampler, geometry, min_nodes=basis_dim(2 * self.p - 1, 2) + 1)
        return geometry, nodes

    def build_sampled(self, sampler: SamplerConfig) -> SbpBuild:
        """Sample nodes and build."""
        geometry, nodes = self.sample(sampler)
        return self.build(geometry, nodes)

    def build(
        self,
        geometry: LevelSetGeometry,
        nodes: NodeSet,
        mesh: BackgroundMesh | None = None,
    ) -> SbpBuild:
        """Mesh, quadrature, stencils, cell operators, norm, assembly and dissipation."""
        p = self.p
        timings = dict.fromkeys(TIMING_KEYS, 0.0)
        coords = nodes.coords

        start = time.perf_counter()
        if mesh is None:
            mesh = build_mesh(geometry, nodes, self.min_cut_size)
        live = mesh.live_cells
        rules = dict(zip((c.id for c in live), self._map(lambda c: cell_rules(c, geometry, p), live)))
        face_rules: dict[int, QuadRule] = {}
        for face in mesh.faces:
            if face.kind == FACE_LEVELSET_BOUNDARY:
                face_rules[face.id] = rules[face.side_neg][1]
            else:
                face_rules[face.id] = face_rule(face, geometry, 2 * p)
        timings[TIMING_MESH] = time.perf_counter() - start

        start = time.perf_counter()
        stencils = build_stencils(mesh, nodes, p)
        timings[TIMING_STENCIL] = time.perf_counter() - start

        start = time.perf_counter()

        def operator(cell):
            return build_cell_operator(
                cell,
                stencils[cell.id],
                coords,
                rules[cell.id][0],
                mesh.faces_of(cell),
                face_rules,
                p,
                nodes.nominal_spacing,
            )

        cell_ops = dict(zip((c.id for c in live), self._map(operator, live)))
        timings[TIMING_SE] = time.perf_counter() - start

        start = time.perf_counter()
        tau = norm_tolerances(nodes, self.tau)
        problem = build_problem(cell_ops, len(nodes), tau)
        solution = solve_norm(problem, self.max_iter, self.qp_objective)
        timings[TIMING_NORM] = time.perf_counter() - start
        if solution.status == STATUS_INFEASIBLE:
            _LOGGER.info("Norm problem infeasible: %s", solution.message)
        elif not solution.feasible:
            _LOGGER.warning("Norm problem undetermined: %s", solution.message)

        start = time.perf_counter()
        if solution.feasible:
            ops, cell_ops = finalize_norm(mesh, cell_ops, problem, solution.y)
        else:
            ops = assemble(mesh, cell_ops, len(nodes), p)
        timings[TIMING_SE] += time.perf_counter() - start

        start = time.perf_counter()
        diss = build_dissipation(mesh, cell_ops, len(nodes), self.eps)
        timings[TIMING_DISSIPATION] = time.perf_counter() - start

        _LOGGER.info(
            "Built p=%s operators on %s nodes and %s cells (%s)",
            p,
            len(nodes),
            len(cell_ops),
            solution.status,
        )
        return SbpBuild(
            geometry,
            nodes,
            mesh,
            stencils,
            {cid: rule[0] for cid, rule in rules.items()},
            cell_ops,
            problem,
            solution,
            ops,
            diss,
            timings,
        )
