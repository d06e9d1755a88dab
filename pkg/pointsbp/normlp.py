"""Positive diagonal norm through a sparse linear feasibility problem."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize

from .assembly import GlobalOperators, assemble
from .cellops import CellOperator
from .const import (
    DEFAULT_LP_MAX_ITER,
    STATUS_FEASIBLE,
    STATUS_INFEASIBLE,
    STATUS_UNDETERMINED,
    TAU_AUTO,
    TAU_REGIME_SCALE,
)
from .exceptions import NormError
from .geometry import NodeSet
from .mesh import BackgroundMesh

_LOGGER = logging.getLogger(__name__)

# relative slack left for the solver's feasibility tolerance
TIGHTEN = 1e-6
ACCEPT = 1e-9
# largest uniform margin above tau the LP asks for
MARGIN_CAP = 9.0


@dataclass(frozen=True)
class NormProblem:
    """m_min + Z y >= tau with block-structured Z."""

    m_min: np.ndarray
    z: sparse.csr_matrix
    tau: np.ndarray
    column_map: np.ndarray
    slices: dict[int, slice]

    @property
    def ny(self) -> int:
        """Number of free parameters."""
        return self.z.shape[1]

    def weights(self, y: np.ndarray) -> np.ndarray:
        """Global weights for y."""
        if self.ny == 0:
            return self.m_min.copy()
        return self.m_min + self.z @ y


@dataclass(frozen=True)
class NormSolution:
    """Outcome of the norm problem."""

    status: str
    y: np.ndarray | None
    m: np.ndarray | None
    message: str = ""

    @property
    def feasible(self) -> bool:
        """Return True if a positive norm was found."""
        return self.status == STATUS_FEASIBLE


def norm_tolerances(nodes: NodeSet, tau: str | float = TAU_AUTO) -> np.ndarray:
    """Lower bounds on the weights from a regime name or a fixed value."""
    n = len(nodes)
    if isinstance(tau, (int, float)):
        if tau <= 0:
            raise NormError(f"Tolerance must be positive, got {tau}")
        return np.full(n, float(tau))
    if tau == TAU_AUTO:
        return np.asarray(nodes.volumes, dtype=float) / 10.0
    try:
        scale = TAU_REGIME_SCALE[tau]
    except KeyError as err:
        raise NormError(f"Unknown tolerance regime {tau!r}") from err
    return np.full(n, nodes.nominal_spacing**2 * scale)


def build_problem(
    cell_ops: dict[int, CellOperator], n_nodes: int, tau: np.ndarray
) -> NormProblem:
    """Scatter cell minimum-norm weights and null-space blocks."""
    m_min = np.zeros(n_nodes)
    rows, cols, vals, column_map = [], [], [], []
    slices: dict[int, slice] = {}
    offset = 0
    for cid in sorted(cell_ops):
        op = cell_ops[cid]
        np.add.at(m_min, op.node_ids, op.norm.m_min)
        z = op.norm.z
        ny = z.shape[1]
        slices[cid] = slice(offset, offset + ny)
        if ny:
            rows.append(np.repeat(op.node_ids, ny))
            cols.append(np.tile(np.arange(offset, offset + ny), len(op.node_ids)))
            vals.append(z.ravel())
            column_map.extend((cid, k) for k in range(ny))
        offset += ny
    if vals:
        z_global = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_nodes, offset),
        ).tocsr()
    else:
        z_global = sparse.csr_matrix((n_nodes, 0))
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (n_nodes,)).copy()
    return NormProblem(
        m_min, z_global, tau, np.array(column_map, dtype=int).reshape(-1, 2), slices
    )


def _verify(problem: NormProblem, y: np.ndarray) -> tuple[bool, np.ndarray]:
    m = problem.weights(y)
    ok = bool(np.all(m >= problem.tau - ACCEPT * problem.tau.max()))
    return ok, m


def _min_norm_point(
    problem: NormProblem, scale: float, max_iter: int
) -> np.ndarray | None:
    """Least-norm feasible y from the bound-constrained dual."""
    z = problem.z / scale
    rhs = (problem.tau - problem.m_min) / scale
    rhs = rhs + TIGHTEN * problem.tau.max() / scale

    def dual(lam: np.ndarray) -> tuple[float, np.ndarray]:
        zt = z.T @ lam
        return 0.5 * float(zt @ zt) - float(lam @ rhs), z @ zt - rhs

    result = minimize(
        dual,
        np.zeros(len(rhs)),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * len(rhs),
        options={"maxiter": max_iter * 10, "gtol": 1e-12, "ftol": 1e-15},
    )
    _LOGGER.debug("Min-norm dual: %s", result.message)
    return np.asarray(z.T @ result.x)


def solve_norm(
    problem: NormProblem,
    max_iter: int = DEFAULT_LP_MAX_ITER,
    qp_objective: bool = False,
) -> NormSolution:
    """Find y with m_min + Z y >= tau, or certify that none exists."""
    slack = problem.m_min - problem.tau
    if np.all(slack >= 0.0):
        return NormSolution(STATUS_FEASIBLE, np.zeros(problem.ny), problem.m_min.copy())
    if problem.ny == 0:
        return NormSolution(
            STATUS_INFEASIBLE, None, None, "No free parameters and m_min below tau"
        )
    scale = max(float(np.abs(problem.m_min).max()), float(problem.tau.max()))
    b_ub = (slack - TIGHTEN * problem.tau.max()) / scale
    # last column is the margin t in m >= tau (1 + t)
    a_ub = sparse.hstack(
        [-problem.z / scale, sparse.csr_matrix(problem.tau[:, None] / scale)]
    ).tocsr()
    objective = np.zeros(problem.ny + 1)
    objective[-1] = -1.0
    result = linprog(
        objective,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * problem.ny + [(0.0, MARGIN_CAP)],
        method="highs",
        options={
            "maxiter": max_iter,
            "presolve": True,
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    _LOGGER.debug("Norm LP status %s: %s", result.status, result.message)
    if result.status == 2:
        return NormSolution(STATUS_INFEASIBLE, None, None, result.message)
    if result.status != 0:
        return NormSolution(STATUS_UNDETERMINED, None, None, result.message)
    y = np.asarray(result.x[:-1])
    _LOGGER.debug("Norm margin %.3g", result.x[-1])
    if qp_objective:
        candidate = _min_norm_point(problem, scale, max_iter)
        ok, _ = _verify(problem, candidate)
        if ok:
            y = candidate
        else:
            _LOGGER.warning("Min-norm point violates the bounds, keeping the LP point")
    ok, m = _verify(problem, y)
    if not ok:
        return NormSolution(
            STATUS_UNDETERMINED,
            y,
            m,
            f"Solver point violates bounds by {float((problem.tau - m).max()):.3e}",
        )
    return NormSolution(STATUS_FEASIBLE, y, m, result.message)


def finalize_norm(
    mesh: BackgroundMesh,
    cell_ops: dict[int, CellOperator],
    problem: NormProblem,
    y: np.ndarray,
) -> tuple[GlobalOperators, dict[int, CellOperator]]:
    """Distribute y to the cells, rebuild their skew parts and reassemble."""
    if len(y) != problem.ny:
        raise NormError(f"y has length {len(y)}, expected {problem.ny}")
    updated: dict[int, CellOperator] = {}
    for cid in sorted(cell_ops):
        op = cell_ops[cid]
        updated[cid] = op.with_weights(op.norm.weights(y[problem.slices[cid]]))
    p = next(iter(cell_ops.values())).basis.p
    return assemble(mesh, updated, len(problem.m_min), p), updated
