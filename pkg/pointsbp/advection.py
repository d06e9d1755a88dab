"""Skew-form linear advection with the assembled operators."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs, splu

from .assembly import GlobalOperators, apply_E, materialize_E
from .dissipation import DissipationOp
from .exceptions import SolverError

_LOGGER = logging.getLogger(__name__)

FieldMap = Callable[[np.ndarray], np.ndarray]
TimeFieldMap = Callable[[np.ndarray, float], np.ndarray]

STEADY_TOL = 1e-12
DENSE_EIG_LIMIT = 400
VORTEX_CENTER = np.array([0.75, 0.0])


@dataclass
class SolveReport:
    """Errors, diagnostics and timings of a solve."""

    l2_error: float | None
    h_nominal: float
    energy_trace: list[tuple[float, float]] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    steps: int = 0
    dt: float | None = None
    rho: float | None = None


@dataclass
class AdvectionSystem:
    """Operators, velocity field, inflow data and optional source."""

    ops: GlobalOperators
    coords: np.ndarray
    velocity: FieldMap
    bc: TimeFieldMap | None = None
    source: TimeFieldMap | None = None
    diss: DissipationOp | None = None

    @cached_property
    def lam(self) -> np.ndarray:
        """Velocity at the nodes."""
        return np.asarray(self.velocity(self.coords), dtype=float).reshape(-1, 2)

    @cached_property
    def lam_n(self) -> list[np.ndarray]:
        """Normal velocity at the points of each boundary face."""
        return [
            np.einsum("ij,ij->i", np.asarray(self.velocity(bf.points)).reshape(-1, 2), bf.normals)
            for bf in self.ops.boundary_faces
        ]

    def boundary_values(self, points: np.ndarray, t: float) -> np.ndarray:
        """Inflow data, zero when absent."""
        if self.bc is None:
            return np.zeros(len(points))
        return np.asarray(self.bc(points, t), dtype=float)


def h_nominal(m: np.ndarray) -> float:
    """Nominal spacing from the mean weight."""
    return math.sqrt(float(np.mean(m)))


def l2_error(m: np.ndarray, u: np.ndarray, exact: np.ndarray) -> float:
    """Norm-weighted error."""
    e = u - exact
    return math.sqrt(abs(float(e @ (m * e))))


def residual(system: AdvectionSystem, u: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Return M du/dt for the semi-discretization."""
    ops = system.ops
    u = np.asarray(u, dtype=float)
    if u.shape != (ops.n,):
        raise SolverError(f"State has shape {u.shape}, expected ({ops.n},)")
    r = np.zeros(ops.n)
    for axis in (0, 1):
        lam = system.lam[:, axis]
        if not np.any(lam):
            continue
        lu = lam * u
        r -= 0.5 * (lam * ops.apply_s(u, axis) + ops.apply_s(lu, axis))
        r += 0.25 * (apply_E(ops, lu, axis) - lam * apply_E(ops, u, axis))
    if system.diss is not None:
        r -= system.diss.apply(u)
    for bf, lam_n in zip(ops.boundary_faces, system.lam_n):
        if not np.any(lam_n):
            continue
        inner = bf.apply(u)
        outer = system.boundary_values(bf.points, t)
        flux = np.where(lam_n > 0.0, lam_n * inner, lam_n * outer)
        np.add.at(r, bf.node_ids, -0.5 * bf.interp.T @ (bf.weights * flux))
    if system.source is not None:
        r += ops.m * system.source(system.coords, t)
    return r


def linear_operator(system: AdvectionSystem) -> sparse.csr_matrix:
    """Sparse K with residual(u, t) = -K u + forcing(t)."""
    ops = system.ops
    k = sparse.csr_matrix((ops.n, ops.n))
    for axis in (0, 1):
        lam = system.lam[:, axis]
        if not np.any(lam):
            continue
        lmat = sparse.diags(lam)
        s = ops.skew(axis)
        e = materialize_E(ops, axis)
        k = k + 0.5 * (lmat @ s + s @ lmat) + 0.25 * (lmat @ e - e @ lmat)
    if system.diss is not None:
        k = k + system.diss.a
    rows, cols, vals = [np.zeros(0, int)], [np.zeros(0, int)], [np.zeros(0)]
    for bf, lam_n in zip(ops.boundary_faces, system.lam_n):
        outflow = np.where(lam_n > 0.0, lam_n, 0.0)
        if not np.any(outflow):
            continue
        block = 0.5 * bf.interp.T @ ((bf.weights * outflow)[:, None] * bf.interp)
        rows.append(np.repeat(bf.node_ids, len(bf.node_ids)))
        cols.append(np.tile(bf.node_ids, len(bf.node_ids)))
        vals.append(block.ravel())
    k = k + sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ops.n, ops.n),
    )
    return k.tocsr()


def forcing(system: AdvectionSystem, t: float = 0.0) -> np.ndarray:
    """Inflow and source part of the residual."""
    ops = system.ops
    g = np.zeros(ops.n)
    for bf, lam_n in zip(ops.boundary_faces, system.lam_n):
        inflow = np.where(lam_n > 0.0, 0.0, lam_n)
        if not np.any(inflow):
            continue
        values = system.boundary_values(bf.points, t)
        np.add.at(g, bf.node_ids, -0.5 * bf.interp.T @ (bf.weights * inflow * values))
    if system.source is not None:
        g += ops.m * system.source(system.coords, t)
    return g


def solve_steady(
    system: AdvectionSystem, exact: FieldMap | None = None
) -> tuple[np.ndarray, SolveReport]:
    """Solve K u = forcing by sparse LU."""
    start = time.perf_counter()
    k = linear_operator(system).tocsc()
    g = forcing(system)
    if not np.any(g):
        u = np.zeros(system.ops.n)
    else:
        try:
            lu = splu(k)
        except RuntimeError as err:
            raise SolverError(f"Steady matrix is singular: {err}") from err
        u = lu.solve(g)
        # one step of iterative refinement
        u += lu.solve(g - k @ u)
        rel = np.linalg.norm(k @ u - g) / np.linalg.norm(g)
        if not np.isfinite(rel) or rel > 1e3 * STEADY_TOL:
            raise SolverError(f"Steady solve residual {rel:.3e} above tolerance")
    report = SolveReport(None, h_nominal(system.ops.m))
    report.timings["system"] = time.perf_counter() - start
    if exact is not None:
        report.l2_error = l2_error(system.ops.m, u, exact(system.coords))
    return u, report


def spectral_radius(k: sparse.csr_matrix, m: np.ndarray) -> float:
    """Largest eigenvalue magnitude of M^-1 K."""
    n = k.shape[0]
    if k.nnz == 0 or not np.any(k.data):
        return 0.0
    if n <= DENSE_EIG_LIMIT:
        return float(np.abs(np.linalg.eigvals(k.toarray() / m[:, None])).max())
    op = LinearOperator((n, n), matvec=lambda x: (k @ x) / m, dtype=float)
    try:
        values = eigs(op, k=1, which="LM", tol=1e-2, maxiter=200 * n, return_eigenvectors=False)
    except ArpackNoConvergence as err:
        if len(err.eigenvalues) == 0:
            raise SolverError("Spectral radius estimate did not converge") from err
        values = err.eigenvalues
    return float(np.abs(values).max())


def solve_unsteady(
    system: AdvectionSystem,
    u0: np.ndarray,
    final_time: float,
    exact: TimeFieldMap | None = None,
    dt: float | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Classical RK4 with dt = 2 / rho."""
    start = time.perf_counter()
    m = system.ops.m
    if np.any(m <= 0.0):
        raise SolverError("Norm is not positive definite")
    u = np.array(u0, dtype=float)
    report = SolveReport(None, h_nominal(m))
    rho = spectral_radius(linear_operator(system), m)
    report.rho = rho
    if rho == 0.0 and dt is None:
        steps = 0
    else:
        step = dt if dt is not None else 2.0 / rho
        steps = max(1, math.ceil(final_time / step - 1e-12))
        dt = final_time / steps
    report.steps = steps
    report.dt = dt

    def rate(v: np.ndarray, t: float) -> np.ndarray:
        return residual(system, v, t) / m

    t = 0.0
    for index in range(steps):
        r = residual(system, u, t)
        report.energy_trace.append((t, float(u @ r)))
        report.energies.append(0.5 * float(u @ (m * u)))
        k1 = r / m
        k2 = rate(u + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rate(u + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rate(u + dt * k3, t + dt)
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (index + 1) * dt
        if not np.all(np.isfinite(u)):
            raise SolverError(f"Non-finite state at step {index}")
    report.energies.append(0.5 * float(u @ (m * u)))
    report.timings["system"] = time.perf_counter() - start
    if exact is not None:
        report.l2_error = l2_error(m, u, exact(system.coords, final_time))
    _LOGGER.debug("RK4 took %s steps of %s (rho=%s)", steps, dt, rho)
    return u, report


def vortex_velocity(points: np.ndarray) -> np.ndarray:
    """Irrotational vortex [-y, x] / (2 r^2)."""
    points = np.asarray(points, dtype=float)
    r2 = (points**2).sum(axis=-1)
    return np.stack([-points[..., 1], points[..., 0]], axis=-1) / (2.0 * r2[..., None])


def vortex_initial(points: np.ndarray) -> np.ndarray:
    """Gaussian pulse centred at (3/4, 0)."""
    d = np.asarray(points, dtype=float) - VORTEX_CENTER
    return np.exp(-4.0 * (d**2).sum(axis=-1))


def vortex_exact(points: np.ndarray, t: float) -> np.ndarray:
    """Pulse rotated back along its circle by t / (2 r^2)."""
    points = np.asarray(points, dtype=float)
    r2 = (points**2).sum(axis=-1)
    angle = -t / (2.0 * r2)
    c, s = np.cos(angle), np.sin(angle)
    back = np.stack(
        [c * points[..., 0] - s * points[..., 1], s * points[..., 0] + c * points[..., 1]],
        axis=-1,
    )
    return vortex_initial(back)


def exp_solution(points: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Manufactured solution exp(x + y)."""
    points = np.asarray(points, dtype=float)
    return np.exp(points[..., 0] + points[..., 1])


def unit_velocity(points: np.ndarray) -> np.ndarray:
    """Constant velocity [1, 1]."""
    return np.ones(np.asarray(points).shape)


def exp_source(points: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Source lambda . grad exp(x + y) for the constant velocity."""
    return 2.0 * exp_solution(points)


def steady_exp_system(
    ops: GlobalOperators, coords: np.ndarray, diss: DissipationOp | None = None
) -> AdvectionSystem:
    """Manufactured steady problem."""
    return AdvectionSystem(ops, coords, unit_velocity, exp_solution, exp_source, diss)


def vortex_system(
    ops: GlobalOperators, coords: np.ndarray, diss: DissipationOp | None = None
) -> AdvectionSystem:
    """Vortex transport in the annulus."""
    return AdvectionSystem(ops, coords, vortex_velocity, vortex_exact, None, diss)
