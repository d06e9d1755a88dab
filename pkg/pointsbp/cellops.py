"""Per-cell degenerate SBP ingredients."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import qr, solve_triangular

from .basis import AffineMap, Vandermonde, basis_dim, vandermonde
from .const import FACE_INTERFACE, RANK_CUTOFF
from .cutquad import QuadRule
from .exceptions import CellOperatorError
from .mesh import Cell, Face
from .stencil import Stencil

_LOGGER = logging.getLogger(__name__)


def _check_rank(r: np.ndarray, what: str) -> None:
    diag = np.abs(np.diag(r))
    if len(diag) and diag.min() <= RANK_CUTOFF * diag.max():
        raise CellOperatorError(f"{what} is rank deficient (|r_ii| min {diag.min():.3e})")


@dataclass(frozen=True)
class StencilBasis:
    """Stencil Vandermonde matrices and their thin QR factors."""

    cell_id: int
    node_ids: np.ndarray
    amap: AffineMap
    p: int
    high: Vandermonde
    low: Vandermonde
    u: np.ndarray
    r: np.ndarray
    pinv: np.ndarray

    @classmethod
    def build(
        cls,
        cell: Cell,
        stencil: Stencil,
        coords: np.ndarray,
        p: int,
        spacing: float = 1.0,
    ) -> StencilBasis:
        """Evaluate the stencil bases on a map covering the stencil and cell."""
        local = coords[stencil.node_ids]
        amap = AffineMap.from_points(np.vstack([local, cell.corners]), spacing)
        high = vandermonde(local, 2 * p - 1, amap)
        low = high.truncate(p)
        u, r = qr(low.values, mode="economic")
        _check_rank(r, f"Cell {cell.id} degree-{p} Vandermonde")
        pinv = solve_triangular(r, u.T)
        return cls(cell.id, stencil.node_ids, amap, p, high, low, u, r, pinv)

    @property
    def size(self) -> int:
        """Stencil size."""
        return len(self.node_ids)

    def at(self, points: np.ndarray, degree: int | None = None) -> np.ndarray:
        """Basis values at points on this stencil's map."""
        return vandermonde(points, self.p if degree is None else degree, self.amap).values


@dataclass(frozen=True)
class CellNorm:
    """Minimum-norm cell weights and the orthonormal null-space basis."""

    m_min: np.ndarray
    z: np.ndarray
    b: np.ndarray

    def weights(self, y: np.ndarray | None = None) -> np.ndarray:
        """Weights m_min + Z y."""
        if y is None or len(y) == 0:
            return self.m_min.copy()
        return self.m_min + self.z @ y


def cell_norm(basis: StencilBasis, cell_rule: QuadRule) -> CellNorm:
    """Minimum-norm solution of V^T m = b and a basis of its null space."""
    v2 = basis.high.values
    ncol = v2.shape[1]
    if len(cell_rule):
        b = basis.at(cell_rule.points, 2 * basis.p - 1).T @ cell_rule.weights
    else:
        b = np.zeros(ncol)
    q, r = qr(v2)
    _check_rank(r[:ncol], f"Cell {basis.cell_id} degree-{2 * basis.p - 1} Vandermonde")
    y = solve_triangular(r[:ncol], b, trans="T")
    m_min = q[:, :ncol] @ y
    return CellNorm(m_min, q[:, ncol:].copy(), b)


def face_interpolation(basis: StencilBasis, face_rule: QuadRule) -> np.ndarray:
    """Interpolation R = V^f V^+ from stencil nodes to face points."""
    if len(face_rule) == 0:
        return np.zeros((0, basis.size))
    return basis.at(face_rule.points) @ basis.pinv


def cell_E(
    interps: list[np.ndarray], rules: list[QuadRule]
) -> tuple[np.ndarray, np.ndarray]:
    """Boundary matrices from interpolations and rules with outward normals."""
    if not interps:
        raise CellOperatorError("Cell has no boundary faces")
    size = interps[0].shape[1]
    ex = np.zeros((size, size))
    ey = np.zeros((size, size))
    for interp, rule in zip(interps, rules):
        if len(rule) == 0:
            continue
        ex += interp.T @ ((rule.weights * rule.normals[:, 0])[:, None] * interp)
        ey += interp.T @ ((rule.weights * rule.normals[:, 1])[:, None] * interp)
    return 0.5 * (ex + ex.T), 0.5 * (ey + ey.T)


def cell_S(basis: StencilBasis, m: np.ndarray, e: np.ndarray, axis: int) -> np.ndarray:
    """Skew part from the thin-QR formula, so that (S + E/2) V = diag(m) V_d."""
    v = basis.low.values
    g = m[:, None] * basis.low.derivative(axis) - 0.5 * e @ v
    w = basis.pinv
    s = g @ w - w.T @ g.T + w.T @ (g.T @ basis.u) @ basis.u.T
    return 0.5 * (s - s.T)


@dataclass(frozen=True)
class CellOperator:
    """Local norm, boundary and skew matrices of one cell."""

    basis: StencilBasis
    norm: CellNorm
    m: np.ndarray
    e: tuple[np.ndarray, np.ndarray]
    s: tuple[np.ndarray, np.ndarray]
    face_interp: dict[int, np.ndarray] = field(default_factory=dict)
    face_rules: dict[int, QuadRule] = field(default_factory=dict)

    @property
    def cell_id(self) -> int:
        """Cell id."""
        return self.basis.cell_id

    @property
    def node_ids(self) -> np.ndarray:
        """Global ids of the stencil nodes."""
        return self.basis.node_ids

    @property
    def ny(self) -> int:
        """Null-space dimension."""
        return self.norm.z.shape[1]

    def with_weights(self, m: np.ndarray) -> CellOperator:
        """Rebuild the skew matrices for new cell weights."""
        sx = cell_S(self.basis, m, self.e[0], 0)
        sy = cell_S(self.basis, m, self.e[1], 1)
        return replace(self, m=np.asarray(m, dtype=float), s=(sx, sy))


def outward_rule(face: Face, cell_id: int, rule: QuadRule) -> QuadRule:
    """Rule with normals pointing out of the given cell."""
    if face.kind != FACE_INTERFACE or face.outward_sign(cell_id) > 0:
        return rule
    return QuadRule(rule.points, rule.weights, -rule.normals)


def build_cell_operator(
    cell: Cell,
    stencil: Stencil,
    coords: np.ndarray,
    volume_rule: QuadRule,
    faces: list[Face],
    face_rules: dict[int, QuadRule],
    p: int,
    spacing: float = 1.0,
) -> CellOperator:
    """Assemble the cell operator with the minimum-norm weights."""
    basis = StencilBasis.build(cell, stencil, coords, p, spacing)
    norm = cell_norm(basis, volume_rule)
    interps: dict[int, np.ndarray] = {}
    rules: dict[int, QuadRule] = {}
    for face in faces:
        try:
            rule = face_rules[face.id]
        except KeyError as err:
            raise CellOperatorError(f"Cell {cell.id} missing rule for face {face.id}") from err
        interps[face.id] = face_interpolation(basis, rule)
        rules[face.id] = rule
    outward = [outward_rule(face, cell.id, rules[face.id]) for face in faces]
    ex, ey = cell_E([interps[face.id] for face in faces], outward)
    m = norm.weights()
    sx = cell_S(basis, m, ex, 0)
    sy = cell_S(basis, m, ey, 1)
    expected = basis_dim(2 * p - 1, 2)
    if norm.z.shape[1] != stencil.size - expected:
        raise CellOperatorError(f"Cell {cell.id} null space has wrong size")
    return CellOperator(basis, norm, m, (ex, ey), (sx, sy), interps, rules)
