"""Orthonormal total-degree polynomial basis on the reference triangle.

The reference triangle is {r, s > -1, r + s < 0}. Nodes are mapped affinely
from their bounding box onto [-1, 0]^2, which lies inside it, and the basis
is the collapsed-coordinate Proriol family built from normalized Jacobi
polynomials. Derivative matrices are returned with respect to physical
coordinates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import svdvals
from scipy.special import eval_jacobi, gammaln

_LOGGER = logging.getLogger(__name__)

REFERENCE_LOWER = -1.0
REFERENCE_WIDTH = 1.0


def basis_dim(p: int, d: int = 2) -> int:
    """Dimension of the total-degree p polynomial space in d dimensions."""
    return math.comb(p + d, d)


@dataclass(frozen=True)
class PolyBasis:
    """Total-degree basis description."""

    degree: int

    @cached_property
    def dim(self) -> int:
        """Number of basis functions."""
        return basis_dim(self.degree, 2)

    @cached_property
    def modes(self) -> list[tuple[int, int]]:
        """Graded (i, j) mode indices, total degree i + j."""
        return [(i, n - i) for n in range(self.degree + 1) for i in range(n + 1)]


@dataclass(frozen=True)
class AffineMap:
    """Map from physical coordinates onto the [-1, 0]^2 reference box."""

    lower: np.ndarray
    scale: np.ndarray

    @classmethod
    def from_points(cls, points: np.ndarray, spacing: float = 1.0) -> AffineMap:
        """Build the map from the bounding box of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        width = hi - lo
        flat = width <= 1e-14 * max(1.0, float(np.abs(points).max()))
        if np.any(flat):
            lo = np.where(flat, lo - 0.5 * spacing, lo)
            width = np.where(flat, spacing, width)
        return cls(lo, REFERENCE_WIDTH / width)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Map physical points to reference points."""
        return REFERENCE_LOWER + (np.asarray(points, dtype=float) - self.lower) * self.scale


@dataclass(frozen=True)
class Vandermonde:
    """Basis values and physical derivatives at a set of points."""

    values: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    amap: AffineMap
    degree: int

    def derivative(self, axis: int) -> np.ndarray:
        """Derivative matrix along axis."""
        return self.dx if axis == 0 else self.dy

    def truncate(self, degree: int) -> Vandermonde:
        """Columns of a lower degree; graded ordering makes these a prefix."""
        ncol = basis_dim(degree, 2)
        return Vandermonde(
            self.values[:, :ncol], self.dx[:, :ncol], self.dy[:, :ncol], self.amap, degree
        )


def _jacobi(x: np.ndarray, alpha: float, beta: float, n: int) -> np.ndarray:
    """Jacobi polynomial normalized on [-1, 1] with its weight."""
    log_norm = (
        (alpha + beta + 1) * math.log(2.0)
        - math.log(2 * n + alpha + beta + 1)
        + gammaln(n + alpha + 1)
        + gammaln(n + beta + 1)
        - gammaln(n + alpha + beta + 1)
        - gammaln(n + 1)
    )
    return eval_jacobi(n, alpha, beta, x) / math.exp(0.5 * log_norm)


def _grad_jacobi(x: np.ndarray, alpha: float, beta: float, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros_like(x)
    return math.sqrt(n * (n + alpha + beta + 1)) * _jacobi(x, alpha + 1, beta + 1, n - 1)


def proriol(ref: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate the basis and its reference derivatives at reference points."""
    ref = np.atleast_2d(ref)
    r = ref[:, 0]
    s = ref[:, 1]
    denom = 1.0 - s
    safe = np.abs(denom) > 1e-14
    a = np.where(safe, 2.0 * (1.0 + r) / np.where(safe, denom, 1.0) - 1.0, -1.0)
    b = s
    half = 0.5 * (1.0 - b)
    modes = PolyBasis(p).modes
    values = np.empty((len(r), len(modes)))
    dr = np.empty_like(values)
    ds = np.empty_like(values)
    for col, (i, j) in enumerate(modes):
        fa = _jacobi(a, 0.0, 0.0, i)
        dfa = _grad_jacobi(a, 0.0, 0.0, i)
        gb = _jacobi(b, 2 * i + 1.0, 0.0, j)
        dgb = _grad_jacobi(b, 2 * i + 1.0, 0.0, j)
        values[:, col] = math.sqrt(2.0) * fa * gb * (1.0 - b) ** i
        lower = half ** (i - 1) if i > 0 else np.zeros_like(b)
        dmode_r = dfa * gb * lower if i > 0 else np.zeros_like(b)
        dmode_s = dfa * gb * 0.5 * (1.0 + a) * lower if i > 0 else np.zeros_like(b)
        tmp = dgb * half**i
        if i > 0:
            tmp = tmp - 0.5 * i * gb * lower
        dmode_s = dmode_s + fa * tmp
        factor = 2.0 ** (i + 0.5)
        dr[:, col] = factor * dmode_r
        ds[:, col] = factor * dmode_s
    return values, dr, ds


def vandermonde(
    points: np.ndarray,
    p: int,
    amap: AffineMap | None = None,
    spacing: float = 1.0,
) -> Vandermonde:
    """Vandermonde matrix of the degree-p basis at points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if amap is None:
        amap = AffineMap.from_points(points, spacing)
    values, dr, ds = proriol(amap(points), p)
    return Vandermonde(values, dr * amap.scale[0], ds * amap.scale[1], amap, p)


def cond_estimate(matrix: np.ndarray) -> float:
    """2-norm condition number, infinite when numerically rank deficient."""
    sigma = svdvals(np.asarray(matrix, dtype=float))
    if len(sigma) == 0 or sigma[0] == 0.0:
        return math.inf
    if sigma[-1] <= max(matrix.shape) * np.finfo(float).eps * sigma[0]:
        return math.inf
    return float(sigma[0] / sigma[-1])
