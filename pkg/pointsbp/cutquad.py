"""Quadrature rules for uncut and cut cells, faces and level-set segments.

Cut cells use a two-dimensional dimension-reduction scheme. A height axis is
chosen, the base interval is split where the level set crosses the two
height-axis faces, and at every Gauss abscissa of every base piece the roots
of phi along the height line are located. Gauss rules on the live height
intervals give the volume rule, and the roots themselves give the curve rule.
A box where no height axis keeps the root functions well behaved is split
into quadrants.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from .const import (
    CELL_CUT,
    CELL_IMMERSED,
    CELL_INTERIOR,
    CUT_EXTRA_POINTS,
    FACE_INTERFACE,
    FACE_LEVELSET_BOUNDARY,
    MAX_CUT_DEPTH,
    MAX_LINE_ROOTS,
    MIN_HEIGHT_RATIO,
    ROOT_SAMPLES,
)
from .exceptions import QuadratureError
from .geometry import LevelSetGeometry
from .mesh import Cell, Face, classify_cell

_LOGGER = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadRule:
    """Points, positive weights and optional outward normals."""

    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray | None = None

    @classmethod
    def empty(cls, with_normals: bool = False) -> QuadRule:
        """Rule without points."""
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)) if with_normals else None)

    @classmethod
    def concat(cls, rules: list[QuadRule], with_normals: bool = False) -> QuadRule:
        """Join rules."""
        if not rules:
            return cls.empty(with_normals)
        normals = None
        if with_normals:
            normals = np.vstack([rule.normals for rule in rules])
        return cls(
            np.vstack([rule.points for rule in rules]),
            np.concatenate([rule.weights for rule in rules]),
            normals,
        )

    def __len__(self) -> int:
        """Number of points."""
        return len(self.weights)

    @property
    def total(self) -> float:
        """Sum of weights."""
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Apply the rule to values sampled at its points."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


@lru_cache(maxsize=64)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def gauss_rule_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [-1, 1]."""
    if n < 1:
        raise QuadratureError(f"Gauss rule needs at least one point, got {n}")
    points, weights = _leggauss(n)
    return points.copy(), weights.copy()


def points_per_axis(degree: int) -> int:
    """Gauss points needed to integrate the given degree exactly."""
    return max(1, math.ceil((degree + 1) / 2))


def _gauss_on(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    points, weights = _leggauss(n)
    half = 0.5 * (hi - lo)
    return 0.5 * (lo + hi) + half * points, half * weights


def _line_points(axis: int, t: np.ndarray, coord: float) -> np.ndarray:
    """Points whose coordinate along axis is t with the other fixed at coord."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    points = np.empty((len(t), 2))
    points[:, axis] = t
    points[:, 1 - axis] = coord
    return points


def _line_roots(
    geometry: LevelSetGeometry, axis: int, coord: float, lo: float, hi: float
) -> list[float]:
    """Roots of phi on a segment parallel to axis, in increasing order."""
    t = np.linspace(lo, hi, ROOT_SAMPLES + 1)
    values = geometry.levelset(_line_points(axis, t, coord))

    def along(s: float) -> float:
        return float(geometry.levelset(_line_points(axis, s, coord))[0])

    xtol = 4.0 * EPS * max(1.0, abs(lo), abs(hi))
    roots: list[float] = []
    for k in range(len(t) - 1):
        if k > 0 and values[k] == 0.0:
            roots.append(float(t[k]))
        elif values[k] * values[k + 1] < 0.0:
            roots.append(brentq(along, t[k], t[k + 1], xtol=xtol, rtol=4.0 * EPS))
    return roots


def _live_intervals(
    geometry: LevelSetGeometry,
    axis: int,
    coord: float,
    lo: float,
    hi: float,
    roots: list[float],
) -> list[tuple[float, float]]:
    """Pieces of [lo, hi] between roots where phi is positive."""
    breaks = [lo, *roots, hi]
    spans = [(a, b) for a, b in zip(breaks[:-1], breaks[1:]) if b - a > EPS * (hi - lo)]
    if not spans:
        return []
    mids = np.array([0.5 * (a + b) for a, b in spans])
    signs = geometry.levelset(_line_points(axis, mids, coord))
    return [span for span, value in zip(spans, signs) if value > 0.0]


def _bounds_of(cell: Cell | np.ndarray) -> np.ndarray:
    return np.asarray(getattr(cell, "bounds", cell), dtype=float)


def tensor_rule(bounds: np.ndarray, n: int) -> QuadRule:
    """Tensor Gauss rule on a box."""
    xs, wx = _gauss_on(bounds[0, 0], bounds[0, 1], n)
    ys, wy = _gauss_on(bounds[1, 0], bounds[1, 1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    weights = np.outer(wx, wy).ravel()
    return QuadRule(np.stack([gx.ravel(), gy.ravel()], axis=-1), weights)


class _Retry(Exception):
    """Height direction rejected for this box."""


def _reduce(
    bounds: np.ndarray,
    geometry: LevelSetGeometry,
    n: int,
    height: int,
    strict: bool,
) -> tuple[QuadRule, QuadRule]:
    base = 1 - height
    s0, s1 = bounds[base]
    h0, h1 = bounds[height]
    breaks = {float(s0), float(s1)}
    for coord in (h0, h1):
        breaks.update(_line_roots(geometry, base, coord, s0, s1))
    breaks = sorted(breaks)
    pieces = [(a, b) for a, b in zip(breaks[:-1], breaks[1:]) if b - a > 8.0 * EPS * (s1 - s0)]

    vol_points, vol_weights = [], []
    cur_points, cur_weights, cur_normals = [], [], []
    for a, b in pieces:
        abscissae, base_weights = _gauss_on(a, b, n)
        counts = set()
        for s, ws in zip(abscissae, base_weights):
            roots = _line_roots(geometry, height, s, h0, h1)
            if len(roots) > MAX_LINE_ROOTS:
                if strict:
                    raise _Retry
                raise QuadratureError(
                    f"Cannot isolate {len(roots)} roots in box {bounds.tolist()}"
                )
            counts.add(len(roots))
            if roots:
                at = _line_points(height, np.array(roots), s)
                grad = geometry.gradient(at)
                norm = np.linalg.norm(grad, axis=-1)
                lift = np.abs(grad[:, height])
                if strict and np.any(lift < MIN_HEIGHT_RATIO * norm):
                    raise _Retry
                ok = lift > 1e-12 * norm
                cur_points.append(at[ok])
                cur_weights.append(ws * norm[ok] / lift[ok])
                cur_normals.append(-grad[ok] / norm[ok, None])
            for lo, hi in _live_intervals(geometry, height, s, h0, h1, roots):
                ts, wt = _gauss_on(lo, hi, n)
                vol_points.append(_line_points(height, ts, s))
                vol_weights.append(ws * wt)
        if strict and len(counts) > 1:
            raise _Retry
    volume = QuadRule.concat([QuadRule(p, w) for p, w in zip(vol_points, vol_weights)])
    curve = QuadRule.concat(
        [QuadRule(p, w, nn) for p, w, nn in zip(cur_points, cur_weights, cur_normals)],
        with_normals=True,
    )
    return volume, curve


def _quadrants(bounds: np.ndarray) -> list[np.ndarray]:
    mid = bounds.mean(axis=1)
    children = []
    for xs in ((bounds[0, 0], mid[0]), (mid[0], bounds[0, 1])):
        for ys in ((bounds[1, 0], mid[1]), (mid[1], bounds[1, 1])):
            children.append(np.array([xs, ys]))
    return children


def cut_cell_rules(
    bounds: np.ndarray, geometry: LevelSetGeometry, n: int, depth: int = 0
) -> tuple[QuadRule, QuadRule]:
    """Volume and level-set curve rules of the live part of a box."""
    bounds = np.asarray(bounds, dtype=float)
    kind = classify_cell(bounds, geometry)
    if kind == CELL_INTERIOR:
        return tensor_rule(bounds, n), QuadRule.empty(with_normals=True)
    if kind == CELL_IMMERSED:
        return QuadRule.empty(), QuadRule.empty(with_normals=True)
    center_grad = np.abs(geometry.gradient(bounds.mean(axis=1)))
    order = (0, 1) if center_grad[0] >= center_grad[1] else (1, 0)
    for height in order:
        try:
            return _reduce(bounds, geometry, n, height, strict=True)
        except _Retry:
            continue
    if depth >= MAX_CUT_DEPTH:
        _LOGGER.warning("Cut quadrature at maximum depth in box %s", bounds.tolist())
        return _reduce(bounds, geometry, n, order[0], strict=False)
    _LOGGER.debug("Splitting cut box %s at depth %s", bounds.tolist(), depth)
    volumes, curves = [], []
    for child in _quadrants(bounds):
        volume, curve = cut_cell_rules(child, geometry, n, depth + 1)
        volumes.append(volume)
        curves.append(curve)
    return QuadRule.concat(volumes), QuadRule.concat(curves, with_normals=True)


def cell_volume_rule(cell: Cell, geometry: LevelSetGeometry, degree: int) -> QuadRule:
    """Volume rule of the live part of a cell, exact to the given degree."""
    bounds = _bounds_of(cell)
    kind = getattr(cell, "kind", CELL_CUT if geometry.has_levelset else CELL_INTERIOR)
    if kind == CELL_IMMERSED:
        raise QuadratureError(f"Cell {getattr(cell, 'id', bounds.tolist())} is immersed")
    if kind == CELL_INTERIOR:
        return tensor_rule(bounds, points_per_axis(degree))
    return cut_cell_rules(bounds, geometry, points_per_axis(degree + 1) + CUT_EXTRA_POINTS)[0]


def levelset_boundary_rule(cell: Cell, geometry: LevelSetGeometry, degree: int) -> QuadRule:
    """Curve rule of the level set inside a cut cell with outward normals."""
    bounds = _bounds_of(cell)
    return cut_cell_rules(bounds, geometry, points_per_axis(degree) + CUT_EXTRA_POINTS)[1]


def cell_rules(cell: Cell, geometry: LevelSetGeometry, p: int) -> tuple[QuadRule, QuadRule | None]:
    """Volume rule (degree 2p-1) and, for cut cells, curve rule (degree 2p)."""
    if cell.kind != CELL_CUT:
        return cell_volume_rule(cell, geometry, 2 * p - 1), None
    n = points_per_axis(2 * p) + CUT_EXTRA_POINTS
    try:
        return cut_cell_rules(cell.bounds, geometry, n)
    except QuadratureError as err:
        raise QuadratureError(f"Cell {cell.id}: {err}") from err


def face_live_segments(face: Face, geometry: LevelSetGeometry) -> list[tuple[float, float]]:
    """Pieces of an axis-aligned face where phi is positive."""
    lo, hi = face.extent
    if not face.cut:
        return [(lo, hi)]
    along = 1 - face.axis
    roots = _line_roots(geometry, along, face.coord, lo, hi)
    return _live_intervals(geometry, along, face.coord, lo, hi, roots)


def face_normal(face: Face) -> np.ndarray:
    """Unit normal of an axis face: +axis for interfaces, outward otherwise."""
    normal = np.zeros(2)
    if face.kind == FACE_INTERFACE or face.side_pos is None:
        normal[face.axis] = 1.0
    else:
        normal[face.axis] = -1.0
    return normal


def face_rule(face: Face, geometry: LevelSetGeometry, degree: int) -> QuadRule:
    """Rule on the live part of an axis-aligned face, exact to the given degree."""
    if face.kind == FACE_LEVELSET_BOUNDARY:
        raise QuadratureError(f"Face {face.id} is a level-set segment")
    n = points_per_axis(degree)
    along = 1 - face.axis
    rules = []
    for lo, hi in face_live_segments(face, geometry):
        ts, wt = _gauss_on(lo, hi, n)
        rules.append(QuadRule(_line_points(along, ts, face.coord), wt))
    rule = QuadRule.concat(rules)
    normals = np.tile(face_normal(face), (len(rule), 1))
    return QuadRule(rule.points, rule.weights, normals)
