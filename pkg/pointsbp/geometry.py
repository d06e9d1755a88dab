"""Level-set geometries and reproducible node samplers."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfi

from .const import (
    DEFAULT_ANNULUS_ASPECT,
    DEFAULT_BETA,
    DEFAULT_JITTER,
    GEOMETRIES,
    GEOMETRY_AIRFOIL,
    GEOMETRY_ANNULUS,
    GEOMETRY_BOX,
    GEOMETRY_BOX_CIRCLE,
    GEOMETRY_CONIC,
    INTEGRAL_ANNULUS,
    INTEGRAL_BOX,
    INTEGRAL_FOIL,
)
from .exceptions import GeometryError, SamplingError

_LOGGER = logging.getLogger(__name__)

PointMap = Callable[[np.ndarray], np.ndarray]

CONIC_PARAM_RANGE = (0.01, 0.99)


@dataclass(frozen=True)
class LevelSetGeometry:
    """Box bounds plus an optional level set, positive inside the domain."""

    kind: str
    bounds: np.ndarray
    phi: PointMap | None = None
    grad_phi: PointMap | None = None
    params: dict = field(default_factory=dict)

    @property
    def has_levelset(self) -> bool:
        """Return True if a curved boundary is present."""
        return self.phi is not None

    @property
    def lower(self) -> np.ndarray:
        """Lower box corner."""
        return self.bounds[:, 0]

    @property
    def upper(self) -> np.ndarray:
        """Upper box corner."""
        return self.bounds[:, 1]

    def levelset(self, points: np.ndarray) -> np.ndarray:
        """Evaluate phi at points of shape (..., 2)."""
        points = np.asarray(points, dtype=float)
        if self.phi is None:
            return np.ones(points.shape[:-1])
        return self.phi(points)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Evaluate grad phi at points of shape (..., 2)."""
        points = np.asarray(points, dtype=float)
        if self.grad_phi is None:
            return np.zeros(points.shape)
        return self.grad_phi(points)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Return mask of points inside the box."""
        points = np.asarray(points, dtype=float)
        return np.all((points >= self.lower) & (points <= self.upper), axis=-1)


@dataclass(frozen=True)
class SamplerConfig:
    """Node sampler settings."""

    kind: str
    resolution: int | tuple[int, int]
    beta: float = DEFAULT_BETA
    seed: int = 0
    jitter: float = DEFAULT_JITTER
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NodeSet:
    """Sampled nodes with the metadata used by tolerance heuristics."""

    coords: np.ndarray
    seed: int
    nominal_spacing: float
    volumes: np.ndarray
    resolution: int | tuple[int, int]

    def __len__(self) -> int:
        """Number of nodes."""
        return len(self.coords)


def _box_circle_phi(x: np.ndarray) -> np.ndarray:
    return (x[..., 0] - 0.5) ** 2 + (x[..., 1] - 0.5) ** 2 - 1 / 16


def _box_circle_grad(x: np.ndarray) -> np.ndarray:
    return 2.0 * (x - 0.5)


def _annulus_phi(x: np.ndarray) -> np.ndarray:
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    return (r2 - 0.25) * (1.0 - r2)


def _annulus_grad(x: np.ndarray) -> np.ndarray:
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    dr2 = 1.25 - 2.0 * r2
    return 2.0 * x * dr2[..., None]


def _airfoil_phi(x: np.ndarray) -> np.ndarray:
    return x[..., 0] * (x[..., 0] - 1.0) ** 2 - 16.0 * x[..., 1] ** 2


def _airfoil_grad(x: np.ndarray) -> np.ndarray:
    gx = (x[..., 0] - 1.0) * (3.0 * x[..., 0] - 1.0)
    gy = -32.0 * x[..., 1]
    return np.stack([gx, gy], axis=-1)


def _conic(xi: float, eta: float, zeta: float) -> tuple[PointMap, PointMap]:
    def phi(x: np.ndarray) -> np.ndarray:
        return 1.0 - zeta * x[..., 0] ** 2 / xi - x[..., 1] ** 2 / eta

    def grad(x: np.ndarray) -> np.ndarray:
        return np.stack(
            [-2.0 * zeta * x[..., 0] / xi, -2.0 * x[..., 1] / eta], axis=-1
        )

    return phi, grad


def make_geometry(kind: str, params: dict | None = None) -> LevelSetGeometry:
    """Create one of the study geometries."""
    params = dict(params or {})
    if kind == GEOMETRY_BOX:
        bounds = np.asarray(params.get("bounds", [[0.0, 1.0], [0.0, 1.0]]), float)
        return LevelSetGeometry(kind, bounds, params=params)
    if kind == GEOMETRY_BOX_CIRCLE:
        return LevelSetGeometry(
            kind,
            np.array([[0.0, 1.0], [0.0, 1.0]]),
            _box_circle_phi,
            _box_circle_grad,
            params,
        )
    if kind == GEOMETRY_ANNULUS:
        return LevelSetGeometry(
            kind,
            np.array([[-1.0, 1.0], [-1.0, 1.0]]),
            _annulus_phi,
            _annulus_grad,
            params,
        )
    if kind == GEOMETRY_AIRFOIL:
        return LevelSetGeometry(
            kind,
            np.array([[0.0, 1.0], [-0.1, 0.1]]),
            _airfoil_phi,
            _airfoil_grad,
            params,
        )
    if kind == GEOMETRY_CONIC:
        try:
            xi = float(params["xi"])
            eta = float(params["eta"])
            zeta = float(params["zeta"])
        except KeyError as err:
            raise GeometryError(f"Conic geometry missing parameter {err}") from err
        low, high = CONIC_PARAM_RANGE
        if not (low <= xi <= high and low <= eta <= high):
            raise GeometryError(
                f"Conic parameters xi={xi}, eta={eta} outside [{low}, {high}]"
            )
        if zeta not in (-1.0, 1.0):
            raise GeometryError(f"Conic zeta must be +1 or -1, got {zeta}")
        phi, grad = _conic(xi, eta, zeta)
        return LevelSetGeometry(
            kind, np.array([[-1.0, 1.0], [-1.0, 1.0]]), phi, grad, params
        )
    raise GeometryError(f"Unknown geometry kind {kind!r}, expected one of {GEOMETRIES}")


def random_conic_params(rng: np.random.Generator) -> dict:
    """Draw conic parameters from a study stream."""
    low, high = CONIC_PARAM_RANGE
    xi, eta = rng.uniform(low, high, size=2)
    zeta = 1.0 if rng.uniform() < 0.5 else -1.0
    return {"xi": float(xi), "eta": float(eta), "zeta": zeta}


def make_rng(seed: int) -> np.random.Generator:
    """Seeded 64-bit PCG generator."""
    return np.random.Generator(np.random.PCG64(seed))


def stretch(z: np.ndarray, beta: float) -> np.ndarray:
    """Radial stretching g(z) = (exp(beta z) - 1) / (exp(beta) - 1)."""
    if beta < 1e-12:
        return np.asarray(z, dtype=float)
    return np.expm1(beta * z) / np.expm1(beta)


def stretch_derivative(z: np.ndarray, beta: float) -> np.ndarray:
    """Derivative g'(z) of the stretching."""
    if beta < 1e-12:
        return np.ones_like(np.asarray(z, dtype=float))
    return beta * np.exp(beta * z) / np.expm1(beta)


def _lattice(nx: int, ny: int) -> tuple[np.ndarray, np.ndarray]:
    """Return 1-based (j, k) lattice indices with j running fastest."""
    k, j = np.meshgrid(np.arange(1, ny + 1), np.arange(1, nx + 1), indexing="ij")
    return j.ravel().astype(float), k.ravel().astype(float)


def _annulus_resolution(resolution: int | tuple[int, int]) -> tuple[int, int]:
    if isinstance(resolution, (tuple, list)):
        return int(resolution[0]), int(resolution[1])
    return int(resolution), DEFAULT_ANNULUS_ASPECT * int(resolution)


def _sample_once(
    config: SamplerConfig, geometry: LevelSetGeometry, resolution
) -> tuple[np.ndarray, np.ndarray, float]:
    """Return coords, nominal volumes and spacing before filtering."""
    rng = make_rng(config.seed)
    kind = config.kind
    if kind in (GEOMETRY_BOX, GEOMETRY_BOX_CIRCLE, GEOMETRY_CONIC):
        n = int(resolution)
        width = geometry.upper - geometry.lower
        delta = width / n
        j, k = _lattice(n, n)
        noise = rng.uniform(-1.0, 1.0, size=(len(j), 2)) * config.jitter * delta
        coords = np.stack(
            [
                geometry.lower[0] + (j - 0.5) * delta[0],
                geometry.lower[1] + (k - 0.5) * delta[1],
            ],
            axis=-1,
        )
        coords = coords + noise
        volumes = np.full(len(coords), float(np.prod(delta)))
        return coords, volumes, float(delta.max())
    if kind == GEOMETRY_AIRFOIL:
        ny = int(resolution)
        nx = 5 * ny
        delta = 1.0 / nx
        j, k = _lattice(nx, ny)
        noise = rng.uniform(-1.0, 1.0, size=(len(j), 2)) * config.jitter * delta
        coords = np.stack(
            [(j - 0.5) * delta, geometry.lower[1] + (k - 0.5) * delta], axis=-1
        )
        coords = coords + noise
        return coords, np.full(len(coords), delta**2), delta
    if kind == GEOMETRY_ANNULUS:
        nr, ntheta = _annulus_resolution(resolution)
        drho = 1.0 / nr
        dtheta = 2.0 * math.pi / ntheta
        j, k = _lattice(nr, ntheta)
        noise = rng.uniform(-1.0, 1.0, size=(len(j), 2)) * config.jitter
        rho = stretch((j - 0.5) * drho + noise[:, 0] * drho, config.beta)
        radius = rho + (1.0 - rho) / 2.0
        theta = (k - 0.5) * dtheta + noise[:, 1] * dtheta
        coords = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=-1)
        dr = stretch_derivative((j - 0.5) * drho, config.beta) * drho
        volumes = dr * radius * dtheta
        return coords, volumes, 0.5 * drho
    raise GeometryError(f"No sampler for geometry kind {kind!r}")


def sample_nodes(
    config: SamplerConfig, geometry: LevelSetGeometry, min_nodes: int = 1
) -> NodeSet:
    """Sample perturbed lattice nodes and drop those in the immersed region."""
    if config.kind != geometry.kind:
        raise SamplingError(
            f"Sampler kind {config.kind!r} does not match geometry {geometry.kind!r}"
        )
    resolution = config.resolution
    while True:
        coords, volumes, spacing = _sample_once(config, geometry, resolution)
        keep = (geometry.levelset(coords) >= 0.0) & geometry.contains(coords)
        coords = coords[keep]
        volumes = volumes[keep]
        if len(coords) >= min_nodes or config.kind != GEOMETRY_CONIC:
            break
        _LOGGER.debug(
            "Conic sample with n_x=%s has %s nodes, need %s", resolution, len(coords), min_nodes
        )
        resolution = int(resolution) + 1
    if len(coords) == 0:
        raise SamplingError(f"Sampler {config.kind} at {resolution} left no nodes")
    if config.kind == GEOMETRY_BOX_CIRCLE:
        volumes = np.full(len(coords), (1.0 - math.pi / 16.0) / len(coords))
    _LOGGER.debug("Sampled %s nodes for %s at %s", len(coords), config.kind, resolution)
    return NodeSet(coords, config.seed, spacing, volumes, resolution)


def exact_integrals(kind: str) -> float:
    """Exact integral of the quadrature-study integrand."""
    if kind == INTEGRAL_BOX:
        return 0.0
    if kind == INTEGRAL_ANNULUS:
        return 2.0 * math.pi * (math.e - math.exp(0.5))
    if kind == INTEGRAL_FOIL:
        return 0.75 * math.e - 0.625 * math.sqrt(math.pi) * float(erfi(1.0))
    raise GeometryError(f"No exact integral for {kind!r}")


INTEGRAL_FOR_GEOMETRY = {
    GEOMETRY_BOX_CIRCLE: INTEGRAL_BOX,
    GEOMETRY_ANNULUS: INTEGRAL_ANNULUS,
    GEOMETRY_AIRFOIL: INTEGRAL_FOIL,
}


def integrand(kind: str, points: np.ndarray) -> np.ndarray:
    """Quadrature-study integrand at points."""
    points = np.asarray(points, dtype=float)
    if kind == INTEGRAL_BOX:
        dx = points[..., 0] - 0.5
        dy = points[..., 1] - 0.5
        r = np.hypot(dx, dy)
        return (dx**2 - dy**2) / r**3
    if kind == INTEGRAL_ANNULUS:
        r = np.hypot(points[..., 0], points[..., 1])
        return np.exp(r) / r
    if kind == INTEGRAL_FOIL:
        return np.exp(points[..., 0])
    raise GeometryError(f"No integrand for {kind!r}")


def exact_area(kind: str, bounds: np.ndarray | None = None) -> float | None:
    """Area of the domain where it is known in closed form."""
    if kind == GEOMETRY_BOX and bounds is not None:
        return float(np.prod(np.diff(np.asarray(bounds, dtype=float), axis=1)))
    return {
        GEOMETRY_BOX: 1.0,
        GEOMETRY_BOX_CIRCLE: 1.0 - math.pi / 16.0,
        GEOMETRY_ANNULUS: 0.75 * math.pi,
        GEOMETRY_AIRFOIL: 2.0 / 15.0,
    }.get(kind)
