"""Nearest-node cell stencils grown until the Vandermonde is well conditioned."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .basis import basis_dim, cond_estimate, vandermonde
from .exceptions import StencilError
from .mesh import BackgroundMesh, Cell

_LOGGER = logging.getLogger(__name__)

# extra neighbours fetched so distance ties at the cutoff resolve by index
TIE_MARGIN = 8


@dataclass(frozen=True)
class Stencil:
    """Nodes a cell's local operators act on."""

    cell_id: int
    node_ids: np.ndarray
    cond: float

    @property
    def size(self) -> int:
        """Number of stencil nodes."""
        return len(self.node_ids)


def default_n_max(p: int) -> int:
    """Maximum number of extra nodes."""
    return 4 * p - 1


def default_tol(p: int) -> float:
    """Condition-number threshold."""
    return 5.0 * 10.0 ** (2 * p - 1)


def ordered_candidates(
    tree: cKDTree, coords: np.ndarray, center: np.ndarray, count: int
) -> np.ndarray:
    """Nearest node ids sorted by (distance, index)."""
    k = min(len(coords), count + TIE_MARGIN)
    _, idx = tree.query(center, k=k)
    idx = np.atleast_1d(idx)
    dist2 = ((coords[idx] - center) ** 2).sum(axis=1)
    order = np.lexsort((idx, dist2))
    return idx[order][:count]


def build_stencil(
    cell: Cell,
    tree: cKDTree,
    coords: np.ndarray,
    p: int,
    n_max: int,
    tol: float,
    spacing: float = 1.0,
) -> Stencil:
    """Grow the stencil of one cell."""
    start = basis_dim(2 * p - 1, 2)
    candidates = ordered_candidates(tree, coords, cell.centroid, start + n_max)
    cond = math.inf
    size = start + 1
    for n in range(1, n_max + 1):
        size = min(start + n, len(candidates))
        cond = cond_estimate(vandermonde(coords[candidates[:size]], 2 * p - 1, spacing=spacing).values)
        _LOGGER.debug("Cell %s stencil size %s cond %.3e", cell.id, size, cond)
        if cond < tol or size == len(candidates):
            break
    if cond >= tol:
        _LOGGER.warning(
            "Cell %s stencil stopped at %s nodes with cond %.3e above %.3e",
            cell.id,
            size,
            cond,
            tol,
        )
    return Stencil(cell.id, candidates[:size].copy(), cond)


def build_stencils(
    mesh: BackgroundMesh,
    nodes: np.ndarray,
    p: int,
    n_max: int | None = None,
    tol: float | None = None,
) -> dict[int, Stencil]:
    """Stencils for every live cell, keyed by cell id."""
    coords = np.asarray(getattr(nodes, "coords", nodes), dtype=float)
    spacing = float(getattr(nodes, "nominal_spacing", 1.0))
    n_max = default_n_max(p) if n_max is None else n_max
    tol = default_tol(p) if tol is None else tol
    needed = basis_dim(2 * p - 1, 2) + 1
    if len(coords) < needed:
        raise StencilError(
            f"Node set too sparse: {len(coords)} nodes, need at least {needed} for p={p}"
        )
    tree = cKDTree(coords)
    stencils = {
        cell.id: build_stencil(cell, tree, coords, p, n_max, tol, spacing)
        for cell in mesh.live_cells
    }
    _LOGGER.debug(
        "Built %s stencils, sizes %s..%s",
        len(stencils),
        min(s.size for s in stencils.values()),
        max(s.size for s in stencils.values()),
    )
    return stencils
