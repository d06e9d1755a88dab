"""Interface jump dissipation from single-point face-center interpolants."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .cellops import CellOperator
from .const import DEFAULT_DISSIPATION, FACE_INTERFACE
from .cutquad import face_live_segments
from .mesh import BackgroundMesh, Face

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class DissipationOp:
    """Symmetric positive semidefinite dissipation matrix."""

    a: sparse.csr_matrix
    eps: float

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply A."""
        return self.a @ u


def face_center(face: Face, mesh: BackgroundMesh) -> tuple[np.ndarray, float] | None:
    """Midpoint of the longest live piece of a face and the live length."""
    segments = face_live_segments(face, mesh.geometry)
    if not segments:
        return None
    lo, hi = max(segments, key=lambda seg: seg[1] - seg[0])
    center = np.empty(2)
    center[face.axis] = face.coord
    center[1 - face.axis] = 0.5 * (lo + hi)
    return center, float(sum(b - a for a, b in segments))


def _point_interp(op: CellOperator, point: np.ndarray) -> np.ndarray:
    return (op.basis.at(point[None, :]) @ op.basis.pinv)[0]


def build_dissipation(
    mesh: BackgroundMesh,
    cell_ops: dict[int, CellOperator],
    n_nodes: int,
    eps: float = DEFAULT_DISSIPATION,
) -> DissipationOp:
    """Accumulate eps * B (R+ - R-)^T (R+ - R-) over interfaces."""
    rows, cols, vals = [np.zeros(0, int)], [np.zeros(0, int)], [np.zeros(0)]
    if eps != 0.0:
        for face in sorted(mesh.faces, key=lambda f: f.id):
            if face.kind != FACE_INTERFACE:
                continue
            found = face_center(face, mesh)
            if found is None:
                continue
            center, length = found
            neg = cell_ops[face.side_neg]
            pos = cell_ops[face.side_pos]
            ids = np.concatenate([pos.node_ids, neg.node_ids])
            jump = np.concatenate([_point_interp(pos, center), -_point_interp(neg, center)])
            unique, inverse = np.unique(ids, return_inverse=True)
            d = np.zeros(len(unique))
            np.add.at(d, inverse, jump)
            block = eps * length * np.outer(d, d)
            rows.append(np.repeat(unique, len(unique)))
            cols.append(np.tile(unique, len(unique)))
            vals.append(block.ravel())
    a = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_nodes, n_nodes),
    ).tocsr()
    a = (0.5 * (a + a.T)).tocsr()
    _LOGGER.debug("Dissipation with eps=%s has %s nonzeros", eps, a.nnz)
    return DissipationOp(a, eps)
