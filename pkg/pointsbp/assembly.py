"""Global assembly of the degenerate SBP pair."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .basis import AffineMap, Vandermonde, vandermonde
from .cellops import CellOperator
from .const import FACE_INTERFACE, FACE_LEVELSET_BOUNDARY
from .cutquad import face_rule, levelset_boundary_rule
from .exceptions import AssemblyError
from .geometry import LevelSetGeometry
from .mesh import BackgroundMesh

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundaryFace:
    """Interpolation, weights and outward normals of one boundary face."""

    face_id: int
    kind: str
    node_ids: np.ndarray
    interp: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Interpolate a nodal vector to the face points."""
        return self.interp @ u[self.node_ids]


@dataclass(frozen=True)
class GlobalOperators:
    """Diagonal norm, strictly upper skew parts and boundary faces."""

    m: np.ndarray
    s_upper: tuple[sparse.csr_matrix, sparse.csr_matrix]
    boundary_faces: list[BoundaryFace]
    p: int

    @property
    def n(self) -> int:
        """Number of nodes."""
        return len(self.m)

    def skew(self, axis: int) -> sparse.csr_matrix:
        """Skew matrix S along axis."""
        upper = self.s_upper[axis]
        return (upper - upper.T).tocsr()

    @property
    def sx(self) -> sparse.csr_matrix:
        """Skew matrix along x."""
        return self.skew(0)

    @property
    def sy(self) -> sparse.csr_matrix:
        """Skew matrix along y."""
        return self.skew(1)

    def apply_s(self, u: np.ndarray, axis: int) -> np.ndarray:
        """Apply S without forming it."""
        upper = self.s_upper[axis]
        return upper @ u - upper.T @ u

    def apply_q(self, u: np.ndarray, axis: int) -> np.ndarray:
        """Apply Q = S + E/2."""
        return self.apply_s(u, axis) + 0.5 * apply_E(self, u, axis)


def _scatter(ids_a: np.ndarray, ids_b: np.ndarray, block: np.ndarray):
    rows = np.repeat(ids_a, len(ids_b))
    cols = np.tile(ids_b, len(ids_a))
    return rows, cols, block.ravel()


def _interface_block(face, cell_ops: dict[int, CellOperator], axis: int):
    neg = cell_ops.get(face.side_neg)
    pos = cell_ops.get(face.side_pos)
    if neg is None or pos is None:
        raise AssemblyError(f"Interface {face.id} is missing a side operator")
    rule = neg.face_rules[face.id]
    if len(rule) == 0:
        return None
    scaled = rule.weights * rule.normals[:, axis]
    if not np.any(scaled):
        return None
    r_neg = neg.face_interp[face.id]
    r_pos = pos.face_interp[face.id]
    return neg.node_ids, pos.node_ids, 0.5 * r_neg.T @ (scaled[:, None] * r_pos)


def assemble(
    mesh: BackgroundMesh,
    cell_ops: dict[int, CellOperator],
    n_nodes: int,
    p: int,
) -> GlobalOperators:
    """Scatter cell operators and add the interface coupling terms."""
    m = np.zeros(n_nodes)
    for cid in sorted(cell_ops):
        op = cell_ops[cid]
        if np.any(op.node_ids >= n_nodes) or np.any(op.node_ids < 0):
            raise AssemblyError(f"Cell {cid} stencil index out of range")
        np.add.at(m, op.node_ids, op.m)

    interfaces = sorted(
        (face for face in mesh.faces if face.kind == FACE_INTERFACE), key=lambda f: f.id
    )
    uppers = []
    for axis in (0, 1):
        rows, cols, vals = [], [], []
        for cid in sorted(cell_ops):
            op = cell_ops[cid]
            r, c, v = _scatter(op.node_ids, op.node_ids, op.s[axis])
            rows.append(r)
            cols.append(c)
            vals.append(v)
        for face in interfaces:
            if face.axis != axis:
                continue
            block = _interface_block(face, cell_ops, axis)
            if block is None:
                continue
            ids_neg, ids_pos, t = block
            for a, b, blk in ((ids_neg, ids_pos, t), (ids_pos, ids_neg, -t.T)):
                r, c, v = _scatter(a, b, blk)
                rows.append(r)
                cols.append(c)
                vals.append(v)
        full = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_nodes, n_nodes),
        ).tocsr()
        full.sum_duplicates()
        upper = sparse.triu(0.5 * (full - full.T), k=1).tocsr()
        upper.eliminate_zeros()
        uppers.append(upper)

    boundary: list[BoundaryFace] = []
    for face in sorted(mesh.boundary_faces, key=lambda f: f.id):
        owner = face.cells[0]
        op = cell_ops.get(owner)
        if op is None:
            raise AssemblyError(f"Boundary face {face.id} is missing its cell operator")
        rule = op.face_rules[face.id]
        if len(rule) == 0:
            continue
        boundary.append(
            BoundaryFace(
                face.id,
                face.kind,
                op.node_ids,
                op.face_interp[face.id],
                rule.points,
                rule.weights,
                rule.normals,
            )
        )
    _LOGGER.debug(
        "Assembled %s nodes, nnz(Sx)=%s, nnz(Sy)=%s, %s boundary faces",
        n_nodes,
        uppers[0].nnz,
        uppers[1].nnz,
        len(boundary),
    )
    return GlobalOperators(m, (uppers[0], uppers[1]), boundary, p)


def apply_E(ops: GlobalOperators, u: np.ndarray, axis: int) -> np.ndarray:
    """Apply E along axis from the boundary faces."""
    out = np.zeros(ops.n)
    for bf in ops.boundary_faces:
        scaled = bf.weights * bf.normals[:, axis]
        np.add.at(out, bf.node_ids, bf.interp.T @ (scaled * bf.apply(u)))
    return out


def materialize_E(ops: GlobalOperators, axis: int) -> sparse.csr_matrix:
    """Sparse symmetric E along axis."""
    rows, cols, vals = [np.zeros(0, int)], [np.zeros(0, int)], [np.zeros(0)]
    for bf in ops.boundary_faces:
        scaled = bf.weights * bf.normals[:, axis]
        block = bf.interp.T @ (scaled[:, None] * bf.interp)
        r, c, v = _scatter(bf.node_ids, bf.node_ids, block)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    e = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ops.n, ops.n),
    ).tocsr()
    return (0.5 * (e + e.T)).tocsr()


def domain_vandermonde(
    geometry: LevelSetGeometry, points: np.ndarray, p: int
) -> Vandermonde:
    """Basis on a map fixed by the domain box, shared by nodes and rule points."""
    amap = AffineMap.from_points(geometry.bounds.T)
    return vandermonde(points, p, amap)


def accuracy_sums(
    mesh: BackgroundMesh,
    cell_ops: dict[int, CellOperator],
    ops: GlobalOperators,
    coords: np.ndarray,
    axis: int,
) -> dict[str, np.ndarray]:
    """Cell boundary, interface and boundary-face sums that cancel for exact operators."""
    geometry = mesh.geometry

    def basis_at(points: np.ndarray) -> np.ndarray:
        return domain_vandermonde(geometry, points, ops.p).values

    v_nodes = basis_at(coords)
    shape = v_nodes.shape
    cells = np.zeros(shape)
    neg = np.zeros(shape)
    pos = np.zeros(shape)
    bnd = np.zeros(shape)
    for cid in sorted(cell_ops):
        op = cell_ops[cid]
        np.add.at(cells, op.node_ids, -0.5 * op.e[axis] @ v_nodes[op.node_ids])
    for face in mesh.faces:
        if face.kind != FACE_INTERFACE:
            continue
        op_neg = cell_ops[face.side_neg]
        op_pos = cell_ops[face.side_pos]
        rule = op_neg.face_rules[face.id]
        if len(rule) == 0:
            continue
        weighted = (rule.weights * rule.normals[:, axis])[:, None] * basis_at(rule.points)
        np.add.at(neg, op_neg.node_ids, 0.5 * op_neg.face_interp[face.id].T @ weighted)
        np.add.at(pos, op_pos.node_ids, -0.5 * op_pos.face_interp[face.id].T @ weighted)
    for bf in ops.boundary_faces:
        weighted = (bf.weights * bf.normals[:, axis])[:, None] * basis_at(bf.points)
        np.add.at(bnd, bf.node_ids, 0.5 * bf.interp.T @ weighted)
    total = cells + neg + pos + bnd
    return {"cells": cells, "minus": neg, "plus": pos, "boundary": bnd, "total": total}


def boundary_moments(
    mesh: BackgroundMesh, p: int, degree: int, axis: int
) -> np.ndarray:
    """Oracle moments of V_i V_j n along axis from rules of a raised degree."""
    geometry = mesh.geometry
    size = domain_vandermonde(geometry, np.zeros((1, 2)), p).values.shape[1]
    moments = np.zeros((size, size))
    for face in mesh.boundary_faces:
        if face.kind == FACE_LEVELSET_BOUNDARY:
            rule = levelset_boundary_rule(mesh.cells[face.side_neg], geometry, degree)
        else:
            rule = face_rule(face, geometry, degree)
        if len(rule) == 0:
            continue
        v = domain_vandermonde(geometry, rule.points, p).values
        moments += v.T @ ((rule.weights * rule.normals[:, axis])[:, None] * v)
    return moments


def sbp_residuals(
    mesh: BackgroundMesh, ops: GlobalOperators, coords: np.ndarray
) -> dict[str, float]:
    """Relative accuracy, skew and boundary-moment residuals per axis."""
    geometry = mesh.geometry
    van = domain_vandermonde(geometry, coords, ops.p)
    v = van.values
    out: dict[str, float] = {}
    for axis, name in ((0, "x"), (1, "y")):
        s = ops.skew(axis)
        e = materialize_E(ops, axis)
        target = ops.m[:, None] * van.derivative(axis)
        q_v = s @ v + 0.5 * (e @ v)
        scale = max(float(np.linalg.norm(target)), 1.0)
        out[f"accuracy_{name}"] = float(np.linalg.norm(q_v - target)) / scale
        out[f"skew_{name}"] = float(abs(s + s.T).max()) if s.nnz else 0.0
        oracle = boundary_moments(mesh, ops.p, 4 * ops.p, axis)
        moments = v.T @ (e @ v)
        ref = max(float(np.linalg.norm(oracle)), 1.0)
        out[f"boundary_{name}"] = float(np.linalg.norm(moments - oracle)) / ref
    return out
