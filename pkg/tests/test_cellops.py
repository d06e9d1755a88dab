"""Tests for per-cell norm, boundary and skew matrices."""
import numpy as np
import pytest

from pointsbp.cellops import cell_E
from pointsbp.exceptions import CellOperatorError


def _scale(op, axis):
    return max(1.0, float(np.abs(op.m[:, None] * op.basis.low.derivative(axis)).max()))


def test_cell_norm_matches_moments(oracle_build):
    for op in oracle_build.cell_ops.values():
        v2 = op.basis.high.values
        np.testing.assert_allclose(v2.T @ op.norm.m_min, op.norm.b, atol=1e-12)
        np.testing.assert_allclose(v2.T @ op.norm.z, 0.0, atol=1e-12)
        np.testing.assert_allclose(op.norm.z.T @ op.norm.z, np.eye(op.ny), atol=1e-12)
        assert op.ny == op.basis.size - v2.shape[1]


def test_weights_sum_to_cell_area(oracle_build):
    mesh = oracle_build.mesh
    for cid, op in oracle_build.cell_ops.items():
        assert op.m.sum() == pytest.approx(mesh.cells[cid].area, rel=1e-10)


def test_boundary_matrices_symmetric_and_closed(oracle_build):
    for op in oracle_build.cell_ops.values():
        ones = np.ones(op.basis.size)
        for e in op.e:
            np.testing.assert_allclose(e, e.T, atol=1e-15)
            assert ones @ e @ ones == pytest.approx(0.0, abs=1e-13)


@pytest.mark.parametrize("axis", [0, 1])
def test_cell_sbp_accuracy(oracle_build, axis):
    for op in oracle_build.cell_ops.values():
        v = op.basis.low.values
        s, e = op.s[axis], op.e[axis]
        np.testing.assert_allclose(s, -s.T, atol=1e-14)
        target = op.m[:, None] * op.basis.low.derivative(axis)
        np.testing.assert_allclose(
            (s + 0.5 * e) @ v, target, atol=1e-12 * _scale(op, axis)
        )


@pytest.mark.parametrize("axis", [0, 1])
def test_cell_compatibility(oracle_build, axis):
    for op in oracle_build.cell_ops.values():
        v = op.basis.low.values
        vd = op.basis.low.derivative(axis)
        lhs = v.T @ (op.m[:, None] * vd) + vd.T @ (op.m[:, None] * v)
        np.testing.assert_allclose(lhs, v.T @ op.e[axis] @ v, atol=1e-11 * _scale(op, axis))


def test_reweighting_keeps_accuracy(oracle_build):
    rng = np.random.Generator(np.random.PCG64(8))
    for op in oracle_build.cell_ops.values():
        y = 1e-3 * rng.standard_normal(op.ny)
        moved = op.with_weights(op.norm.weights(y))
        v = moved.basis.low.values
        for axis in (0, 1):
            target = moved.m[:, None] * moved.basis.low.derivative(axis)
            np.testing.assert_allclose(
                (moved.s[axis] + 0.5 * moved.e[axis]) @ v,
                target,
                atol=1e-12 * _scale(moved, axis),
            )


def test_skew_part_matches_least_squares(oracle_build):
    # S is the minimum-norm skew solution of S V = G
    op = next(iter(oracle_build.cell_ops.values()))
    v = op.basis.low.values
    n = op.basis.size
    g = op.m[:, None] * op.basis.low.derivative(0) - 0.5 * op.e[0] @ v
    rows, cols = np.triu_indices(n, 1)
    basis = np.zeros((len(rows), n, n))
    basis[np.arange(len(rows)), rows, cols] = 1.0
    basis[np.arange(len(rows)), cols, rows] = -1.0
    design = np.stack([(b @ v).ravel() for b in basis], axis=1)
    coef, *_ = np.linalg.lstsq(design, g.ravel(), rcond=None)
    dense = np.tensordot(coef, basis, axes=(0, 0))
    np.testing.assert_allclose(op.s[0] @ v, dense @ v, atol=1e-12 * _scale(op, 0))
    assert np.linalg.norm(op.s[0]) == pytest.approx(np.linalg.norm(dense), rel=1e-8)


def test_cell_without_faces_rejected():
    with pytest.raises(CellOperatorError):
        cell_E([], [])
