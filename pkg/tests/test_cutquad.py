"""Tests for cut-cell, face and curve quadrature."""
import math

import numpy as np
import pytest

from pointsbp.const import (
    CELL_CUT,
    CELL_IMMERSED,
    FACE_BOX_BOUNDARY,
    FACE_INTERFACE,
    FACE_LEVELSET_BOUNDARY,
    GEOMETRY_BOX_CIRCLE,
)
from pointsbp.cutquad import (
    QuadRule,
    cell_rules,
    cell_volume_rule,
    cut_cell_rules,
    face_live_segments,
    face_rule,
    gauss_rule_1d,
    levelset_boundary_rule,
    points_per_axis,
    tensor_rule,
)
from pointsbp.exceptions import QuadratureError
from pointsbp.geometry import LevelSetGeometry, SamplerConfig, make_geometry, sample_nodes
from pointsbp.mesh import Cell, Face, build_mesh

HOLE = np.array([0.5, 0.5])


@pytest.fixture(scope="module")
def circle():
    return make_geometry(GEOMETRY_BOX_CIRCLE)


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_gauss_rule_exact_to_degree(n):
    x, w = gauss_rule_1d(n)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert w @ x**k == pytest.approx(exact, abs=1e-13)


def test_gauss_rule_needs_a_point():
    with pytest.raises(QuadratureError):
        gauss_rule_1d(0)


@pytest.mark.parametrize("degree, expected", [(0, 1), (1, 1), (2, 2), (5, 3), (8, 5)])
def test_points_per_axis(degree, expected):
    assert points_per_axis(degree) == expected


def test_tensor_rule():
    rule = tensor_rule(np.array([[0.0, 2.0], [1.0, 3.0]]), 3)
    x, y = rule.points.T
    assert rule.integrate(x**2 * y**3) == pytest.approx(160.0 / 3.0)
    assert rule.total == pytest.approx(4.0)


def test_cut_box_totals(circle):
    volume, curve = cut_cell_rules(np.array([[0.5, 1.0], [0.5, 1.0]]), circle, 16)
    assert volume.total == pytest.approx(0.25 - math.pi / 64.0, rel=1e-10)
    assert curve.total == pytest.approx(math.pi / 8.0, rel=1e-10)
    assert np.all(volume.weights > 0.0)
    assert np.all(circle.levelset(volume.points) >= -1e-12)
    np.testing.assert_allclose(np.linalg.norm(curve.points - HOLE, axis=1), 0.25, atol=1e-12)
    toward_hole = np.einsum("ij,ij->i", curve.normals, HOLE - curve.points)
    assert np.all(toward_hole > 0.0)
    np.testing.assert_allclose(np.linalg.norm(curve.normals, axis=1), 1.0)


def test_cut_box_moments(circle):
    # first moment of the quarter disc removed from [0.5, 1]^2
    volume, _ = cut_cell_rules(np.array([[0.5, 1.0], [0.5, 1.0]]), circle, 16)
    disc = math.pi / 64.0 * 0.5 + (0.25**3) / 3.0
    expected = 0.25 * 0.75 - disc
    assert volume.integrate(volume.points[:, 0]) == pytest.approx(expected, rel=1e-8)


def test_divergence_theorem_on_cut_cell(circle):
    # integral of div(x, 0) over the live part equals the flux of (x, 0)
    bounds = np.array([[0.625, 0.875], [0.375, 0.625]])
    volume, curve = cut_cell_rules(bounds, circle, 16)
    flux = curve.integrate(curve.points[:, 0] * curve.normals[:, 0])
    left, right = bounds[0]
    flux += right * 0.25
    lo_segments = face_live_segments(
        Face(0, FACE_INTERFACE, None, 0, 0, left, (0.375, 0.625), True), circle
    )
    flux -= left * sum(b - a for a, b in lo_segments)
    assert volume.total == pytest.approx(flux, abs=1e-10)


def test_immersed_cell_rejected(circle):
    cell = Cell(0, (3, 4, 4), np.array([[0.45, 0.55], [0.45, 0.55]]), CELL_IMMERSED)
    with pytest.raises(QuadratureError):
        cell_volume_rule(cell, circle, 3)


def test_domain_area(circle):
    nodes = sample_nodes(SamplerConfig(GEOMETRY_BOX_CIRCLE, 10, seed=4), circle)
    mesh = build_mesh(circle, nodes)
    area = sum(cut_cell_rules(cell.bounds, circle, 16)[0].total for cell in mesh.live_cells)
    assert area == pytest.approx(1.0 - math.pi / 16.0, rel=1e-7)


def test_cell_rules_shape(circle):
    nodes = sample_nodes(SamplerConfig(GEOMETRY_BOX_CIRCLE, 10, seed=4), circle)
    mesh = build_mesh(circle, nodes)
    for cell in mesh.live_cells:
        volume, curve = cell_rules(cell, circle, 2)
        assert np.all(volume.weights > 0.0)
        if cell.kind == CELL_CUT:
            assert np.all(curve.weights > 0.0)
            assert curve.normals.shape == (len(curve), 2)
        else:
            assert curve is None
            assert volume.total == pytest.approx(cell.area)


def test_face_rule_skips_hole(circle):
    face = Face(0, FACE_INTERFACE, 0, 1, 0, 0.5, (0.0, 1.0), True)
    segments = np.array(face_live_segments(face, circle))
    np.testing.assert_allclose(segments, [[0.0, 0.25], [0.75, 1.0]], atol=1e-12)
    rule = face_rule(face, circle, 2)
    assert rule.total == pytest.approx(0.5)
    assert rule.integrate(rule.points[:, 1] ** 2) == pytest.approx(0.59375 / 3.0)
    np.testing.assert_array_equal(rule.normals, np.tile([1.0, 0.0], (len(rule), 1)))


def test_box_boundary_face_normal_points_out(circle):
    low = face_rule(Face(0, FACE_BOX_BOUNDARY, None, 3, 1, 0.0, (0.0, 0.5)), circle, 3)
    high = face_rule(Face(1, FACE_BOX_BOUNDARY, 3, None, 0, 1.0, (0.0, 0.5)), circle, 3)
    np.testing.assert_array_equal(low.normals[0], [0.0, -1.0])
    np.testing.assert_array_equal(high.normals[0], [1.0, 0.0])


def test_levelset_face_has_no_axis_rule(circle):
    with pytest.raises(QuadratureError):
        face_rule(Face(0, FACE_LEVELSET_BOUNDARY, 0, None), circle, 2)


def test_concat_keeps_normals():
    empty = QuadRule.concat([], with_normals=True)
    assert len(empty) == 0 and empty.normals.shape == (0, 2)
    one = QuadRule(np.zeros((1, 2)), np.ones(1), np.array([[0.0, 1.0]]))
    both = QuadRule.concat([one, one], with_normals=True)
    assert len(both) == 2 and both.total == 2.0


def test_closed_curve_normals_integrate_to_zero(circle):
    nodes = sample_nodes(SamplerConfig(GEOMETRY_BOX_CIRCLE, 10, seed=4), circle)
    mesh = build_mesh(circle, nodes)
    curve = QuadRule.concat(
        [
            levelset_boundary_rule(cell, circle, 4)
            for cell in mesh.live_cells
            if cell.kind == CELL_CUT
        ],
        with_normals=True,
    )
    assert curve.total == pytest.approx(math.pi / 2.0, rel=1e-7)
    np.testing.assert_allclose(curve.integrate(curve.normals), 0.0, atol=1e-9)


def _horizontal_line(c):
    def phi(x):
        return x[..., 1] - c

    def grad(x):
        return np.stack([np.zeros(x.shape[:-1]), np.ones(x.shape[:-1])], axis=-1)

    return LevelSetGeometry("line", np.array([[0.0, 1.0], [0.0, 1.0]]), phi, grad)


def test_straight_levelset_gives_flat_curve():
    c = 0.3125
    geometry = _horizontal_line(c)
    cell = Cell(0, (2, 1, 1), np.array([[0.2, 0.45], [0.25, 0.5]]), CELL_CUT)
    curve = levelset_boundary_rule(cell, geometry, 3)
    assert curve.total == pytest.approx(0.25, rel=1e-12)
    np.testing.assert_allclose(curve.points[:, 1], c, atol=1e-11)
    np.testing.assert_allclose(curve.normals, np.tile([0.0, -1.0], (len(curve), 1)), atol=1e-14)
    volume = cell_volume_rule(cell, geometry, 3)
    assert volume.total == pytest.approx(0.25 * (0.5 - c), rel=1e-12)
