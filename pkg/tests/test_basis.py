"""Tests for the polynomial basis."""
import math

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from pointsbp.basis import AffineMap, basis_dim, cond_estimate, proriol, vandermonde


@pytest.mark.parametrize("p, expected", [(0, 1), (1, 3), (2, 6), (3, 10), (7, 36)])
def test_basis_dim(p, expected):
    assert basis_dim(p, 2) == expected


def test_basis_dim_three_dimensions():
    assert basis_dim(2, 3) == 10


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_orthonormal_on_reference_triangle(p):
    t, w = leggauss(12)
    a, b = np.meshgrid(t, t, indexing="ij")
    weights = np.outer(w, w) * 0.5 * (1.0 - b)
    r = 0.5 * (1.0 + a) * (1.0 - b) - 1.0
    ref = np.stack([r.ravel(), b.ravel()], axis=-1)
    values, _, _ = proriol(ref, p)
    gram = values.T @ (weights.ravel()[:, None] * values)
    np.testing.assert_allclose(gram, np.eye(basis_dim(p, 2)), atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 4])
def test_derivatives_match_finite_differences(p):
    rng = np.random.Generator(np.random.PCG64(2))
    points = rng.uniform(0.2, 0.8, size=(15, 2))
    amap = AffineMap.from_points(np.array([[0.0, 0.0], [1.0, 2.0]]))
    van = vandermonde(points, p, amap)
    step = 1e-6
    for axis in (0, 1):
        shift = np.zeros(2)
        shift[axis] = step
        fd = (
            vandermonde(points + shift, p, amap).values
            - vandermonde(points - shift, p, amap).values
        ) / (2 * step)
        np.testing.assert_allclose(van.derivative(axis), fd, atol=1e-6)


def test_reproduces_polynomials():
    rng = np.random.Generator(np.random.PCG64(4))
    points = 3.0 + rng.uniform(size=(30, 2))
    van = vandermonde(points, 3)
    x, y = points.T
    target = x**2 * y - 3.0 * x + 1.0
    coef, *_ = np.linalg.lstsq(van.values, target, rcond=None)
    np.testing.assert_allclose(van.values @ coef, target, atol=1e-10)
    np.testing.assert_allclose(van.dx @ coef, 2 * x * y - 3.0, atol=1e-8)
    np.testing.assert_allclose(van.dy @ coef, x**2, atol=1e-8)


def test_truncate_is_prefix():
    points = np.array([[0.1, 0.2], [0.3, 0.9], [0.5, 0.5], [0.8, 0.1]])
    high = vandermonde(points, 3)
    low = high.truncate(1)
    assert low.values.shape == (4, 3)
    np.testing.assert_array_equal(low.values, high.values[:, :3])
    np.testing.assert_array_equal(low.dy, high.dy[:, :3])


def test_map_sends_box_to_reference():
    amap = AffineMap.from_points(np.array([[2.0, -1.0], [4.0, 3.0]]))
    np.testing.assert_allclose(amap(np.array([[2.0, -1.0], [4.0, 3.0]])), [[-1, -1], [0, 0]])


def test_map_widens_flat_axis():
    amap = AffineMap.from_points(np.array([[0.0, 1.0], [2.0, 1.0]]), spacing=0.5)
    assert np.all(np.isfinite(amap.scale))


def test_cond_estimate():
    assert cond_estimate(np.eye(4)) == pytest.approx(1.0)
    singular = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    assert cond_estimate(singular) == math.inf
