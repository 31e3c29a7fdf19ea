"""Quadrature, basis, element map, and L2 projection tests."""

import numpy as np
import pytest

from dpglab.spaces import (EdgeBasis, ElementMap, edge_bubbles,
                           edge_quadrature, monomial_exponents,
                           monomial_integral, project_l2, scalar_basis,
                           triangle_quadrature)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 5, 8, 12, 20])
def test_triangle_quadrature_exactness(degree):
    rule = triangle_quadrature(degree)
    x, y = rule.points[:, 0], rule.points[:, 1]
    for a, b in monomial_exponents(degree):
        approx = np.sum(rule.weights * x ** a * y ** b)
        exact = monomial_integral(a, b)
        assert approx == pytest.approx(exact, rel=1e-13, abs=1e-15)


def test_triangle_quadrature_weights_sum_to_area():
    for degree in range(0, 21, 4):
        assert triangle_quadrature(degree).weights.sum() == pytest.approx(0.5)


def test_triangle_quadrature_specific_values():
    r = triangle_quadrature(2)
    assert np.sum(r.weights * r.points[:, 0] ** 2) == pytest.approx(1 / 12)
    r = triangle_quadrature(5)
    val = np.sum(r.weights * r.points[:, 0] ** 2 * r.points[:, 1] ** 3)
    assert val == pytest.approx(1 / 420)   # 2! 3! / 7!


def test_triangle_quadrature_rejects_bad_degree():
    with pytest.raises(ValueError):
        triangle_quadrature(-1)
    with pytest.raises(ValueError):
        triangle_quadrature(21)


def test_edge_quadrature_exactness():
    for degree in range(0, 12):
        rule = edge_quadrature(degree)
        for k in range(degree + 1):
            assert np.sum(rule.weights * rule.points ** k) == \
                pytest.approx(1 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5, 6])
def test_scalar_basis_dimension_and_orthonormality(degree):
    basis = scalar_basis(degree)
    assert basis.dim == (degree + 1) * (degree + 2) // 2
    rule = triangle_quadrature(2 * degree)
    phi = basis.values(rule.points)
    gram = (phi * rule.weights) @ phi.T
    assert np.abs(gram - np.eye(basis.dim)).max() < 1e-8


def test_scalar_basis_conditioning():
    # reference mass matrix condition stays far below 1e8 up to degree 6
    for degree in range(7):
        basis = scalar_basis(degree)
        rule = triangle_quadrature(2 * degree + 2)
        phi = basis.values(rule.points)
        gram = (phi * rule.weights) @ phi.T
        assert np.linalg.cond(gram) < 1e8


def test_scalar_basis_degree_zero():
    basis = scalar_basis(0)
    pts = np.array([[0.1, 0.2], [0.3, 0.3], [0.6, 0.2]])
    vals = basis.values(pts)
    assert vals.shape == (1, 3)
    # normalized constant: value^2 * |T_ref| = 1
    assert np.allclose(vals, np.sqrt(2.0))
    assert np.allclose(basis.gradients(pts), 0.0)
    assert scalar_basis(1).dim == 3


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
def test_scalar_basis_gradients_match_finite_differences(degree):
    basis = scalar_basis(degree)
    rng = np.random.default_rng(42)
    pts = rng.uniform(0.05, 0.4, size=(20, 2))
    grad = basis.gradients(pts)
    h = 1e-6
    for d, off in enumerate(np.eye(2)):
        fd = (basis.values(pts + h * off) - basis.values(pts - h * off)) / (2 * h)
        assert np.abs(fd - grad[:, :, d]).max() < 1e-6


def test_element_map_area_and_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = rng.uniform(-2, 2, size=(3, 2))
        d1, d2 = v[1] - v[0], v[2] - v[0]
        area2 = d1[0] * d2[1] - d1[1] * d2[0]
        if area2 < 0:
            v[[1, 2]] = v[[2, 1]]
            area2 = -area2
        emap = ElementMap(*v)
        assert emap.area == pytest.approx(0.5 * area2, rel=1e-12)
        # integral of 1 through the map equals the area
        rule = triangle_quadrature(2)
        assert np.sum(rule.weights) * emap.det == pytest.approx(
            0.5 * area2, rel=1e-12)
        pts = rng.uniform(0, 0.5, size=(7, 2))
        back = emap.to_reference(emap.to_physical(pts))
        assert np.abs(back - pts).max() < 1e-12


def test_element_map_rejects_misoriented_triangle():
    with pytest.raises(ValueError):
        ElementMap([0, 0], [0, 1], [1, 0])
    with pytest.raises(ValueError):
        ElementMap([0, 0], [1, 1], [2, 2])


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_projection_reproduces_polynomials(degree):
    emap = ElementMap([0.2, -0.1], [1.1, 0.3], [0.4, 0.9])
    basis = scalar_basis(degree)
    rng = np.random.default_rng(degree)
    coeffs = rng.standard_normal(basis.dim)

    def f(x, y):
        ref = emap.to_reference(np.column_stack([np.ravel(x), np.ravel(y)]))
        return (coeffs @ basis.values(ref)).reshape(np.shape(x))

    out = project_l2(degree, f, emap)
    assert np.abs(out - coeffs).max() < 1e-12


def test_projection_mean_of_x():
    emap = ElementMap([0, 0], [1, 0], [0, 1])
    c = project_l2(0, lambda x, y: x, emap)
    val = c @ scalar_basis(0).values([[0.25, 0.25]])
    assert val[0] == pytest.approx(1 / 3, rel=1e-13)   # (1/6) / (1/2)


def test_projection_orthogonality_and_idempotence():
    emap = ElementMap([0, 0], [1, 0], [0, 1])
    c = project_l2(1, lambda x, y: x ** 2, emap, exactness=8)
    rule = triangle_quadrature(8)
    x, y = rule.points[:, 0], rule.points[:, 1]
    proj = c @ scalar_basis(1).values(rule.points)
    resid = x ** 2 - proj
    for ell in (np.ones_like(x), x, y):
        assert abs(np.sum(rule.weights * resid * ell)) < 1e-12

    def f_proj(px, py):
        ref = emap.to_reference(np.column_stack([np.ravel(px), np.ravel(py)]))
        return (c @ scalar_basis(1).values(ref)).reshape(np.shape(px))

    twice = project_l2(1, f_proj, emap, exactness=8)
    assert np.abs(twice - c).max() < 1e-12


def test_edge_basis_orthonormal_first_constant():
    basis = EdgeBasis(4)
    rule = edge_quadrature(10)
    vals = basis.values(rule.points)
    assert np.allclose(vals[0], 1.0)
    gram = (vals * rule.weights) @ vals.T
    assert np.abs(gram - np.eye(5)).max() < 1e-13


def test_edge_bubbles_vanish_at_endpoints():
    t = np.array([0.0, 0.3, 1.0])
    bub = edge_bubbles(3, t)
    assert bub.shape == (3, 3)
    assert np.allclose(bub[:, 0], 0.0)
    assert np.allclose(bub[:, -1], 0.0)
    assert np.all(np.abs(bub[:, 1]) > 0)
