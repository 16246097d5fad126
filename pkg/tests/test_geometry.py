import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abeigen.errors import GeometryError, OutOfRangeError, SingularPointError
from abeigen.geometry import (CutoffSpec, DomainSpec, PoleFluxParams, ab_potential,
                              ab_potential_jacobian, cutoff_grad, cutoff_hessian, cutoff_xi,
                              jacobian_det, phi_a, polar_angle)

coord = st.floats(-2.0, 2.0, allow_nan=False)
angle = st.floats(0.0, 2 * math.pi, exclude_max=True)
radius = st.floats(1e-3, 3.0)


@pytest.mark.parametrize("a, alpha, x, expected", [
    ((0, 0), 0.5, (1, 0), (0, 0.5)),
    ((0, 0), 1.0, (0, 2), (-0.5, 0)),
    ((0.1, 0), 0.5, (0.1, 1), (-0.5, 0)),
])
def test_ab_potential_examples(a, alpha, x, expected):
    np.testing.assert_allclose(ab_potential(PoleFluxParams(a, alpha), x), expected, atol=1e-15)


def test_ab_potential_vectorized_and_singular():
    p = PoleFluxParams((0.0, 0.0), 0.5)
    out = ab_potential(p, [[1, 0], [0, 1]])
    assert out.shape == (2, 2)
    with pytest.raises(SingularPointError):
        ab_potential(p, (0.0, 0.0))
    with pytest.raises(SingularPointError):
        polar_angle((0.3, 0.1), (0.3, 0.1))


@settings(max_examples=60, deadline=None)
@given(coord, coord, radius, angle, st.floats(0.05, 2.0))
def test_potential_is_curl_and_divergence_free(a1, a2, r, t, alpha):
    p = PoleFluxParams((a1, a2), alpha)
    x = np.array([a1 + r * math.cos(t), a2 + r * math.sin(t)])
    h = 1e-5 * r
    J = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        J[:, j] = (ab_potential(p, x + e) - ab_potential(p, x - e)) / (2 * h)
    scale = np.linalg.norm(ab_potential(p, x)) / r + 1e-300
    assert abs(J[0, 0] + J[1, 1]) < 1e-6 * scale
    assert abs(J[1, 0] - J[0, 1]) < 1e-6 * scale
    np.testing.assert_allclose(ab_potential_jacobian(p, x), J, atol=1e-6 * scale)


def test_potential_circulation():
    p = PoleFluxParams((0.2, -0.1), 0.3)
    t = 2 * math.pi * (np.arange(400) + 0.5) / 400
    pts = np.array(p.a) + 0.7 * np.stack([np.cos(t), np.sin(t)], axis=1)
    tang = 0.7 * np.stack([-np.sin(t), np.cos(t)], axis=1)
    circ = np.sum(np.einsum("ij,ij->i", ab_potential(p, pts), tang)) * 2 * math.pi / 400
    assert circ == pytest.approx(2 * math.pi * 0.3, rel=1e-12)


def test_polar_angle_examples():
    assert polar_angle((0, 0), (1, 0)) == 0.0
    assert polar_angle((0, 0), (0, 1)) == pytest.approx(math.pi / 2, abs=1e-15)
    for eps in (1e-3, 1e-8, 1e-12):
        t = polar_angle((0, 0), (1, -eps))
        assert 2 * math.pi - t == pytest.approx(eps, rel=1e-6)
        assert t < 2 * math.pi


@settings(max_examples=200, deadline=None)
@given(coord, coord, st.floats(1e-3, 10.0), angle)
def test_polar_angle_round_trip(a1, a2, r, t):
    x = (a1 + r * math.cos(t), a2 + r * math.sin(t))
    got = polar_angle((a1, a2), x)
    assert 0.0 <= got < 2 * math.pi
    diff = (got - t + math.pi) % (2 * math.pi) - math.pi
    assert abs(diff) < 1e-12 * max(1.0, (abs(a1) + abs(a2)) / r)


def test_cutoff_examples():
    c = CutoffSpec(0.2)
    assert cutoff_xi(c, (0.1, 0.0)) == 1.0
    np.testing.assert_array_equal(cutoff_grad(c, (0.1, 0.0)), 0.0)
    assert cutoff_xi(c, (0.0, 0.6)) == 0.0
    np.testing.assert_array_equal(cutoff_grad(c, (0.0, 0.6)), 0.0)
    assert cutoff_xi(c, (0.3, 0.0)) == pytest.approx(0.5, abs=1e-15)
    assert np.linalg.norm(cutoff_grad(c, (0.3, 0.0))) == pytest.approx(15 / (8 * 0.2), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.7), angle)
def test_cutoff_bounds(r, t):
    c = CutoffSpec(0.2)
    x = (r * math.cos(t), r * math.sin(t))
    xi = cutoff_xi(c, x)
    assert 0.0 <= xi <= 1.0
    assert np.linalg.norm(cutoff_grad(c, x)) <= 4 / c.rbar
    assert np.linalg.norm(cutoff_grad(c, x)) <= 15 / (8 * c.rbar) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.5), angle)
def test_cutoff_derivatives_match_finite_differences(r, t):
    c = CutoffSpec(0.2)
    x = np.array([r * math.cos(t), r * math.sin(t)])
    h = 1e-6
    E = np.eye(2) * h
    g = np.array([(cutoff_xi(c, x + e) - cutoff_xi(c, x - e)) / (2 * h) for e in E])
    H = np.array([(cutoff_grad(c, x + e) - cutoff_grad(c, x - e)) / (2 * h) for e in E])
    np.testing.assert_allclose(cutoff_grad(c, x), g, atol=1e-6)
    np.testing.assert_allclose(cutoff_hessian(c, x), H, atol=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.6), angle, st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
def test_cutoff_transport_identity(r, t, b1, b2):
    """A . grad(a . grad xi) - a . grad(A . grad xi) + grad xi . grad(a . A) = 0."""
    c = CutoffSpec(0.2)
    p = PoleFluxParams((0.0, 0.0), 0.5)
    a = np.array([b1, b2])
    x = np.array([r * math.cos(t), r * math.sin(t)])
    A = ab_potential(p, x)
    JA = ab_potential_jacobian(p, x)
    g = cutoff_grad(c, x)
    H = cutoff_hessian(c, x)
    term1 = A @ (H @ a)
    term2 = a @ (JA.T @ g + H @ A)
    term3 = g @ (JA.T @ a)
    assert abs(term1 - term2 + term3) < 1e-8


def test_phi_examples():
    c = CutoffSpec(0.2)
    a = np.array([0.004, -0.002])
    np.testing.assert_allclose(phi_a(a, c, (0.0, 0.0)), a)
    assert jacobian_det(a, c, (0.0, 0.0)) == 1.0
    x = np.array([[0.3, 0.1], [-0.05, 0.25]])
    np.testing.assert_array_equal(phi_a((0.0, 0.0), c, x), x)
    np.testing.assert_array_equal(jacobian_det((0.0, 0.0), c, x), 1.0)
    far = np.array([[0.4, 0.0], [0.5, -0.6]])
    np.testing.assert_array_equal(phi_a(a, c, far), far)
    np.testing.assert_array_equal(jacobian_det(a, c, far), 1.0)
    with pytest.raises(OutOfRangeError):
        phi_a((0.2 / 32, 0.0), c, (0.0, 0.0))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.999), angle, st.floats(0.0, 0.7), angle)
def test_jacobian_lower_bound(s, ta, r, t):
    c = CutoffSpec(0.2)
    a = s * c.invertibility_radius * np.array([math.cos(ta), math.sin(ta)])
    J = jacobian_det(a, c, (r * math.cos(t), r * math.sin(t)))
    assert J >= 1 - np.linalg.norm(a) * 4 / c.rbar
    assert J > 0


def test_cutoff_for_domain():
    c = CutoffSpec.for_domain(DomainSpec.square())
    assert c.rbar == pytest.approx(0.125)
    assert CutoffSpec.for_domain(DomainSpec.disk(), (0.2, 0.0)).rbar == pytest.approx(0.2)
    with pytest.raises(GeometryError):
        CutoffSpec.for_domain(DomainSpec.disk(), (2.0, 0.0))
    with pytest.raises(OutOfRangeError):
        CutoffSpec(0.0)


@pytest.mark.parametrize("dom, area", [
    (DomainSpec.disk(), math.pi),
    (DomainSpec.square(), 1.0),
    (DomainSpec.sector(), math.pi / 8),
    (DomainSpec.polygon([(0, 0), (2, 0), (2, 1), (0, 1)]), 2.0),
])
def test_domain_area_and_roundtrip(dom, area):
    assert dom.area == pytest.approx(area, rel=1e-12)
    assert DomainSpec.from_dict(dom.to_dict()) == dom
    total = sum(p.length for p in dom.pieces())
    assert total > 0


def test_domain_queries():
    sq = DomainSpec.square()
    assert sq.contains((0.0, 0.0)) and not sq.contains((0.5, 0.0))
    assert sq.distance_to_boundary((0.1, 0.05)) == pytest.approx(0.4)
    np.testing.assert_allclose(sq.outward_normal((0.5, 0.1)), (1, 0), atol=1e-12)
    np.testing.assert_allclose(sq.ray_exit((0.1, 0.2)), (0.5, 0.2))
    d = DomainSpec.disk(2.0)
    np.testing.assert_allclose(d.outward_normal((0.0, 2.0)), (0, 1), atol=1e-12)
    np.testing.assert_allclose(d.project_to_boundary((1.999, 0.0)), (2.0, 0.0))
    sec = DomainSpec.sector()
    assert sec.contains((0.5, 0.0)) and not sec.contains((0.5, 0.3))


def test_polygon_validation():
    cw = DomainSpec.polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert cw.area == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        DomainSpec.polygon([(0, 0), (1, 1), (1, 0), (0, 1)])
    with pytest.raises(GeometryError):
        DomainSpec.disk(-1.0)
