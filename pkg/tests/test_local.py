import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abeigen.errors import AccuracyError, FitError
from abeigen.gauge import k_real_project, rotate
from abeigen.geometry import polar_angle
from abeigen.local import (SIGN_TOL, NodalData, angle_difference, canonical_sign, extract_nodal_coeffs,
                           polar_form, sin_half_difference, theorem_precondition_i_ii)
from abeigen.operator import field
from abeigen.perturbation import nodal_data_for, transversality_det

A = np.array([0.1, -0.2])
RADII = (0.01, 0.02, 0.04)


def synthetic(c, d, h=1, kappa=0.0, c3=0.0, a=A):
    def u(pts):
        d_ = pts - a
        r = np.hypot(d_[:, 0], d_[:, 1])
        t = polar_angle(a, pts)
        g = r ** (h / 2) * (c * np.cos(h * t / 2) + d * np.sin(h * t / 2)) * (1 + kappa * r * r)
        g = g + c3 * r ** 1.5 * np.cos(1.5 * t)
        return np.exp(0.5j * t) * g
    return u


def test_leading_cos():
    n = extract_nodal_coeffs(synthetic(1.0, 0.0), A, RADII)
    assert (n.c, n.d, n.h) == (pytest.approx(1.0, abs=1e-12), pytest.approx(0.0, abs=1e-12), 1)
    assert n.angle == 0.0 or n.angle < 1e-12
    assert n.m == pytest.approx(1.0)


def test_three_half_harmonic():
    n = extract_nodal_coeffs(synthetic(0.0, 1.0, h=3), A, RADII)
    assert n.h == 3 and n.c == 0.0 and n.d == 0.0 and n.m == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5), st.floats(-2, 2))
def test_recovers_coefficients(c, d, kappa, c3):
    if math.hypot(c, d) < 0.3:
        return
    n = extract_nodal_coeffs(synthetic(c, d, kappa=kappa, c3=c3), A, RADII, max_residual=1.0)
    s = canonical_sign(c, d, SIGN_TOL * math.hypot(c, d))
    assert n.c == pytest.approx(s * c, abs=1e-8)
    assert n.d == pytest.approx(s * d, abs=1e-8)
    assert n.c_raw == pytest.approx(c, abs=1e-8)
    assert n.h == 1
    # (c, d) = m (cos, sin)(angle / 2) up to a common sign
    assert abs(n.c * math.cos(n.angle / 2) + n.d * math.sin(n.angle / 2)) == pytest.approx(n.m)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 5), st.floats(0, 2 * math.pi, exclude_max=True))
def test_polar_form_round_trip(m, ang):
    c, d = m * math.cos(ang / 2), m * math.sin(ang / 2)
    mm, aa = polar_form(c, d)
    assert mm == pytest.approx(m)
    assert abs((aa - ang + math.pi) % (2 * math.pi) - math.pi) < 1e-9


def test_canonical_sign():
    assert canonical_sign(-1, 2) == -1
    assert canonical_sign(0, -2) == -1
    assert canonical_sign(0, 0) == 1


def test_errors():
    with pytest.raises(AccuracyError):
        extract_nodal_coeffs(synthetic(1, 0), A, (0.0, 0.01))
    with pytest.raises(AccuracyError):
        extract_nodal_coeffs(synthetic(1, 0), A, (0.2, 0.4), graded_radius=0.05)
    noise = lambda p: np.random.default_rng(0).standard_normal(len(p)) + 0j
    with pytest.raises(FitError):
        extract_nodal_coeffs(noise, A, RADII)


def nd(m, ang, h=1):
    return NodalData(c=m * math.cos(ang / 2), d=m * math.sin(ang / 2), m=m, angle=ang, h=h,
                     fit_residual=0.0)


@pytest.mark.parametrize("n1, n2, ok_i, ok_ii", [
    (nd(1, 0), nd(1, math.pi), True, True),
    (nd(1, 0), nd(0, 0), False, False),
    (nd(1, 0.3), nd(1, 0.3), True, False),
    (nd(1, 0), nd(1, 1.0, h=3), False, False),
])
def test_preconditions(n1, n2, ok_i, ok_ii):
    v = theorem_precondition_i_ii(n1, n2)
    assert (v.condition_i, v.condition_ii) == (ok_i, ok_ii)
    assert v.both == (ok_i and ok_ii)


def test_angle_difference():
    assert angle_difference(nd(1, 0), nd(1, math.pi)) == pytest.approx(math.pi)
    assert abs(angle_difference(nd(1, 0.1), nd(1, 2 * math.pi - 0.1))) == pytest.approx(0.2)
    assert sin_half_difference(nd(1, 0), nd(1, math.pi)) == pytest.approx(-1.0)


class TestDiscrete:
    def test_disk_pair_opposite(self, disk_half):
        p, b = disk_half
        kb = k_real_project(p, b.vectors[:, b.clusters[0]])
        n1, n2 = nodal_data_for(p, kb.vectors)
        assert n1.h == 1 and n2.h == 1
        assert n1.m > 0 and n2.m > 0
        assert abs(abs(angle_difference(n1, n2)) - math.pi) < math.radians(5)

    def test_rotation_covariance(self, square_half):
        p, b = square_half
        kb = k_real_project(p, b.vectors[:, b.clusters[0]])
        base = nodal_data_for(p, kb.vectors)
        V = np.array([[n.c_raw, n.d_raw] for n in base])
        det0 = transversality_det(*base)
        for t in np.random.default_rng(4).uniform(0, 2 * math.pi, 3):
            R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
            rot = nodal_data_for(p, rotate(kb, R).vectors)
            Vr = np.array([[n.c_raw, n.d_raw] for n in rot])
            np.testing.assert_allclose(Vr, R.T @ V, atol=1e-6 * np.abs(V).max())
            assert abs(abs(transversality_det(*rot)) - abs(det0)) < 1e-5 * abs(det0)

    def test_radius_halving_consistency(self, off_half):
        p, b = off_half
        kb = k_real_project(p, b.vectors[:, [0]])
        hp = p.mesh.h_pole
        n1 = nodal_data_for(p, kb.vectors, radii=(8 * hp, 16 * hp))[0]
        n2 = nodal_data_for(p, kb.vectors, radii=(4 * hp, 8 * hp))[0]
        assert abs(n1.m - n2.m) < 2 * max(n1.fit_residual, n2.fit_residual) * n1.m + 1e-3 * n1.m
        assert abs(angle_difference(n1, n2)) < 1e-2

    def test_nodal_line_direction(self, off_half):
        p, b = off_half
        kb = k_real_project(p, b.vectors[:, [0]])
        n = nodal_data_for(p, kb.vectors)[0]
        u = field(p, kb.vectors[:, 0])
        a = p.mesh.pole
        t = 2 * math.pi * (np.arange(720) + 0.5) / 720
        rr = 0.03
        g = np.real(np.exp(-0.5j * t) * u(a + rr * np.stack([np.cos(t), np.sin(t)], axis=1)))
        i = np.argmin(np.abs(g))
        diff = (t[i] - n.nodal_direction + math.pi) % (2 * math.pi) - math.pi
        assert abs(math.degrees(diff)) < 10
