import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from abeigen.errors import KRealityError, UnsupportedError
from abeigen.gauge import apply_K, k_real_project, kreal_residual, real_basis, rotate
from abeigen.geometry import PoleFluxParams
from abeigen.operator import assemble_branch_cut, reconstruct_u

finite = st.floats(-10, 10, allow_nan=False)
vec = arrays(np.float64, 16, elements=finite)


@settings(max_examples=100, deadline=None)
@given(vec, vec, arrays(np.float64, 16, elements=st.floats(0, 2 * math.pi)))
def test_apply_K_algebra(re, im, theta):
    u = re + 1j * im
    KKu = apply_K(None, apply_K(None, u, theta), theta)
    np.testing.assert_allclose(KKu, u, atol=1e-12)
    g = re
    v = np.exp(0.5j * theta) * g
    np.testing.assert_allclose(apply_K(None, v, theta), v, atol=1e-12)
    np.testing.assert_allclose(apply_K(None, 1j * v, theta), -1j * v, atol=1e-12)


def test_eigenfunctions_are_K_real_at_nodes(off_half):
    p, b = off_half
    kb = k_real_project(p, b.vectors[:, [0]])
    u = reconstruct_u(p, kb.vectors[:, 0])
    th = p.space.dof_theta
    assert np.abs(apply_K(p.a, u, th) - u).max() < 1e-10 * np.abs(u).max()


def test_simple_eigenfunction(off_half):
    p, b = off_half
    x = b.vectors[:, [0]] * np.exp(0.7j)
    kb = k_real_project(p, x)
    assert kb.kreal_residuals[0] < 1e-6
    assert kb.span_defect < 1e-8
    np.testing.assert_allclose(kreal_residual(p, kb.vectors), kb.kreal_residuals)


def test_fixed_point(off_half):
    p, b = off_half
    kb = k_real_project(p, b.vectors[:, [0]])
    again = k_real_project(p, kb.vectors)
    s = np.sign(np.real(again.vectors[:, 0] @ kb.vectors[:, 0].conj()))
    np.testing.assert_allclose(s * again.vectors, kb.vectors, atol=1e-10)
    np.testing.assert_allclose(again.kreal_residuals, kb.kreal_residuals, atol=1e-12)


def test_square_cluster(square_half):
    p, b = square_half
    W = b.vectors[:, b.clusters[0]]
    mix = np.array([[1, 1j], [1j, 1]]) / math.sqrt(2)
    kb = k_real_project(p, W @ mix)
    assert kb.vectors.shape[1] == 2
    np.testing.assert_allclose(kb.gram, np.eye(2), atol=1e-10)
    assert np.all(kb.kreal_residuals < 1e-5)
    assert kb.span_defect < 1e-8


def test_eigenspace_closed_under_K(square_half):
    p, b = square_half
    X = b.vectors[:, b.clusters[0]]
    P = lambda z: X @ (X.conj().T @ (p.M @ z))
    z = np.random.default_rng(0).standard_normal((p.n, 2)) * (1 + 0.5j)
    Pz = P(z)
    # K acts on the gauge field as conjugation
    assert np.abs(P(Pz.conj()) - Pz.conj()).max() < 1e-6 * np.abs(Pz).max()


def test_rotation_preserves_gram(square_half):
    p, b = square_half
    kb = k_real_project(p, b.vectors[:, b.clusters[0]])
    t = 0.4
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    kr = rotate(kb, R)
    np.testing.assert_allclose(kr.gram, np.eye(2), atol=1e-10)
    assert np.all(kreal_residual(p, kr.vectors) < 1e-5)
    assert np.isrealobj(real_basis(kr))


def test_not_an_eigenspace(off_half):
    p, b = off_half
    x = np.real(k_real_project(p, b.vectors[:, [0]]).vectors) + 1j * np.real(
        k_real_project(p, b.vectors[:, [1]]).vectors)
    with pytest.raises(KRealityError):
        k_real_project(p, x)


def test_requires_half_flux(off_mesh):
    p = assemble_branch_cut(off_mesh, PoleFluxParams(off_mesh.pole, 0.3))
    with pytest.raises(UnsupportedError):
        k_real_project(p, np.ones((p.n, 1)))
