"""K_a-reality at half flux.

With ``u = exp(i theta / 2) w`` the antilinear map ``K_a u = exp(i theta) conj(u)``
acts on the gauge field as plain complex conjugation, so K-real
eigenfunctions are exactly those with a real gauge field ``w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import KRealityError, UnsupportedError


def apply_K(a, u, theta):
    """Nodal ``exp(i theta) conj(u)``; ``theta`` is the polar angle of the nodes about ``a``."""
    del a  # the angle already encodes the pole
    return np.exp(1j * np.asarray(theta)) * np.conj(u)


@dataclass(eq=False)
class KRealBasis:
    """K-real M-orthonormal basis of one eigenspace (reduced unknowns)."""

    vectors: np.ndarray
    kreal_residuals: np.ndarray
    gram: np.ndarray
    span_defect: float


def _mnorm(M, x):
    return np.sqrt(np.real(np.einsum("ij,ij->j", x.conj(), M @ x)))


def kreal_residual(pencil, x):
    """L2 norm of ``K_a u - u`` for each column of ``x``; equals 2 ||Im w||."""
    x = x.reshape(len(x), -1)
    return 2.0 * _mnorm(pencil.M, np.imag(x).astype(float) + 0j)


def k_real_project(pencil, vectors, tol_kreal=1e-5):
    """Rotate an eigenspace basis into K-real form.

    The real and imaginary parts of the input vectors span (up to
    discretization error) the same real space as a K-real basis; the dominant
    ``p`` directions of their real Gram matrix give it. For ``p = 1`` this is
    the optimal global phase.
    """
    if float(pencil.alpha) % 1.0 != 0.5:
        raise UnsupportedError("K-reality requires half-integer flux")
    M = pencil.M
    W = np.asarray(vectors).reshape(len(vectors), -1)
    p = W.shape[1]
    X = np.hstack([W.real, W.imag])
    G = np.real(X.T @ (M @ X))
    G = 0.5 * (G + G.T)
    ev, Q = np.linalg.eigh(G)
    top = Q[:, ::-1][:, :p] / np.sqrt(np.maximum(ev[::-1][:p], 1e-300))
    Y = X @ top
    # project onto span(W) and re-orthonormalize
    C = W.conj().T @ (M @ Y)
    U = W @ C
    S = U.conj().T @ (M @ U)
    S = 0.5 * (S + S.conj().T)
    U = U @ sla.inv(sla.sqrtm(S))
    # remove residual global phases so each vector is as real as possible
    for j in range(p):
        x = U[:, j]
        g = np.array([[np.real(x.real @ (M @ x.real)), np.real(x.real @ (M @ x.imag))],
                      [np.real(x.imag @ (M @ x.real)), np.real(x.imag @ (M @ x.imag))]])
        g = 0.5 * (g + g.T)
        _, q = np.linalg.eigh(g)
        c = q[:, -1]
        U[:, j] = x * np.exp(-1j * np.arctan2(c[1], c[0]))
    res = kreal_residual(pencil, U)
    gram = np.real(U.conj().T @ (M @ U))
    span_defect = float(np.max(_mnorm(M, U - W @ (W.conj().T @ (M @ U))))) if p else 0.0
    if np.any(res > tol_kreal):
        raise KRealityError(
            f"K-real residual {res.max():.2e} exceeds {tol_kreal:.0e}; "
            "the cluster is not resolved as an exact eigenspace")
    return KRealBasis(vectors=U, kreal_residuals=res, gram=gram, span_defect=span_defect)


def real_basis(kb: KRealBasis):
    """Real parts of a K-real basis, rescaled to unit norm (drop the tiny imaginary part)."""
    return np.real(kb.vectors)


def rotate(kb: KRealBasis, R):
    """Apply a real 2x2 (or p x p) rotation to the basis."""
    R = np.asarray(R, dtype=float)
    return KRealBasis(vectors=kb.vectors @ R, kreal_residuals=kb.kreal_residuals,
                      gram=R.T @ kb.gram @ R, span_defect=kb.span_defect)
