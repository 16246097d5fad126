"""Smallest eigenpairs of a Hermitian pencil and multiplicity clustering."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import ContractError, NonConvergenceError

DEFAULT_RTOL_CLUSTER = 1e-3


@dataclass(eq=False)
class EigenBundle:
    """Eigenvalues in ascending order with M-orthonormal eigenvectors.

    ``vectors`` has one column per eigenvalue in the reduced unknowns of
    ``pencil``.
    """

    lambdas: np.ndarray
    vectors: np.ndarray
    clusters: list
    residuals: np.ndarray
    params: dict
    pencil: object = field(default=None, repr=False)

    @property
    def k(self):
        return len(self.lambdas)

    def cluster_of(self, index):
        for c in self.clusters:
            if index in c:
                return c
        raise IndexError(index)

    def cluster_sizes(self):
        return [len(c) for c in self.clusters]

    def to_dict(self):
        return {
            "lambdas": [float(x) for x in self.lambdas],
            "clusters": [list(map(int, c)) for c in self.clusters],
            "residuals": [float(r) for r in self.residuals],
            "params": self.params,
        }


def detect_multiplicity(lambdas, rtol_cluster=DEFAULT_RTOL_CLUSTER):
    """Greedy grouping of consecutive eigenvalues with relative gap below ``rtol_cluster``.

    Examples
    --------
    >>> detect_multiplicity([9.869, 9.871, 20.19], 1e-2)
    [[0, 1], [2]]
    """
    lam = np.asarray(getattr(lambdas, "lambdas", lambdas), dtype=float)
    if len(lam) == 0:
        return []
    clusters = [[0]]
    for j in range(len(lam) - 1):
        if (lam[j + 1] - lam[j]) / abs(lam[j]) < rtol_cluster:
            clusters[-1].append(j + 1)
        else:
            clusters.append([j + 1])
    return clusters


def residual_norms(K, M, X, lam):
    R = K @ X - (M @ X) * lam
    den = np.linalg.norm((M @ X) * lam, axis=0)
    return np.linalg.norm(R, axis=0) / np.where(den > 0, den, 1.0)


def solve_eigs(pencil, k=6, tol=1e-8, rtol_cluster=DEFAULT_RTOL_CLUSTER, seed=0,
               pad=4, maxiter=None):
    """k smallest eigenpairs by shift-invert Lanczos at shift 0.

    The Lanczos subspace is asked for ``k + pad`` vectors so that both members
    of a degenerate pair are captured; a Rayleigh-Ritz step on the returned
    subspace then makes the vectors exactly M-orthonormal.
    """
    K, M = pencil.K, pencil.M
    n = K.shape[0]
    if k < 1:
        raise ContractError("k must be at least 1")
    if k + 5 > n:
        raise ContractError(f"k + 5 = {k + 5} exceeds the number of unknowns {n}")
    t0 = time.perf_counter()
    complex_ = np.iscomplexobj(K.data) or np.iscomplexobj(M.data)
    dtype = complex if complex_ else float
    Kc = K.astype(dtype).tocsc()
    try:
        lu = spla.splu(Kc)
    except RuntimeError as exc:
        raise NonConvergenceError(f"factorization of K failed: {exc}") from exc
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=dtype)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    if complex_:
        v0 = v0 + 1j * rng.standard_normal(n)
    nev = min(k + pad, n - 2)
    try:
        vals, vecs = spla.eigsh(Kc, k=nev, M=M.astype(dtype).tocsc(), sigma=0.0, OPinv=op,
                                which="LM", v0=v0, tol=0.0,
                                maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        res = residual_norms(K, M, exc.eigenvectors, exc.eigenvalues) if len(exc.eigenvalues) else None
        raise NonConvergenceError("Lanczos iteration did not converge", res) from exc
    # Rayleigh-Ritz polish
    KX = K @ vecs
    MX = M @ vecs
    Kr = vecs.conj().T @ KX
    Mr = vecs.conj().T @ MX
    Kr = 0.5 * (Kr + Kr.conj().T)
    Mr = 0.5 * (Mr + Mr.conj().T)
    lam, Q = sla.eigh(Kr, Mr)
    X = vecs @ Q
    lam, X = lam[:k], X[:, :k]
    res = residual_norms(K, M, X, lam)
    if np.any(res > tol) or np.any(lam <= 0):
        raise NonConvergenceError("eigenpairs failed the residual check", res)
    params = {
        "a": [float(v) for v in np.asarray(pencil.a)],
        "alpha": float(pencil.alpha),
        "mesh": getattr(pencil.mesh, "fingerprint", None) if hasattr(pencil, "mesh") else None,
        "n_unknowns": int(n),
        "kind": getattr(pencil, "kind", "branch_cut"),
        "seconds": time.perf_counter() - t0,
    }
    return EigenBundle(lambdas=lam, vectors=X, clusters=detect_multiplicity(lam, rtol_cluster),
                       residuals=res, params=params, pencil=pencil)
