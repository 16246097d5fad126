"""First-order perturbation data for a double eigenvalue at half flux.

Moving the pole in direction ``b`` perturbs a cluster through the boundary
matrix ``S(b)_jk = int_{dOmega} (b . nu) d_nu phi_j d_nu conj(phi_k)``, whose
closed form in terms of the pole coefficients is
``(pi / 2) [(c_j c_k - d_j d_k) b1 + (c_j d_k + c_k d_j) b2]``.
Changing the flux perturbs it through the antisymmetric matrix
``R_jk = -i 4 int (i grad + A) phi_j . A conj(phi_k)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .eigensolver import solve_eigs
from .errors import ContractError, UnsupportedError
from .fem import collapsed_rule, shape_bary_derivs, shape_values
from .gauge import k_real_project
from .geometry import CutoffSpec, PoleFluxParams, ab_potential
from .local import (NodalData, extract_nodal_coeffs, sin_half_difference,
                    theorem_precondition_i_ii)
from .mesh import build_mesh, morph_mesh
from .operator import assemble_branch_cut, field as fe_field


# ---------------------------------------------------------------------------
# boundary matrix
# ---------------------------------------------------------------------------

def _boundary_cells(space):
    mesh = space.mesh
    key = {}
    for t, tri in enumerate(mesh.triangles):
        for i in range(3):
            key[(int(tri[i]), int(tri[(i + 1) % 3]))] = (t, i)
    out = np.array([key[(int(i), int(j))] for i, j in mesh.boundary_edges])
    return out[:, 0], out[:, 1]


def normal_derivatives(pencil, vectors, n_gauss=3):
    """Normal derivatives of the gauge fields at Gauss points of boundary edges.

    Returns ``(dn, weights, normals)`` with ``dn`` of shape
    ``(n_edges, n_gauss, n_vectors)`` and ``weights`` the physical weights.
    """
    space = pencil.space
    cache = space.mesh._cache
    if "bcells" not in cache:
        cache["bcells"] = _boundary_cells(space)
    cells, local = cache["bcells"]
    s, w = np.polynomial.legendre.leggauss(n_gauss)
    s = 0.5 * (s + 1)
    w = 0.5 * w
    ne = len(cells)
    lam = np.zeros((ne, n_gauss, 3))
    rows = np.arange(ne)
    for q in range(n_gauss):
        lam[rows, q, local] = 1 - s[q]
        lam[rows, q, (local + 1) % 3] = s[q]
    W = pencil.full(np.asarray(vectors).reshape(pencil.n, -1))
    V = space.mesh.vertices
    e = space.mesh.boundary_edges
    L = np.hypot(*(V[e[:, 1]] - V[e[:, 0]]).T)
    nrm = space.mesh.boundary_normals
    G, _ = space.element_geometry()
    D = shape_bary_derivs(lam.reshape(-1, 3), space.order).reshape(ne, n_gauss, -1, 3)
    grad_phi = np.einsum("eqai,eik->eqak", D, G[cells])
    coeff = W[space.cells[cells]]  # (ne, nloc, nv)
    grad = np.einsum("eqak,eav->eqvk", grad_phi, coeff)
    dn = np.einsum("eqvk,ek->eqv", grad, nrm)
    return dn, L[:, None] * w[None, :], nrm


def boundary_matrix(pencil, vectors, b, check_dirichlet=True):
    """Hermitian matrix of boundary pairings for the given eigenvectors."""
    b = np.asarray(b, dtype=float)
    X = np.asarray(vectors).reshape(pencil.n, -1)
    if check_dirichlet:
        W = pencil.full(X)
        bnd = pencil.space.boundary_mask
        if np.any(np.abs(W[bnd]) > 1e-12 * max(1.0, np.abs(W).max())):
            raise ContractError("vectors do not vanish on the boundary")
    if not np.any(b):
        return np.zeros((X.shape[1], X.shape[1]))
    dn, wq, nrm = normal_derivatives(pencil, X)
    bn = nrm @ b
    S = np.einsum("e,eq,eqj,eqk->jk", bn, wq, dn, dn.conj())
    S = 0.5 * (S + S.conj().T)
    if np.max(np.abs(S.imag)) <= 1e-10 * max(1.0, np.max(np.abs(S))):
        return S.real
    return S


def closed_form_boundary(nj: NodalData, nk: NodalData, b):
    """(pi / 2) [(c_j c_k - d_j d_k) b1 + (c_j d_k + c_k d_j) b2]."""
    b1, b2 = float(b[0]), float(b[1])
    return 0.5 * math.pi * ((nj.c * nk.c - nj.d * nk.d) * b1 + (nj.c * nk.d + nk.c * nj.d) * b2)


def closed_form_matrix(nodal, b):
    n = len(nodal)
    return np.array([[closed_form_boundary(nodal[j], nodal[k], b) for k in range(n)]
                     for j in range(n)])


def relative_deviation(S, C):
    den = np.linalg.norm(C)
    return float(np.linalg.norm(S - C) / den) if den > 0 else float(np.linalg.norm(S))


# ---------------------------------------------------------------------------
# R matrix
# ---------------------------------------------------------------------------

@dataclass
class RMatrixResult:
    R: np.ndarray
    raw: np.ndarray
    imag_ratio: float
    diag_ratio: float
    ok: bool
    flags: list = field(default_factory=list)

    @property
    def R12(self):
        return float(self.R[0, 1])


def r_matrix_raw(pencil, vectors, degree=8):
    """Complex matrix ``4 int grad w_j . A conj(w_k)`` over the whole domain."""
    space = pencil.space
    mesh = space.mesh
    X = np.asarray(vectors).reshape(pencil.n, -1)
    W = pencil.full(X)
    lam0, w = collapsed_rule(degree)
    T = mesh.triangles
    m = len(T)
    pole_local = np.argmax(T == mesh.pole_index, axis=1)
    pole_local[~np.any(T == mesh.pole_index, axis=1)] = 0
    lam = np.zeros((m, len(w), 3))
    for k in range(3):
        sel = pole_local == k
        lam[sel] = lam0[:, [(-k) % 3, (1 - k) % 3, (2 - k) % 3]][None]
    G, area = space.element_geometry()
    N = shape_values(lam.reshape(-1, 3), space.order).reshape(m, len(w), -1)
    D = shape_bary_derivs(lam.reshape(-1, 3), space.order).reshape(m, len(w), -1, 3)
    gphi = np.einsum("mqai,mik->mqak", D, G)
    xq = np.einsum("mqi,mik->mqk", lam, mesh.vertices[T])
    A = ab_potential(PoleFluxParams(mesh.pole, 0.5), xq.reshape(-1, 2)).reshape(m, len(w), 2)
    coeff = W[space.cells]  # (m, nloc, nv)
    vals = np.einsum("mqa,mav->mqv", N, coeff)
    grads = np.einsum("mqak,mav->mqvk", gphi, coeff)
    gA = np.einsum("mqvk,mqk->mqv", grads, A)
    return 4.0 * np.einsum("q,m,mqj,mqk->jk", w, area, gA, vals.conj())


def r_matrix(pencil, vectors, rel_tol=1e-3, abs_tol=1e-8, degree=8):
    """Real antisymmetric R matrix with consistency flags.

    The raw quadrature is checked for a small imaginary part and a small
    diagonal, then antisymmetrized with the diagonal set to zero.
    """
    if float(pencil.alpha) != 0.5:
        raise UnsupportedError("the R matrix is defined at alpha = 1/2")
    raw = r_matrix_raw(pencil, vectors, degree)
    p = raw.shape[0]
    R = 0.5 * (raw.real - raw.real.T)
    np.fill_diagonal(R, 0.0)
    scale = np.max(np.abs(R)) if p > 1 else 0.0
    imag = float(np.max(np.abs(raw.imag)))
    diag = float(np.max(np.abs(np.diag(raw)))) if p else 0.0
    flags = []
    imag_ratio = imag / scale if scale > 0 else math.inf
    diag_ratio = diag / scale if scale > 0 else math.inf
    if imag > rel_tol * scale + abs_tol:
        flags.append("imaginary part above tolerance: K-reality insufficient")
    if diag > rel_tol * scale + abs_tol:
        flags.append("nonzero diagonal: mesh resolution insufficient")
    return RMatrixResult(R=R, raw=raw, imag_ratio=imag_ratio, diag_ratio=diag_ratio,
                         ok=not flags, flags=flags)


# ---------------------------------------------------------------------------
# transversality
# ---------------------------------------------------------------------------

def transversality_det(n1: NodalData, n2: NodalData):
    """m1 m2 (m1^2 + m2^2) sin((alpha_1 - alpha_2) / 2); 0 with a warning if h > 1."""
    if n1.h > 1 or n2.h > 1:
        warnings.warn("transversality determinant undefined for h > 1; returning 0",
                      stacklevel=2)
        return 0.0
    return float((n1.m ** 2 + n2.m ** 2) * n1.m * n2.m * sin_half_difference(n1, n2))


def transversality_det_polar(m1, a1, m2, a2):
    return float(m1 * m2 * (m1 ** 2 + m2 ** 2) * math.sin(0.5 * (a1 - a2)))


# ---------------------------------------------------------------------------
# finite-difference derivatives
# ---------------------------------------------------------------------------

@dataclass
class FDResult:
    derivative: float
    second: float
    values: dict
    step: float
    scheme: str
    tracked: str


def _eig_at(base_mesh, cutoff, alpha, shift, k, ref, domain):
    if base_mesh is None:
        mesh = build_mesh(domain, np.asarray(cutoff.center) + shift, ref)
    elif np.any(shift):
        mesh = morph_mesh(base_mesh, shift, cutoff)
    else:
        mesh = base_mesh
    pen = assemble_branch_cut(mesh, PoleFluxParams(mesh.pole, alpha))
    return solve_eigs(pen, k).lambdas


def fd_eigen_derivative(domain, p: PoleFluxParams, k, direction, step=1e-3, ref=None,
                        scheme="central", morph=True, noise_floor=1e-11, cutoff=None):
    """Finite-difference derivative of an eigenvalue along ``(a, alpha) + s (b, t)``.

    ``k`` is a 0-based index or a pair of indices; for a pair the derivatives
    of the sum and of the product are returned in ``values["sum"]`` and
    ``values["product"]``, and ``derivative`` is that of the sum. The pole is
    moved with the map Phi_a on a fixed mesh unless ``morph`` is false;
    ``cutoff`` overrides the default cut-off centred at the pole.
    """
    from .mesh import RefinementSpec
    ref = ref or RefinementSpec()
    b, t = direction
    b = np.asarray(b, dtype=float)
    if cutoff is None:
        cutoff = CutoffSpec.for_domain(domain, p.a)
    base = build_mesh(domain, p.a, ref) if morph else None
    idx = np.atleast_1d(k)
    kk = int(idx.max()) + 1

    def lam(s):
        return _eig_at(base, cutoff, p.alpha + s * t, s * b, kk + 1, ref, domain)[idx]

    if scheme == "central":
        offsets = (-1, 0, 1)
    elif scheme == "forward":
        offsets = (0, 1, 2)
    elif scheme == "backward":
        offsets = (-2, -1, 0)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    vals = {o: lam(o * step) for o in offsets}

    def tracked(v):
        if len(idx) == 1:
            return {"value": float(v[0])}
        return {"sum": float(v.sum()), "product": float(np.prod(v))}

    tv = {o: tracked(v) for o, v in vals.items()}
    key = "value" if len(idx) == 1 else "sum"
    f = {o: tv[o][key] for o in offsets}
    if scheme == "central":
        der = (f[1] - f[-1]) / (2 * step)
        sec = (f[1] - 2 * f[0] + f[-1]) / step ** 2
        spread = abs(f[1] - f[-1])
    elif scheme == "forward":
        der = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * step)
        sec = (f[0] - 2 * f[1] + f[2]) / step ** 2
        spread = abs(f[1] - f[0])
    else:
        der = (3 * f[0] - 4 * f[-1] + f[-2]) / (2 * step)
        sec = (f[0] - 2 * f[-1] + f[-2]) / step ** 2
        spread = abs(f[0] - f[-1])
    if spread < noise_floor * abs(f[offsets[1]]):
        warnings.warn("finite-difference step is below the discretization noise floor",
                      stacklevel=2)
    values = {"samples": {o: tv[o] for o in offsets}}
    if len(idx) > 1:
        g = {o: tv[o]["product"] for o in offsets}
        if scheme == "central":
            values["product"] = (g[1] - g[-1]) / (2 * step)
        elif scheme == "forward":
            values["product"] = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * step)
        else:
            values["product"] = (3 * g[0] - 4 * g[-1] + g[-2]) / (2 * step)
        values["sum"] = der
    return FDResult(derivative=float(der), second=float(sec), values=values, step=step,
                    scheme=scheme, tracked=key)


# ---------------------------------------------------------------------------
# condition report
# ---------------------------------------------------------------------------

@dataclass
class PerturbationReport:
    S1: np.ndarray
    S2: np.ndarray
    S_closed1: np.ndarray
    S_closed2: np.ndarray
    R12: float
    r_result: RMatrixResult
    detM: float
    nodal: list
    conditions: dict
    prediction: str
    closed_form_deviation: float
    kreal_residuals: np.ndarray
    cluster: list
    lambdas: list
    fd_gradients: dict = field(default_factory=dict)
    basis: object = field(default=None, repr=False)

    def to_dict(self):
        return {
            "cluster": list(map(int, self.cluster)),
            "lambdas": [float(x) for x in self.lambdas],
            "S1": np.asarray(self.S1).tolist(),
            "S2": np.asarray(self.S2).tolist(),
            "S_closed1": np.asarray(self.S_closed1).tolist(),
            "S_closed2": np.asarray(self.S_closed2).tolist(),
            "closed_form_deviation": self.closed_form_deviation,
            "R12": self.R12,
            "R_imag_ratio": self.r_result.imag_ratio,
            "R_diag_ratio": self.r_result.diag_ratio,
            "R_flags": self.r_result.flags,
            "detM": self.detM,
            "nodal": [n.to_dict() for n in self.nodal],
            "conditions": self.conditions,
            "prediction": self.prediction,
            "kreal_residuals": [float(x) for x in self.kreal_residuals],
            "fd_gradients": self.fd_gradients,
        }

    def summary(self):
        c = self.conditions
        lines = [
            f"cluster {self.cluster}: lambda = {', '.join(f'{x:.6f}' for x in self.lambdas)}",
            *(f"  phi_{j + 1}: c={n.c:+.5f} d={n.d:+.5f} m={n.m:.5f} "
              f"angle={math.degrees(n.angle):7.2f} deg h={n.h}" for j, n in enumerate(self.nodal)),
            f"  det M = {self.detM:+.6g}",
            f"  R12 = {self.R12:+.6g} (imag ratio {self.r_result.imag_ratio:.1e})",
            f"  boundary matrix vs closed form: {100 * self.closed_form_deviation:.2f}%",
            f"  (i) {c['i']}  (ii) {c['ii']}  (iii) {c['iii']}",
            f"  prediction: {self.prediction}",
        ]
        return "\n".join(lines)


def nodal_data_for(pencil, vectors, radii=None, n_angles=64, max_residual=0.1):
    mesh = pencil.mesh
    if radii is None:
        radii = (4 * mesh.h_pole, 8 * mesh.h_pole)
    X = np.asarray(vectors).reshape(pencil.n, -1)
    return [extract_nodal_coeffs(fe_field(pencil, X[:, j]), mesh.pole, radii, n_angles,
                                 graded_radius=mesh.refinement.h_max, max_residual=max_residual)
            for j in range(X.shape[1])]


def theorem_report(pencil, bundle, cluster=None, radii=None, tol_kreal=1e-5,
                   r12_tol=1e-6, tol_fit=0.1):
    """Check conditions (i)-(iii) for a double cluster at half flux."""
    if float(pencil.alpha) != 0.5:
        raise UnsupportedError("the condition report is defined at alpha = 1/2")
    if cluster is None:
        cluster = bundle.clusters[0]
    cluster = list(cluster)
    if len(cluster) != 2:
        raise UnsupportedError(
            f"multiplicity two required; cluster {cluster} has size {len(cluster)}")
    kb = k_real_project(pencil, bundle.vectors[:, cluster], tol_kreal)
    U = kb.vectors
    nodal = nodal_data_for(pencil, U, radii, max_residual=tol_fit)
    S1 = boundary_matrix(pencil, U, (1.0, 0.0))
    S2 = boundary_matrix(pencil, U, (0.0, 1.0))
    C1 = closed_form_matrix(nodal, (1.0, 0.0))
    C2 = closed_form_matrix(nodal, (0.0, 1.0))
    # the closed form uses the canonical signs; undo them on the raw basis
    sgn = np.array([np.sign(n.c_raw * n.c + n.d_raw * n.d) or 1.0 for n in nodal])
    C1r, C2r = C1 * np.outer(sgn, sgn), C2 * np.outer(sgn, sgn)
    dev = max(relative_deviation(np.real(S1), C1r), relative_deviation(np.real(S2), C2r))
    rr = r_matrix(pencil, U)
    pre = theorem_precondition_i_ii(nodal[0], nodal[1])
    detM = transversality_det(nodal[0], nodal[1]) if pre.condition_i else 0.0
    scale = max(1.0, abs(bundle.lambdas[cluster[0]]))
    cond_iii = abs(rr.R12) > r12_tol * scale
    conditions = {"i": pre.condition_i, "ii": pre.condition_ii, "iii": bool(cond_iii)}
    if all(conditions.values()):
        prediction = "isolated double point"
    elif not cond_iii and pre.both:
        prediction = "theorem not applicable: R12 numerically zero"
    else:
        prediction = "theorem not applicable"
    return PerturbationReport(S1=S1, S2=S2, S_closed1=C1r, S_closed2=C2r, R12=rr.R12,
                              r_result=rr, detM=detM, nodal=nodal, conditions=conditions,
                              prediction=prediction, closed_form_deviation=dev,
                              kreal_residuals=kb.kreal_residuals, cluster=cluster,
                              lambdas=[float(bundle.lambdas[j]) for j in cluster], basis=kb)
