"""Discrete Aharonov-Bohm operator as a sparse Hermitian pencil.

Branch-cut gauge: writing ``u = exp(i alpha theta) w`` with ``theta`` the
polar angle about the pole turns the quadratic form of (i grad + A)^2 into the
plain Dirichlet form of ``w``. Continuity of ``u`` across the cut becomes the
jump ``w_minus = exp(-2 pi i alpha) w_plus``, which is eliminated through a
sparse prolongation ``T`` so that ``K = T^H K0 T`` and ``M = T^H M0 T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ConsistencyError, MeshQualityError, UnsupportedError
from .fem import FunctionSpace
from .geometry import PoleFluxParams
from .mesh import CutMesh, signed_areas


def cut_phase(alpha):
    """exp(-2 pi i alpha), exact at integer and half-integer alpha."""
    f = alpha - math.floor(alpha)
    if f == 0.0:
        return 1.0 + 0j
    if f == 0.5:
        return -1.0 + 0j
    return complex(np.exp(-2j * math.pi * f))


@dataclass(eq=False)
class HermitianPencil:
    """Reduced pencil ``K x = lambda M x`` together with its prolongation.

    ``T`` maps reduced unknowns to all dofs of ``space``; nodal values of the
    gauge field ``w`` are ``T @ x``. ``kind`` is ``"branch_cut"`` or
    ``"double_cover"``.
    """

    K: sp.csr_matrix
    M: sp.csr_matrix
    T: sp.csr_matrix
    space: FunctionSpace
    alpha: float
    a: np.ndarray
    kind: str = "branch_cut"
    extra: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def mesh(self):
        return self.space.mesh

    def full(self, x):
        """Nodal dof values of the gauge field for reduced vector(s) ``x``."""
        return self.T @ x

    def hermiticity_defect(self):
        return float(abs(self.K - self.K.conj().T).max()) if self.n else 0.0

    def dump_coo(self, path):
        """Write K and M in coordinate-list text form (row col re im)."""
        with open(path, "w") as fh:
            for name, A in (("K", self.K), ("M", self.M)):
                C = A.tocoo()
                fh.write(f"{name} {A.shape[0]} {A.shape[1]} {C.nnz}\n")
                for r, c, v in zip(C.row, C.col, C.data):
                    v = complex(v)
                    fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")


def _space_and_matrices(mesh: CutMesh):
    cache = mesh._cache
    if "space" not in cache:
        V = FunctionSpace(mesh)
        K0, M0 = V.assemble(degree=4)
        cache["space"] = (V, K0, M0)
    return cache["space"]


def _prolongation(space, phase, pole_free):
    n = space.n_dofs
    fixed = space.boundary_mask.copy()
    if not pole_free:
        fixed[space.pole_dof] = True
    plus, minus = space.cut_dof_pairs[:, 0], space.cut_dof_pairs[:, 1]
    dep = np.zeros(n, dtype=bool)
    dep[minus] = True
    free = np.nonzero(~fixed & ~dep)[0]
    col = -np.ones(n, dtype=np.int64)
    col[free] = np.arange(len(free))
    rows = list(free)
    cols = list(col[free])
    vals = [1.0 + 0j] * len(free)
    for p, m in zip(plus, minus):
        if fixed[p] or fixed[m]:
            continue
        rows.append(m)
        cols.append(col[p])
        vals.append(phase)
    T = sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, len(free)))
    return T


def _hermitian(A):
    A = 0.5 * (A + A.conj().T)
    return A.tocsr()


def assemble_branch_cut(mesh: CutMesh, p: PoleFluxParams) -> HermitianPencil:
    """Pencil of (i grad + A_a^alpha)^2 with Dirichlet conditions."""
    if np.hypot(*(mesh.pole - p.pole)) > 1e-12 * max(1.0, np.hypot(*p.pole)):
        raise ConsistencyError(
            f"mesh pole {mesh.pole.tolist()} differs from requested pole {list(p.a)}")
    space, K0, M0 = _space_and_matrices(mesh)
    integer = float(p.alpha).is_integer()
    T = _prolongation(space, cut_phase(p.alpha), pole_free=integer)
    TH = T.conj().T.tocsr()
    K = _hermitian(TH @ K0 @ T)
    M = _hermitian(TH @ M0 @ T)
    return HermitianPencil(K=K, M=M, T=T, space=space, alpha=p.alpha, a=p.pole.copy())


def reconstruct_u(pencil: HermitianPencil, x):
    """Nodal values of ``u = exp(i alpha theta) w`` on all dofs.

    At the pole the value is 0 unless alpha is an integer.
    """
    if pencil.kind != "branch_cut":
        raise UnsupportedError("reconstruct_u needs a branch-cut pencil")
    w = pencil.full(x)
    th = pencil.space.dof_theta
    ph = np.exp(1j * pencil.alpha * th)
    if w.ndim == 2:
        ph = ph[:, None]
    return ph * w


def field(pencil: HermitianPencil, x):
    """Callable evaluating the eigenfunction ``u`` at arbitrary points."""
    space = pencil.space
    w = pencil.full(x)
    a = space.mesh.pole
    th = space.mesh.theta
    tri = space.mesh.triangles
    pole = space.mesh.pole_index

    def u(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals, cell, _ = space.evaluate(w, pts, return_cells=True)
        t = tri[cell]
        ref = np.where(t[:, 0] != pole, t[:, 0], t[:, 1])
        d = pts - a
        raw = np.arctan2(d[:, 1], d[:, 0])
        ang = th[ref] + (raw - th[ref] + math.pi) % (2 * math.pi) - math.pi
        return np.exp(1j * pencil.alpha * ang) * vals

    return u


# ---------------------------------------------------------------------------
# double covering at half flux
# ---------------------------------------------------------------------------

class _CoverMesh:
    """Minimal mesh object for a FunctionSpace on the double cover."""

    def __init__(self, vertices, triangles, boundary_edges, pole_index, refinement):
        self.vertices = vertices
        self.triangles = triangles
        self.boundary_edges = boundary_edges
        self.pole_index = pole_index
        self.refinement = refinement
        self.cut_pairs = np.zeros((0, 2), dtype=np.int64)
        self.theta = np.zeros(len(vertices))
        self._cache = {}

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def pole(self):
        return self.vertices[self.pole_index]


def cover_mesh(mesh: CutMesh):
    """Lift the cut mesh to the covering surface ``y -> y^2 + a``."""
    V, T, th = mesh.vertices, mesh.triangles, mesh.theta
    a = mesh.pole
    r = np.hypot(*(V - a).T)
    y1 = np.sqrt(r)[:, None] * np.stack([np.cos(th / 2), np.sin(th / 2)], axis=1)
    nv = len(V)
    pole = mesh.pole_index
    # sheet 1 ids: 0..nv-1 ; sheet 2 ids: nv..2nv-1 ; then merge
    Y = np.vstack([y1, -y1])
    Y[pole] = 0.0
    ident = np.arange(2 * nv)
    ident[nv + pole] = pole
    plus, minus = mesh.cut_pairs[:, 0], mesh.cut_pairs[:, 1]
    ident[minus] = nv + plus          # sheet-1 minus == sheet-2 plus
    ident[nv + minus] = plus          # sheet-2 minus == sheet-1 plus
    tris = ident[np.vstack([T, T + nv])]
    used = np.unique(tris)
    renum = -np.ones(2 * nv, dtype=np.int64)
    renum[used] = np.arange(len(used))
    verts = Y[used]
    tris = renum[tris]
    if np.any(signed_areas(verts, tris) <= 0):
        raise MeshQualityError("lifted triangle is inverted on the double cover")
    # boundary: single-use edges
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    _, inv, cnt = np.unique(np.sort(e, axis=1), axis=0, return_inverse=True, return_counts=True)
    bnd = e[cnt[inv.ravel()] == 1]
    return _CoverMesh(verts, tris, bnd, int(renum[pole]), mesh.refinement)


def assemble_double_cover(mesh: CutMesh, a=None, alpha=0.5) -> HermitianPencil:
    """Real weighted pencil on the double cover, antisymmetric sector only.

    Solves ``-Delta v = 4 |y|^2 lambda v`` with ``v(-y) = -v(y)``; its
    spectrum equals that of the half-flux operator with pole ``a``.
    """
    if float(alpha) != 0.5:
        raise UnsupportedError("the double cover formulation needs alpha = 1/2")
    if a is not None and np.hypot(*(mesh.pole - np.asarray(a, float))) > 1e-12:
        raise ConsistencyError("mesh pole differs from requested pole")
    cm = cover_mesh(mesh)
    space = FunctionSpace(cm, order=mesh.refinement.order)
    K0, _ = space.assemble(degree=4)
    M0 = space.assemble_weighted_mass(lambda y: 4.0 * (y[:, 0] ** 2 + y[:, 1] ** 2), degree=6)
    X = space.coords
    tree = cKDTree(X)
    dist, partner = tree.query(-X)
    tol = 1e-9 * max(1.0, float(np.abs(X).max()))
    if np.any(dist > tol):
        raise MeshQualityError("double cover dofs are not antipodally paired")
    n = space.n_dofs
    fixed = space.boundary_mask.copy()
    fixed[space.pole_dof] = True
    master = np.arange(n) < partner
    free = np.nonzero(master & ~fixed)[0]
    col = -np.ones(n, dtype=np.int64)
    col[free] = np.arange(len(free))
    slaves = partner[free]
    rows = np.r_[free, slaves]
    cols = np.r_[col[free], col[free]]
    vals = np.r_[np.ones(len(free)), -np.ones(len(free))]
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n, len(free)))
    K = _hermitian(T.T @ K0 @ T)
    M = _hermitian(T.T @ M0 @ T)
    return HermitianPencil(K=K, M=M, T=T, space=space, alpha=0.5, a=mesh.pole.copy(),
                           kind="double_cover", extra={"cover_mesh": cm})
