"""Lagrange P1/P2 elements on triangles: quadrature, assembly, evaluation."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ContractError


@lru_cache(maxsize=None)
def collapsed_rule(degree):
    """Product Gauss rule on the reference triangle, collapsed at vertex 0.

    Returns barycentric points ``(n, 3)`` and weights summing to 1. The map
    ``L1 = s (1 - t), L2 = s t`` carries the Jacobian ``s``, so an integrand
    behaving like ``1 / dist(vertex 0)`` becomes bounded.
    """
    n = max(1, math.ceil((degree + 2) / 2))
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    s, t = np.meshgrid(x, x, indexing="ij")
    ws, wt = np.meshgrid(w, w, indexing="ij")
    s, t = s.ravel(), t.ravel()
    L1 = s * (1 - t)
    L2 = s * t
    lam = np.stack([1 - L1 - L2, L1, L2], axis=1)
    weights = 2.0 * (ws * wt).ravel() * s
    return lam, weights


LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def shape_values(lam, order):
    """Basis values at barycentric points, shape (nq, nloc)."""
    if order == 1:
        return lam.copy()
    L0, L1, L2 = lam.T
    return np.stack([L0 * (2 * L0 - 1), L1 * (2 * L1 - 1), L2 * (2 * L2 - 1),
                     4 * L0 * L1, 4 * L1 * L2, 4 * L2 * L0], axis=1)


def shape_bary_derivs(lam, order):
    """d(basis)/d(L_i), shape (nq, nloc, 3)."""
    nq = len(lam)
    if order == 1:
        return np.broadcast_to(np.eye(3), (nq, 3, 3)).copy()
    L0, L1, L2 = lam.T
    D = np.zeros((nq, 6, 3))
    D[:, 0, 0] = 4 * L0 - 1
    D[:, 1, 1] = 4 * L1 - 1
    D[:, 2, 2] = 4 * L2 - 1
    D[:, 3, 0], D[:, 3, 1] = 4 * L1, 4 * L0
    D[:, 4, 1], D[:, 4, 2] = 4 * L2, 4 * L1
    D[:, 5, 2], D[:, 5, 0] = 4 * L0, 4 * L2
    return D


def bary_gradients(p):
    """Gradients of the barycentric coordinates, shape (m, 3, 2), and areas."""
    x, y = p[:, :, 0], p[:, :, 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    G = np.empty(p.shape[:2] + (2,))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        G[:, i, 0] = (y[:, j] - y[:, k]) / area2
        G[:, i, 1] = (x[:, k] - x[:, j]) / area2
    return G, 0.5 * area2


class FunctionSpace:
    """Continuous Lagrange space on a cut mesh.

    Degrees of freedom are the mesh vertices followed (for order 2) by one per
    edge. Because cut nodes are duplicated, the space is discontinuous across
    the cut; ``cut_dof_pairs`` lists ``(plus, minus)`` dofs that coincide.
    """

    def __init__(self, mesh, order=None):
        self.mesh = mesh
        self.order = mesh.refinement.order if order is None else order
        V, T = mesh.vertices, mesh.triangles
        nv = len(V)
        if self.order == 1:
            self.cells = T.copy()
            self.coords = V.copy()
            self.n_edges = 0
        else:
            e = np.vstack([T[:, list(le)] for le in LOCAL_EDGES])
            key = np.sort(e, axis=1)
            uniq, inv = np.unique(key, axis=0, return_inverse=True)
            inv = inv.ravel().reshape(3, -1).T
            self.edges = uniq
            self.n_edges = len(uniq)
            self.cells = np.hstack([T, nv + inv])
            self.coords = np.vstack([V, 0.5 * (V[uniq[:, 0]] + V[uniq[:, 1]])])
        self.n_dofs = len(self.coords)
        self.pole_dof = mesh.pole_index
        self._build_masks()
        self._tree = None

    def _build_masks(self):
        m = self.mesh
        nv = m.n_vertices
        bnd = np.zeros(self.n_dofs, dtype=bool)
        bnd[m.boundary_edges.ravel()] = True
        pairs = [tuple(p) for p in m.cut_pairs]
        if self.order == 2:
            lookup = {tuple(e): nv + i for i, e in enumerate(self.edges)}
            for i, j in m.boundary_edges:
                bnd[lookup[(min(i, j), max(i, j))]] = True
            minus = set(int(x) for x in m.cut_pairs[:, 1])
            to_plus = {int(mi): int(pl) for pl, mi in m.cut_pairs}
            to_plus[m.pole_index] = m.pole_index
            for k, (i, j) in enumerate(self.edges):
                if (i in minus or j in minus) and i in to_plus and j in to_plus:
                    pi, pj = to_plus[i], to_plus[j]
                    key = (min(pi, pj), max(pi, pj))
                    if key not in lookup:
                        raise ContractError("cut edge without a plus partner")
                    pairs.append((lookup[key], nv + k))
        self.boundary_mask = bnd
        self.cut_dof_pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)

    # angles of dofs on the cut-mesh branch
    @property
    def dof_theta(self):
        th = self.mesh.theta
        if self.order == 1:
            return th.copy()
        a = self.mesh.pole
        i, j = self.edges[:, 0], self.edges[:, 1]
        ref = np.where(i == self.pole_dof, j, i)
        mid = self.coords[self.mesh.n_vertices:] - a
        raw = np.arctan2(mid[:, 1], mid[:, 0])
        wrap = (raw - th[ref] + math.pi) % (2 * math.pi) - math.pi
        return np.r_[th, th[ref] + wrap]

    # ------------------------------------------------------------------
    def element_geometry(self):
        p = self.mesh.vertices[self.mesh.triangles]
        return bary_gradients(p)

    def assemble(self, degree=4):
        """Stiffness and mass matrices (real, CSR) on all dofs."""
        lam, w = collapsed_rule(degree)
        N = shape_values(lam, self.order)
        D = shape_bary_derivs(lam, self.order)
        G, area = self.element_geometry()
        # physical gradients (m, nq, nloc, 2)
        grad = np.einsum("qai,mik->mqak", D, G)
        Ke = np.einsum("q,m,mqak,mqbk->mab", w, area, grad, grad)
        Me = np.einsum("q,m,qa,qb->mab", w, area, N, N)
        return self._scatter(Ke), self._scatter(Me)

    def assemble_weighted_mass(self, weight, degree):
        """Mass matrix with a pointwise weight ``weight(x)``."""
        lam, w = collapsed_rule(degree)
        N = shape_values(lam, self.order)
        p = self.mesh.vertices[self.mesh.triangles]
        _, area = bary_gradients(p)
        xq = np.einsum("qi,mik->mqk", lam, p)
        wx = weight(xq.reshape(-1, 2)).reshape(xq.shape[:2])
        Me = np.einsum("q,m,mq,qa,qb->mab", w, area, wx, N, N)
        return self._scatter(Me)

    def _scatter(self, Ae):
        nloc = self.cells.shape[1]
        rows = np.repeat(self.cells, nloc, axis=1).ravel()
        cols = np.tile(self.cells, (1, nloc)).ravel()
        A = sp.coo_matrix((Ae.ravel(), (rows, cols)), shape=(self.n_dofs, self.n_dofs)).tocsr()
        A.sum_duplicates()
        return A

    # evaluation -------------------------------------------------------
    def locate(self, pts):
        """Containing triangle and barycentric coordinates for each point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        V, T = self.mesh.vertices, self.mesh.triangles
        if self._tree is None:
            self._tree = cKDTree(V[T].mean(axis=1))
            G, _ = self.element_geometry()
            self._G = G
        cell = np.full(len(pts), -1)
        lam = np.zeros((len(pts), 3))
        todo = np.arange(len(pts))
        for k in (8, 32, 128, 512):
            if not len(todo):
                break
            k = min(k, len(T))
            _, cand = self._tree.query(pts[todo], k=k)
            cand = cand.reshape(len(todo), k)
            p0 = V[T[cand, 0]]
            d = pts[todo, None, :] - p0
            Gc = self._G[cand]  # (n, k, 3, 2)
            L = np.einsum("nkij,nkj->nki", Gc, d)
            L[:, :, 0] = 1.0 - L[:, :, 1] - L[:, :, 2]
            ok = np.all(L >= -1e-10, axis=2)
            found = ok.any(axis=1)
            first = np.argmax(ok, axis=1)
            idx = todo[found]
            cell[idx] = cand[found, first[found]]
            lam[idx] = L[found, first[found]]
            todo = todo[~found]
        if len(todo):
            raise ContractError(f"{len(todo)} points lie outside the mesh")
        return cell, lam

    def evaluate(self, coeffs, pts, return_cells=False):
        """Values of the FE function with dof vector ``coeffs`` at points."""
        cell, lam = self.locate(pts)
        N = shape_values(lam, self.order)
        vals = np.einsum("na,na->n", N, np.asarray(coeffs)[self.cells[cell]])
        if return_cells:
            return vals, cell, lam
        return vals

    def gradient(self, coeffs, cells, lam):
        """Gradient of the FE function at barycentric points of given cells."""
        G, _ = self.element_geometry()
        D = shape_bary_derivs(lam, self.order)
        gl = np.einsum("nai,nik->nak", D, G[cells])
        return np.einsum("nak,na->nk", gl, np.asarray(coeffs)[self.cells[cells]])
