"""Graded triangulations with the pole as a vertex and a duplicated branch cut.

The mesh is a hybrid. A structured polar patch of ``n_theta`` spokes and
``pole_depth + 1`` rings (radius ratio 0.5) surrounds the pole; the rest of
the domain is a Delaunay triangulation of a ring-shaped point cloud whose
spacing grows linearly with the distance to the pole up to ``h_max``. Boundary,
cut and patch-rim segments are kept Gabriel so they survive the unconstrained
Delaunay step.

The cut follows the ray ``{a + t e1, t > 0}`` up to its first boundary hit.
Nodes on it are stored twice: the *plus* copy belongs to triangles above the
ray (polar angle near 0), the *minus* copy to triangles below (angle near 2 pi).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order
from scipy.spatial import Delaunay, cKDTree

from .errors import ConsistencyError, GeometryError, MeshQualityError
from .geometry import Arc, CutoffSpec, DomainSpec, phi_a

GRADING_RATIO = 0.5
_CLEAR = 0.45  # fill points keep this fraction of the local size from constraints


@dataclass(frozen=True)
class RefinementSpec:
    h_max: float = 0.05
    pole_depth: int = 8
    order: int = 2
    n_theta: int = 16

    def __post_init__(self):
        if not self.h_max > 0:
            raise GeometryError("h_max must be positive")
        if self.pole_depth < 4:
            raise GeometryError("pole_depth must be at least 4")
        if self.order not in (1, 2):
            raise GeometryError("order must be 1 or 2")
        if self.n_theta < 8 or self.n_theta % 2:
            raise GeometryError("n_theta must be an even number >= 8")

    def refined(self, factor=2.0):
        return RefinementSpec(self.h_max / factor, self.pole_depth, self.order, self.n_theta)

    def to_dict(self):
        return {"h_max": self.h_max, "pole_depth": self.pole_depth,
                "order": self.order, "n_theta": self.n_theta}


@dataclass(frozen=True, eq=False)
class CutMesh:
    """Immutable cut triangulation.

    ``cut_pairs`` rows are ``(plus, minus)`` vertex ids ordered from the pole
    outwards; the last pair lies on the boundary. ``theta`` holds a branch of
    the polar angle about the pole that is continuous on the cut mesh; it is 0
    at the innermost plus node and jumps by 2 pi across the cut.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_normals: np.ndarray
    cut_pairs: np.ndarray
    pole_index: int
    theta: np.ndarray
    domain: DomainSpec
    refinement: RefinementSpec
    h_pole: float
    grading_ratio: float = GRADING_RATIO
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "boundary_normals",
                     "cut_pairs", "theta"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def pole(self):
        return self.vertices[self.pole_index].copy()

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def fingerprint(self):
        if "fp" not in self._cache:
            hsh = hashlib.sha1()
            hsh.update(np.round(self.vertices, 12).tobytes())
            hsh.update(self.triangles.astype(np.int64).tobytes())
            hsh.update(str(self.refinement.order).encode())
            self._cache["fp"] = hsh.hexdigest()[:16]
        return self._cache["fp"]

    def areas(self):
        return signed_areas(self.vertices, self.triangles)

    def merged_index(self):
        """Vertex map sending every minus copy to its plus copy."""
        idx = np.arange(self.n_vertices)
        idx[self.cut_pairs[:, 1]] = self.cut_pairs[:, 0]
        return idx

    def euler_characteristic(self):
        m = self.merged_index()
        tri = m[self.triangles]
        e = np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
        n_edges = len(np.unique(e, axis=0))
        n_verts = len(np.unique(tri))
        return n_verts - n_edges + len(tri)

    def boundary_vertex_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    def min_angle(self):
        """Smallest interior angle over all triangles, in degrees."""
        p = self.vertices[self.triangles]
        ang = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            ang.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
        return float(np.min(ang))

    # serialization --------------------------------------------------------
    def to_dict(self):
        return {
            "domain": self.domain.to_dict(),
            "refinement": self.refinement.to_dict(),
            "pole_index": int(self.pole_index),
            "h_pole": self.h_pole,
            "grading_ratio": self.grading_ratio,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "cut_pairs": self.cut_pairs.tolist(),
            "boundary_edges": self.boundary_edges.tolist(),
            "boundary_normals": self.boundary_normals.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        v = np.asarray(d["vertices"], dtype=float)
        t = np.asarray(d["triangles"], dtype=np.int64)
        cp = np.asarray(d["cut_pairs"], dtype=np.int64).reshape(-1, 2)
        pole = int(d["pole_index"])
        return cls(
            vertices=v, triangles=t,
            boundary_edges=np.asarray(d["boundary_edges"], dtype=np.int64).reshape(-1, 2),
            boundary_normals=np.asarray(d["boundary_normals"], dtype=float).reshape(-1, 2),
            cut_pairs=cp, pole_index=pole,
            theta=node_angles(v, t, pole, cp[0, 0]),
            domain=DomainSpec.from_dict(d["domain"]),
            refinement=RefinementSpec(**d["refinement"]),
            h_pole=float(d["h_pole"]), grading_ratio=float(d["grading_ratio"]))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_text(self, path):
        """Plain-text export; see the README for the layout."""
        with open(path, "w") as fh:
            fh.write("# abeigen cut mesh\n")
            fh.write(f"domain {json.dumps(self.domain.to_dict())}\n")
            fh.write(f"refinement {json.dumps(self.refinement.to_dict())}\n")
            fh.write(f"pole {self.pole_index} {float(self.h_pole)!r} {float(self.grading_ratio)!r}\n")
            fh.write(f"vertices {len(self.vertices)}\n")
            for x, y in self.vertices.tolist():
                fh.write(f"{x!r} {y!r}\n")
            fh.write(f"triangles {len(self.triangles)}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")
            fh.write(f"cut_pairs {len(self.cut_pairs)}\n")
            for p, m in self.cut_pairs:
                fh.write(f"{p} {m}\n")
            fh.write(f"boundary_edges {len(self.boundary_edges)}\n")
            for (i, j), (nx, ny) in zip(self.boundary_edges.tolist(),
                                        self.boundary_normals.tolist()):
                fh.write(f"{i} {j} {nx!r} {ny!r}\n")

    @classmethod
    def from_text(cls, path):
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        d = {}
        it = iter(lines)
        for ln in it:
            key, _, rest = ln.partition(" ")
            if key in ("domain", "refinement"):
                d[key] = json.loads(rest)
            elif key == "pole":
                idx, hp, gr = rest.split()
                d["pole_index"], d["h_pole"], d["grading_ratio"] = int(idx), float(hp), float(gr)
            elif key in ("vertices", "triangles", "cut_pairs", "boundary_edges"):
                rows = [next(it).split() for _ in range(int(rest))]
                if key == "vertices":
                    d[key] = [[float(x) for x in r] for r in rows]
                elif key == "boundary_edges":
                    d[key] = [[int(r[0]), int(r[1])] for r in rows]
                    d["boundary_normals"] = [[float(r[2]), float(r[3])] for r in rows]
                else:
                    d[key] = [[int(x) for x in r] for r in rows]
            else:
                raise GeometryError(f"unknown section {key!r} in mesh file")
        return cls.from_dict(d)


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def node_angles(vertices, triangles, pole_index, root):
    """Continuous branch of the polar angle about the pole on the cut mesh.

    Angles are unwrapped along a breadth-first tree of mesh edges (the pole is
    excluded), starting from ``root`` whose angle is taken in (-pi, pi].
    """
    n = len(vertices)
    d = vertices - vertices[pole_index]
    raw = np.arctan2(d[:, 1], d[:, 0])
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = e[(e[:, 0] != pole_index) & (e[:, 1] != pole_index)]
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
    order, pred = breadth_first_order(g, root, directed=False, return_predecessors=True)
    theta = np.zeros(n)
    theta[root] = raw[root]
    for v in order[1:]:
        p = pred[v]
        theta[v] = theta[p] + _wrap(raw[v] - raw[p])
    theta[pole_index] = 0.0
    return theta


def boundary_edges_from_triangles(vertices, triangles, cut_pairs, pole_index):
    """Edges used by a single triangle minus the cut edges, oriented CCW."""
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    single = e[cnt[inv] == 1]
    cut_nodes = np.zeros(len(vertices), dtype=bool)
    cut_nodes[cut_pairs.ravel()] = True
    cut_nodes[pole_index] = True
    # a single-use edge with both ends on the cut is a cut edge
    keep = ~(cut_nodes[single[:, 0]] & cut_nodes[single[:, 1]])
    edges = single[keep]
    d = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    L = np.hypot(d[:, 0], d[:, 1])
    normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / L[:, None]
    return edges, normals


# ---------------------------------------------------------------------------
# point generation
# ---------------------------------------------------------------------------

class _Sizing:
    def __init__(self, a, r0, h_max, n_theta):
        self.a = a
        self.gamma = 2 * math.pi / n_theta
        self.lo = self.gamma * r0
        self.h_max = h_max

    def __call__(self, x):
        x = np.atleast_2d(x)
        r = np.hypot(x[:, 0] - self.a[0], x[:, 1] - self.a[1])
        return np.clip(self.gamma * r, self.lo, self.h_max)

    def radii(self, r_start, r_stop):
        """Radii r_{k+1} = r_k + h(r_k) from r_start while below r_stop."""
        out = []
        r = r_start
        while True:
            r = r + min(max(self.gamma * r, self.lo), self.h_max)
            if r >= r_stop:
                return np.array(out)
            out.append(r)


def _piece_param(piece, x):
    if isinstance(piece, Arc):
        v = x - piece.center
        ang = piece.t0 + (math.atan2(v[1], v[0]) - piece.t0) % (2 * math.pi)
        return (ang - piece.t0) / (piece.t1 - piece.t0)
    d = piece.p1 - piece.p0
    return float(np.clip((x - piece.p0) @ d / (d @ d), 0.0, 1.0))


def _piece_distance(piece, x):
    if isinstance(piece, Arc):
        v = x - piece.center
        return abs(math.hypot(*v) - piece.radius)
    s = _piece_param(piece, x)
    return float(math.hypot(*(piece.point(s) - x)))


def _bisect(piece, s0, s1, sizing):
    """Dyadic subdivision of [s0, s1] until each part fits the local size."""
    out = []
    stack = [(s0, s1)]
    while stack:
        u, v = stack.pop()
        mid = piece.point(0.5 * (u + v))
        if (v - u) * piece.length > sizing(mid)[0] * 1.0001:
            stack.append((0.5 * (u + v), v))
            stack.append((u, 0.5 * (u + v)))
        else:
            out.append(u)
    return out


def _boundary_params(domain, q, sizing):
    """Boundary loop as (piece, s) pairs, CCW, starting at the cut exit q."""
    pieces = domain.pieces()
    iq = int(np.argmin([_piece_distance(p, q) for p in pieces]))
    sq = _piece_param(pieces[iq], q)
    if isinstance(pieces[iq], Arc) and len(pieces) == 1 and sq > 1 - 1e-12:
        sq = 0.0
    if sq > 1 - 1e-12:
        iq, sq = (iq + 1) % len(pieces), 0.0
    order = [(iq, sq, 1.0)]
    for k in range(1, len(pieces)):
        order.append(((iq + k) % len(pieces), 0.0, 1.0))
    if sq > 1e-12:
        order.append((iq, 0.0, sq))
    params = []
    for i, s0, s1 in order:
        params.extend((i, s) for s in _bisect(pieces[i], s0, s1, sizing))
    return pieces, params


def _boundary_point(pieces, ps):
    i, s = ps
    return pieces[i].point(s)


def _mid_param(seg_from, seg_to):
    (i, s), (j, t) = seg_from, seg_to
    if i == j and t > s:
        return (i, 0.5 * (s + t))
    return (i, 0.5 * (s + 1.0))


def _gabriel_cleanup(pieces, bparams, cut_r, a, ring0, fill, max_iter=60):
    """Remove fill points and split segments until constrained segments are Gabriel."""
    e1 = np.array([1.0, 0.0])
    alive = np.ones(len(fill), dtype=bool)
    ftree = cKDTree(fill) if len(fill) else None
    for _ in range(max_iter):
        bpts = np.array([_boundary_point(pieces, p) for p in bparams])
        cpts = a + np.outer(cut_r, e1)
        q = bpts[0]
        cut_seq = np.vstack([ring0[:1], cpts, q[None]])
        cons = np.vstack([ring0, cpts, bpts])
        nb = len(bpts)
        # segments as (start, end, kind, index)
        seg_a = np.vstack([ring0, cut_seq[:-1], bpts])
        seg_b = np.vstack([np.roll(ring0, -1, axis=0), cut_seq[1:], np.roll(bpts, -1, axis=0)])
        kinds = np.r_[np.zeros(len(ring0)), np.ones(len(cut_seq) - 1), 2 * np.ones(nb)].astype(int)
        local = np.r_[np.arange(len(ring0)), np.arange(len(cut_seq) - 1), np.arange(nb)]
        mid = 0.5 * (seg_a + seg_b)
        rad = 0.5 * np.hypot(*(seg_b - seg_a).T)
        tol = rad * (1 + 1e-9)
        changed = False
        if ftree is not None:
            hits = ftree.query_ball_point(mid, tol)
            kill = [i for h in hits for i in h if alive[i]]
            if kill:
                alive[np.array(kill)] = False
                changed = True
        ctree = cKDTree(cons)
        hits = ctree.query_ball_point(mid, tol)
        split_cut, split_bnd = set(), set()
        for s, h in enumerate(hits):
            for i in h:
                p = cons[i]
                if min(np.hypot(*(p - seg_a[s])), np.hypot(*(p - seg_b[s]))) < 1e-12:
                    continue
                if kinds[s] == 0:
                    raise MeshQualityError("pole patch rim is too close to another constraint")
                (split_cut if kinds[s] == 1 else split_bnd).add(int(local[s]))
                break
        if split_cut:
            r_seq = np.r_[np.hypot(*(ring0[0] - a)), cut_r, np.hypot(*(q - a))]
            new = [0.5 * (r_seq[i] + r_seq[i + 1]) for i in split_cut]
            cut_r = np.sort(np.r_[cut_r, new])
            changed = True
        if split_bnd:
            new_params = []
            for k, p in enumerate(bparams):
                new_params.append(p)
                if k in split_bnd:
                    new_params.append(_mid_param(p, bparams[(k + 1) % nb]))
            bparams = new_params
            changed = True
        if not changed:
            return bparams, cut_r, fill[alive]
    raise MeshQualityError("Gabriel cleanup did not converge")


def _dist_to_segment(p, s0, s1):
    d = s1 - s0
    t = np.clip(((p - s0) @ d) / (d @ d), 0.0, 1.0)
    return np.hypot(*(p - (s0 + t[:, None] * d)).T)


def build_mesh(domain: DomainSpec, a, ref: RefinementSpec = RefinementSpec()) -> CutMesh:
    """Graded cut mesh of ``domain`` with the pole ``a`` as a vertex."""
    a = np.asarray(a, dtype=float)
    if not domain.contains(a):
        raise GeometryError(f"pole {a.tolist()} is not interior to the domain")
    dist = float(domain.distance_to_boundary(a))
    h = ref.h_max
    if dist <= 2 * h:
        raise GeometryError(
            f"pole is {dist:.4g} from the boundary; need more than 2*h_max = {2 * h:.4g}")
    nt, depth = ref.n_theta, ref.pole_depth
    r0 = h
    sizing = _Sizing(a, r0, h, nt)
    q = domain.ray_exit(a)
    L = float(np.hypot(*(q - a)))

    # structured patch --------------------------------------------------
    t = 2 * math.pi * np.arange(nt + 1) / nt
    ring_r = r0 * GRADING_RATIO ** np.arange(depth + 1)
    circ = np.stack([np.cos(t), np.sin(t)], axis=1)
    circ[nt] = circ[0]
    patch = a + ring_r[:, None, None] * circ[None]
    pid = 1 + np.arange((depth + 1) * (nt + 1)).reshape(depth + 1, nt + 1)
    verts = [a[None], patch.reshape(-1, 2)]
    tris = []
    for j in range(depth):
        o, i = pid[j], pid[j + 1]
        for k in range(nt):
            tris.append((i[k], o[k], o[k + 1]))
            tris.append((i[k], o[k + 1], i[k + 1]))
    for k in range(nt):
        tris.append((0, pid[depth, k], pid[depth, k + 1]))
    n_patch = 1 + pid.size

    # far field point cloud ----------------------------------------------
    ring0 = patch[0, :nt]
    cut_r = sizing.radii(r0, L)
    if len(cut_r) and L - cut_r[-1] < 0.5 * sizing(q)[0]:
        cut_r = cut_r[:-1]
    pieces, bparams = _boundary_params(domain, q, sizing)
    far_r = float(np.max(np.hypot(*(np.array([_boundary_point(pieces, p) for p in bparams]) - a).T)))
    fill = []
    for k, r in enumerate(sizing.radii(r0, far_r + h)):
        hr = sizing(a + np.array([r, 0.0]))[0]
        n = max(nt, int(math.ceil(2 * math.pi * r / hr)))
        ang = 2 * math.pi * (np.arange(n) + 0.5 * (k % 2)) / n
        fill.append(a + r * np.stack([np.cos(ang), np.sin(ang)], axis=1))
    fill = np.vstack(fill) if fill else np.zeros((0, 2))
    hf = sizing(fill)
    keep = domain.contains(fill)
    keep &= domain.distance_to_boundary(fill) >= _CLEAR * hf
    keep &= _dist_to_segment(fill, a, q) >= _CLEAR * hf
    keep &= np.hypot(*(fill - a).T) >= r0 + _CLEAR * hf
    fill = fill[keep]

    bparams, cut_r, fill = _gabriel_cleanup(pieces, bparams, cut_r, a, ring0, fill)
    bpts = np.array([_boundary_point(pieces, p) for p in bparams])
    cpts = a + np.outer(cut_r, [1.0, 0.0])
    nr, nc, nb = nt, len(cpts), len(bpts)
    P = np.vstack([ring0, cpts, bpts, fill])
    kind = np.r_[np.zeros(nr), np.ones(nc), 2 * np.ones(nb), 3 * np.ones(len(fill))].astype(int)

    dl = Delaunay(P)
    T = dl.simplices.copy()
    ar = signed_areas(P, T)
    T[ar < 0] = T[ar < 0][:, [0, 2, 1]]
    ar = np.abs(ar)
    drop = np.all(kind[T] == 0, axis=1)
    drop |= ar < 1e-10 * sizing(P[T].mean(axis=1)) ** 2
    drop |= ~domain.contains(P[T].mean(axis=1))
    T = T[~drop]

    # global ids: ring0 -> patch ring 0, others appended
    gid = np.empty(len(P), dtype=np.int64)
    gid[:nr] = pid[0, :nr]
    gid[nr:] = n_patch + np.arange(len(P) - nr)
    # cut nodes of the far field: ring0[0], cut points, q (= boundary point 0)
    far_cut = np.r_[0, nr + np.arange(nc), nr + nc]
    n_all = n_patch + len(P) - nr
    minus = {0: pid[0, nt]}
    for m, f in enumerate(far_cut[1:]):
        minus[int(f)] = n_all + m
    is_cut = np.zeros(len(P), dtype=bool)
    is_cut[far_cut] = True
    side = np.where(is_cut[T], 0.0, P[T][:, :, 1] - a[1]).sum(axis=1)
    below = np.any(is_cut[T], axis=1) & (side < 0)
    GT = gid[T]
    for r in np.nonzero(below)[0]:
        for c in range(3):
            if is_cut[T[r, c]]:
                GT[r, c] = minus[int(T[r, c])]
    _check_constrained_edges(T, nr, nc, nb)

    vertices = np.vstack(verts + [P[nr:], P[far_cut[1:]]])
    triangles = np.vstack([np.array(tris, dtype=np.int64), GT])
    cut_pairs = np.array(
        [(pid[j, 0], pid[j, nt]) for j in range(depth, -1, -1)]
        + [(gid[f], minus[int(f)]) for f in far_cut[1:]], dtype=np.int64)
    return _finalize(vertices, triangles, cut_pairs, 0, domain, ref,
                     h_pole=float(ring_r[-1]))


def _check_constrained_edges(T, nr, nc, nb):
    e = np.sort(np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
    have = set(map(tuple, e))
    ring = [(k, (k + 1) % nr) for k in range(nr)]
    seq = [0] + list(range(nr, nr + nc)) + [nr + nc]
    cut = list(zip(seq[:-1], seq[1:]))
    b0 = nr + nc
    bnd = [(b0 + k, b0 + (k + 1) % nb) for k in range(nb)]
    missing = [s for s in ring + cut + bnd if tuple(sorted(s)) not in have]
    if missing:
        raise MeshQualityError(f"{len(missing)} constrained edges lost in triangulation")


def _finalize(vertices, triangles, cut_pairs, pole_index, domain, ref, h_pole):
    ar = signed_areas(vertices, triangles)
    if np.any(ar <= 0):
        raise MeshQualityError(f"{int(np.sum(ar <= 0))} triangles with non-positive area")
    edges, normals = boundary_edges_from_triangles(vertices, triangles, cut_pairs, pole_index)
    theta = node_angles(vertices, triangles, pole_index, cut_pairs[0, 0])
    return CutMesh(vertices=vertices, triangles=triangles, boundary_edges=edges,
                   boundary_normals=normals, cut_pairs=cut_pairs, pole_index=pole_index,
                   theta=theta, domain=domain, refinement=ref, h_pole=h_pole)


def morph_mesh(m: CutMesh, a, c: CutoffSpec) -> CutMesh:
    """Move the pole of ``m`` from the cut-off centre to ``centre + a`` by the map Phi_a."""
    if np.hypot(*(m.pole - np.asarray(c.center))) > 1e-12:
        raise ConsistencyError("mesh pole must coincide with the cut-off centre")
    v = phi_a(a, c, m.vertices)
    ar = signed_areas(v, m.triangles)
    if np.any(ar <= 0):
        raise MeshQualityError("morph inverted a triangle")
    theta = node_angles(v, m.triangles, m.pole_index, m.cut_pairs[0, 0])
    return CutMesh(vertices=v, triangles=m.triangles, boundary_edges=m.boundary_edges,
                   boundary_normals=m.boundary_normals, cut_pairs=m.cut_pairs,
                   pole_index=m.pole_index, theta=theta, domain=m.domain,
                   refinement=m.refinement, h_pole=m.h_pole, grading_ratio=m.grading_ratio)
