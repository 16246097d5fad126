"""Planar domains, the Aharonov-Bohm potential and the pole-moving map.

All point arguments accept either a single point of shape ``(2,)`` or an
array of points of shape ``(n, 2)``; the result has the matching leading shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, OutOfRangeError, SingularPointError

TWO_PI = 2.0 * math.pi

# relative distance below which x is considered to coincide with the pole
_SINGULAR_TOL = 1e-14


def _as_points(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def _ret(v, single):
    return v[0] if single else v


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    p0: np.ndarray
    p1: np.ndarray

    def point(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return (1.0 - s) * self.p0 + s * self.p1

    @property
    def length(self):
        return float(np.hypot(*(self.p1 - self.p0)))


@dataclass(frozen=True)
class Arc:
    center: np.ndarray
    radius: float
    t0: float
    t1: float  # t1 > t0, counter-clockwise

    def point(self, s):
        t = self.t0 + np.asarray(s, dtype=float) * (self.t1 - self.t0)
        return self.center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    @property
    def length(self):
        return self.radius * (self.t1 - self.t0)


@dataclass(frozen=True)
class DomainSpec:
    """A simply connected planar domain.

    ``kind`` is one of ``"disk"``, ``"square"``, ``"sector"`` or ``"polygon"``.
    The disk and the square are centred at the origin; the sector has its
    vertex at the origin and is symmetric about the positive x1 axis.
    """

    kind: str
    radius: float = 1.0
    side: float = 1.0
    aperture: float = math.pi / 4
    vertices: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("disk", "square", "sector", "polygon"):
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if not (self.radius > 0 and self.side > 0):
            raise GeometryError("domain lengths must be positive")
        if self.kind == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
                raise GeometryError("polygon needs at least three (x, y) vertices")
            if _polygon_area(v) < 0:
                v = v[::-1]
            if not _is_simple(v):
                raise GeometryError("polygon boundary is not simple")
            object.__setattr__(self, "vertices", tuple(map(tuple, v)))
        if self.kind == "sector" and not 0 < self.aperture < math.pi:
            raise GeometryError("sector aperture must lie in (0, pi)")

    # constructors -------------------------------------------------------
    @classmethod
    def disk(cls, radius=1.0):
        return cls("disk", radius=float(radius))

    @classmethod
    def square(cls, side=1.0):
        return cls("square", side=float(side))

    @classmethod
    def sector(cls, aperture=math.pi / 4, radius=1.0):
        return cls("sector", radius=float(radius), aperture=float(aperture))

    @classmethod
    def polygon(cls, vertices):
        return cls("polygon", vertices=tuple(map(tuple, np.asarray(vertices, float))))

    def to_dict(self):
        if self.kind == "disk":
            return {"kind": "disk", "radius": self.radius}
        if self.kind == "square":
            return {"kind": "square", "side": self.side}
        if self.kind == "sector":
            return {"kind": "sector", "aperture": self.aperture, "radius": self.radius}
        return {"kind": "polygon", "vertices": [list(v) for v in self.vertices]}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        if kind == "polygon":
            return cls.polygon(d["vertices"])
        return cls(kind, **d)

    # geometry -----------------------------------------------------------
    def corners(self):
        """Vertices of the polygonal part of the boundary (CCW)."""
        if self.kind == "square":
            h = self.side / 2
            return np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
        if self.kind == "polygon":
            return np.asarray(self.vertices, dtype=float)
        if self.kind == "sector":
            b = self.aperture / 2
            r = self.radius
            return np.array([[0.0, 0.0], [r * math.cos(b), -r * math.sin(b)],
                             [r * math.cos(b), r * math.sin(b)]])
        return np.zeros((0, 2))

    def pieces(self):
        """Boundary as a CCW list of segments and arcs."""
        if self.kind == "disk":
            return [Arc(np.zeros(2), self.radius, 0.0, TWO_PI)]
        if self.kind == "sector":
            c = self.corners()
            b = self.aperture / 2
            return [Segment(c[0], c[1]), Arc(np.zeros(2), self.radius, -b, b),
                    Segment(c[2], c[0])]
        c = self.corners()
        return [Segment(c[i], c[(i + 1) % len(c)]) for i in range(len(c))]

    @property
    def area(self):
        if self.kind == "disk":
            return math.pi * self.radius ** 2
        if self.kind == "square":
            return self.side ** 2
        if self.kind == "sector":
            return 0.5 * self.aperture * self.radius ** 2
        return _polygon_area(self.corners())

    @property
    def bounding_radius(self):
        """Radius of a disk centred at the origin containing the domain."""
        if self.kind in ("disk", "sector"):
            return self.radius
        return float(np.max(np.hypot(*self.corners().T)))

    def contains(self, x):
        """Strict interior test."""
        p, single = _as_points(x)
        if self.kind == "disk":
            inside = np.hypot(p[:, 0], p[:, 1]) < self.radius
        elif self.kind == "square":
            h = self.side / 2
            inside = (np.abs(p[:, 0]) < h) & (np.abs(p[:, 1]) < h)
        elif self.kind == "sector":
            b = self.aperture / 2
            r = np.hypot(p[:, 0], p[:, 1])
            inside = (r < self.radius) & (p[:, 0] > 0) & \
                (np.abs(p[:, 1]) < p[:, 0] * math.tan(b))
        else:
            inside = _point_in_polygon(p, self.corners()) & \
                (self.distance_to_boundary(p) > 0)
        return _ret(inside, single)

    def distance_to_boundary(self, x):
        """Euclidean distance to the boundary curve (unsigned)."""
        p, single = _as_points(x)
        if self.kind == "disk":
            d = np.abs(self.radius - np.hypot(p[:, 0], p[:, 1]))
        else:
            d = np.full(len(p), np.inf)
            for pc in self.pieces():
                if isinstance(pc, Segment):
                    d = np.minimum(d, _dist_to_segment(p, pc.p0, pc.p1))
                else:
                    d = np.minimum(d, _dist_to_arc(p, pc))
        return _ret(d, single)

    def outward_normal(self, x):
        """Exact outward unit normal at boundary points (nearest boundary piece)."""
        p, single = _as_points(x)
        best = np.full(len(p), np.inf)
        nrm = np.zeros_like(p)
        for pc in self.pieces():
            if isinstance(pc, Segment):
                d = _dist_to_segment(p, pc.p0, pc.p1)
                t = pc.p1 - pc.p0
                n = np.array([t[1], -t[0]]) / np.hypot(*t)
                cand = np.broadcast_to(n, p.shape)
            else:
                d = _dist_to_arc(p, pc)
                v = p - pc.center
                cand = v / np.hypot(v[:, 0], v[:, 1])[:, None]
            upd = d < best
            best[upd] = d[upd]
            nrm[upd] = cand[upd]
        return _ret(nrm, single)

    def project_to_boundary(self, x):
        """Snap points lying (approximately) on an arc back onto it."""
        p, single = _as_points(x)
        out = p.copy()
        for pc in self.pieces():
            if isinstance(pc, Arc):
                v = p - pc.center
                r = np.hypot(v[:, 0], v[:, 1])
                near = np.abs(r - pc.radius) < 1e-3 * pc.radius
                if self.kind == "sector":
                    near &= p[:, 0] > 0
                out[near] = pc.center + pc.radius * v[near] / r[near, None]
        return _ret(out, single)

    def ray_exit(self, a, direction=(1.0, 0.0)):
        """First boundary point hit by the ray from ``a`` along ``direction``."""
        a = np.asarray(a, dtype=float)
        e = np.asarray(direction, dtype=float)
        e = e / np.hypot(*e)
        best = np.inf
        for pc in self.pieces():
            if isinstance(pc, Segment):
                t = _ray_segment(a, e, pc.p0, pc.p1)
            else:
                t = _ray_arc(a, e, pc)
            if t is not None and 1e-14 < t < best:
                best = t
        if not np.isfinite(best):
            raise GeometryError("ray from the pole does not meet the boundary")
        return a + best * e

    def inradius_at_origin(self):
        """Distance from the origin to the boundary (0 if origin not interior)."""
        if not self.contains(np.zeros(2)):
            return 0.0
        return float(self.distance_to_boundary(np.zeros(2)))


def _polygon_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _is_simple(v):
    n = len(v)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                return False
    return True


def _point_in_polygon(p, v):
    x, y = p[:, 0], p[:, 1]
    inside = np.zeros(len(p), dtype=bool)
    n = len(v)
    for i in range(n):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % n]
        cond = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= cond & (x < xc)
    return inside


def _dist_to_segment(p, a, b):
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(p - proj).T)


def _dist_to_arc(p, arc):
    v = p - arc.center
    ang = np.arctan2(v[:, 1], v[:, 0])
    # bring angle into [t0, t0 + 2pi)
    ang = arc.t0 + np.mod(ang - arc.t0, TWO_PI)
    on = ang <= arc.t1
    r = np.hypot(v[:, 0], v[:, 1])
    d_on = np.abs(r - arc.radius)
    e0, e1 = arc.point(0.0), arc.point(1.0)
    d_end = np.minimum(np.hypot(*(p - e0).T), np.hypot(*(p - e1).T))
    return np.where(on, d_on, d_end)


def _ray_segment(a, e, p0, p1):
    d = p1 - p0
    m = np.array([[e[0], -d[0]], [e[1], -d[1]]])
    det = np.linalg.det(m)
    if abs(det) < 1e-15:
        return None
    t, s = np.linalg.solve(m, p0 - a)
    if -1e-12 <= s <= 1 + 1e-12 and t > 0:
        return float(t)
    return None


def _ray_arc(a, e, arc):
    f = a - arc.center
    b = f @ e
    c = f @ f - arc.radius ** 2
    disc = b * b - c
    if disc < 0:
        return None
    best = None
    for t in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
        if t <= 0:
            continue
        q = a + t * e - arc.center
        ang = arc.t0 + (math.atan2(q[1], q[0]) - arc.t0) % TWO_PI
        if ang <= arc.t1 + 1e-12 and (best is None or t < best):
            best = t
    return best


# ---------------------------------------------------------------------------
# pole, flux and the AB potential
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoleFluxParams:
    a: tuple
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def pole(self):
        return np.asarray(self.a, dtype=float)


def _offsets(a, x):
    p, single = _as_points(x)
    d = p - np.asarray(a, dtype=float)
    r2 = d[:, 0] ** 2 + d[:, 1] ** 2
    scale = max(1.0, float(np.max(np.abs(p)))) if len(p) else 1.0
    if np.any(r2 <= (_SINGULAR_TOL * scale) ** 2):
        raise SingularPointError("evaluation point coincides with the pole")
    return d, r2, single


def ab_potential(p: PoleFluxParams, x):
    """alpha * (-(x2 - a2), x1 - a1) / |x - a|^2."""
    d, r2, single = _offsets(p.a, x)
    A = p.alpha * np.stack([-d[:, 1], d[:, 0]], axis=1) / r2[:, None]
    return _ret(A, single)


def ab_potential_jacobian(p: PoleFluxParams, x):
    """Analytic derivative dA_i/dx_j, shape (..., 2, 2)."""
    d, r2, single = _offsets(p.a, x)
    u, v = d[:, 0], d[:, 1]
    r4 = r2 ** 2
    J = np.empty((len(d), 2, 2))
    # A1 = -v / r2, A2 = u / r2
    J[:, 0, 0] = 2 * u * v / r4
    J[:, 0, 1] = -1 / r2 + 2 * v * v / r4
    J[:, 1, 0] = 1 / r2 - 2 * u * u / r4
    J[:, 1, 1] = -2 * u * v / r4
    return _ret(p.alpha * J, single)


def polar_angle(a, x):
    """Angle of x - a in [0, 2 pi), measured from the ray {x2 = a2, x1 > a1}."""
    d, _, single = _offsets(a, x)
    t = np.mod(np.arctan2(d[:, 1], d[:, 0]), TWO_PI)
    # arctan2 can round up to exactly 2 pi after the modulo
    t = np.where(t >= TWO_PI, 0.0, t)
    return _ret(t, single)


# ---------------------------------------------------------------------------
# cut-off and the perturbation map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffSpec:
    """Radial cut-off equal to 1 on D_rbar(center) and 0 outside D_2rbar(center).

    The transition is the quintic smoothstep, so the profile is C^2 and its
    slope never exceeds 15 / (8 rbar).
    """

    rbar: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.rbar > 0:
            raise OutOfRangeError("rbar must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def for_domain(cls, domain: DomainSpec, center=(0.0, 0.0)):
        """Default rbar = 0.25 * dist(center, boundary)."""
        dist = float(domain.distance_to_boundary(np.asarray(center, float)))
        if not domain.contains(np.asarray(center, float)) or dist <= 0:
            raise GeometryError("cut-off centre must be interior to the domain")
        return cls(0.25 * dist, center)

    @property
    def invertibility_radius(self):
        return self.rbar / 32.0


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s * s)


def _profile(c: CutoffSpec, r):
    """xi as a function of the radius, with first and second radial derivatives."""
    s = (r - c.rbar) / c.rbar
    inside = (s > 0) & (s < 1)
    sc = np.clip(s, 0.0, 1.0)
    val = 1.0 - _smoothstep(s)
    d1 = np.where(inside, -30 * sc ** 2 * (1 - sc) ** 2 / c.rbar, 0.0)
    d2 = np.where(inside, -60 * sc * (1 - sc) * (1 - 2 * sc) / c.rbar ** 2, 0.0)
    return val, d1, d2


def cutoff_xi(c: CutoffSpec, x):
    p, single = _as_points(x)
    r = np.hypot(*(p - np.asarray(c.center)).T)
    return _ret(_profile(c, r)[0], single)


def cutoff_grad(c: CutoffSpec, x):
    p, single = _as_points(x)
    d = p - np.asarray(c.center)
    r = np.hypot(d[:, 0], d[:, 1])
    _, d1, _ = _profile(c, r)
    safe = np.where(r > 0, r, 1.0)
    g = np.where((r > 0)[:, None], d1[:, None] * d / safe[:, None], 0.0)
    return _ret(g, single)


def cutoff_hessian(c: CutoffSpec, x):
    p, single = _as_points(x)
    d = p - np.asarray(c.center)
    r = np.hypot(d[:, 0], d[:, 1])
    _, d1, d2 = _profile(c, r)
    safe = np.where(r > 0, r, 1.0)
    e = d / safe[:, None]
    eye = np.eye(2)[None]
    outer = e[:, :, None] * e[:, None, :]
    H = d2[:, None, None] * outer + (d1 / safe)[:, None, None] * (eye - outer)
    H[r == 0] = 0.0
    return _ret(H, single)


def _check_pole_range(a, c: CutoffSpec):
    a = np.asarray(a, dtype=float)
    if np.hypot(*a) >= c.invertibility_radius:
        raise OutOfRangeError(
            f"|a| = {np.hypot(*a):.3g} must stay below rbar/32 = {c.invertibility_radius:.3g}")
    return a


def phi_a(a, c: CutoffSpec, x):
    """x + a * xi(x); maps the cut-off centre to centre + a."""
    a = _check_pole_range(a, c)
    p, single = _as_points(x)
    return _ret(p + cutoff_xi(c, p)[:, None] * a, single)


def jacobian_det(a, c: CutoffSpec, x):
    """det(I + a (x) grad xi) = 1 + a . grad xi."""
    a = _check_pole_range(a, c)
    p, single = _as_points(x)
    return _ret(1.0 + cutoff_grad(c, p) @ a, single)
