"""Parameter studies of lambda_k(a, alpha): paths, grids and behavioural checks."""
from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from .eigensolver import DEFAULT_RTOL_CLUSTER, detect_multiplicity, solve_eigs
from .errors import ABError, ContractError, GeometryError
from .geometry import DomainSpec, PoleFluxParams
from .mesh import RefinementSpec, build_mesh
from .operator import assemble_branch_cut

WORKERS_ENV = "ABEIGEN_WORKERS"


@dataclass
class SweepRecord:
    index: int
    a: tuple
    alpha: float
    lambdas: list
    clusters: list
    fingerprint: str
    wall_time: float
    nodal: list = None
    error: str = None

    def to_dict(self):
        return {"index": self.index, "a": list(self.a), "alpha": self.alpha,
                "lambdas": self.lambdas, "clusters": self.clusters,
                "fingerprint": self.fingerprint, "wall_time": self.wall_time,
                "nodal": self.nodal, "error": self.error}

    @classmethod
    def from_dict(cls, d):
        return cls(index=d["index"], a=tuple(d["a"]), alpha=d["alpha"], lambdas=d["lambdas"],
                   clusters=d["clusters"], fingerprint=d["fingerprint"],
                   wall_time=d["wall_time"], nodal=d.get("nodal"), error=d.get("error"))


@dataclass
class SweepPlan:
    """Ordered parameter points ``(a, alpha)`` to solve on one domain."""

    domain: DomainSpec
    points: list
    k: int = 6
    refinement: RefinementSpec = field(default_factory=RefinementSpec)
    analyses: tuple = ()
    rtol_cluster: float = DEFAULT_RTOL_CLUSTER

    def __post_init__(self):
        self.points = [(tuple(float(v) for v in a), float(al)) for a, al in self.points]

    def validate(self):
        margin = 2 * self.refinement.h_max
        for a, _ in self.points:
            if not self.domain.contains(np.array(a)):
                raise GeometryError(f"pole {a} is outside the domain")
            if self.domain.distance_to_boundary(np.array(a)) <= margin:
                raise GeometryError(f"pole {a} is within 2*h_max of the boundary")

    # constructors ----------------------------------------------------
    @classmethod
    def line(cls, domain, a0, a1, n_steps, alpha=0.5, **kw):
        s = np.linspace(0.0, 1.0, n_steps + 1)
        a0, a1 = np.asarray(a0, float), np.asarray(a1, float)
        return cls(domain, [(a0 + t * (a1 - a0), alpha) for t in s], **kw)

    @classmethod
    def alpha_path(cls, domain, a, alphas, **kw):
        return cls(domain, [(a, al) for al in alphas], **kw)

    @classmethod
    def grid(cls, domain, center, alpha0, rho_a, rho_alpha, n, include_center=True, **kw):
        ax = np.linspace(-rho_a, rho_a, n) if n > 1 else np.zeros(1)
        al = np.linspace(-rho_alpha, rho_alpha, n) if n > 1 else np.zeros(1)
        pts = []
        for x in ax:
            for y in ax:
                for t in al:
                    if not include_center and x == 0 and y == 0 and t == 0:
                        continue
                    pts.append(((center[0] + x, center[1] + y), alpha0 + t))
        if include_center and n % 2 == 0:
            pts.append(((center[0], center[1]), alpha0))
        return cls(domain, pts, **kw)


def _point_key(domain, a, alpha, k, ref, analyses):
    s = json.dumps([domain.to_dict(), [round(v, 14) for v in a], round(alpha, 14), k,
                    ref.to_dict(), list(analyses)], sort_keys=True)
    return hashlib.sha1(s.encode()).hexdigest()[:20]


def solve_point(domain, a, alpha, k, ref=RefinementSpec(), analyses=(), index=0,
                rtol_cluster=DEFAULT_RTOL_CLUSTER):
    """Build a mesh at pole ``a`` and return the first ``k`` eigenvalues as a record."""
    t0 = time.perf_counter()
    key = _point_key(domain, a, alpha, k, ref, analyses)
    try:
        mesh = build_mesh(domain, a, ref)
        pen = assemble_branch_cut(mesh, PoleFluxParams(a, alpha))
        b = solve_eigs(pen, k, rtol_cluster=rtol_cluster)
        nodal = None
        if "nodal" in analyses and float(alpha) % 1.0 == 0.5:
            from .gauge import k_real_project
            from .perturbation import nodal_data_for
            nodal = []
            for c in b.clusters:
                kb = k_real_project(pen, b.vectors[:, c])
                nodal.append([n.to_dict() for n in nodal_data_for(pen, kb.vectors)])
        return SweepRecord(index, tuple(map(float, a)), float(alpha),
                           [float(x) for x in b.lambdas], b.clusters, key,
                           time.perf_counter() - t0, nodal)
    except ABError as exc:
        return SweepRecord(index, tuple(map(float, a)), float(alpha), [], [], key,
                           time.perf_counter() - t0, None, f"{type(exc).__name__}: {exc}")


def _solve_task(args):
    return solve_point(*args)


def _load_cache(path):
    cache = {}
    if path and os.path.exists(path):
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    rec = SweepRecord.from_dict(json.loads(line))
                    if rec.error is None:
                        cache[rec.fingerprint] = rec
    return cache


def sweep(plan: SweepPlan, workers=None, cache_path=None):
    """Solve every plan point; failures are recorded and the sweep continues.

    Results come back in plan order. ``workers`` defaults to the
    ``ABEIGEN_WORKERS`` environment variable (1 if unset). With ``cache_path``
    set, records are appended there as JSON lines and reused on re-runs.
    """
    plan.validate()
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    cache = _load_cache(cache_path)
    tasks, out = [], [None] * len(plan.points)
    for i, (a, al) in enumerate(plan.points):
        key = _point_key(plan.domain, a, al, plan.k, plan.refinement, plan.analyses)
        if key in cache:
            rec = cache[key]
            rec.index = i
            out[i] = rec
        else:
            tasks.append((plan.domain, a, al, plan.k, plan.refinement, plan.analyses, i,
                          plan.rtol_cluster))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            fresh = list(ex.map(_solve_task, tasks))
    else:
        fresh = [_solve_task(t) for t in tasks]
    for rec in fresh:
        out[rec.index] = rec
    if cache_path and fresh:
        with open(cache_path, "a") as fh:
            for rec in fresh:
                if rec.error is None:
                    fh.write(json.dumps(rec.to_dict()) + "\n")
    return out


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

@contextlib.contextmanager
def _sink(target):
    """Open ``target`` for writing unless it is already a text stream."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_jsonl(records, path):
    with _sink(path) as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def write_csv(records, path):
    k = max((len(r.lambdas) for r in records), default=0)
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(["index", "a1", "a2", "alpha"] + [f"lambda{j + 1}" for j in range(k)])
        for r in records:
            w.writerow([r.index, r.a[0], r.a[1], r.alpha] + r.lambdas + [""] * (k - len(r.lambdas)))


def write_long_csv(records, path):
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(["index", "a1", "a2", "alpha", "k", "lambda", "cluster_size"])
        for r in records:
            size = {j: len(c) for c in r.clusters for j in c}
            for j, lam in enumerate(r.lambdas):
                w.writerow([r.index, r.a[0], r.a[1], r.alpha, j + 1, lam, size.get(j, 1)])


# ---------------------------------------------------------------------------
# behavioural checks
# ---------------------------------------------------------------------------

def max_jumps(records):
    """Largest |lambda_k(p_{i+1}) - lambda_k(p_i)| along a path, per k."""
    L = np.array([r.lambdas for r in records if r.error is None])
    if len(L) < 2:
        return np.zeros(L.shape[1] if L.ndim == 2 else 0)
    return np.max(np.abs(np.diff(L, axis=0)), axis=0)


def dirichlet_eigenvalues(domain: DomainSpec, k):
    """Analytic Dirichlet Laplacian eigenvalues for the disk and the square."""
    if domain.kind == "square":
        n = int(math.ceil(math.sqrt(k))) + 3
        vals = sorted(math.pi ** 2 * (i * i + j * j) / domain.side ** 2
                      for i in range(1, n + 1) for j in range(1, n + 1))
        return np.array(vals[:k])
    if domain.kind == "disk":
        vals = []
        for nu in range(0, k + 2):
            zs = bessel_zeros(nu, k)
            vals += [z * z for z in zs] * (1 if nu == 0 else 2)
        return np.array(sorted(vals)[:k]) / domain.radius ** 2
    raise GeometryError("no closed-form Dirichlet spectrum for this domain")


def bessel_zeros(nu, n):
    """First ``n`` positive zeros of J_nu by bracketing on a fine grid."""
    out = []
    x = np.linspace(1e-6, n * math.pi + nu + 10, 20000 * (n + 1))
    f = jv(nu, x)
    idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
    for i in idx[:n]:
        out.append(brentq(lambda t: jv(nu, t), x[i], x[i + 1], xtol=1e-14))
    return out


@dataclass
class BoundaryLimitTable:
    distances: list
    lambdas: list
    dirichlet: float
    deviations: list
    monotone: bool
    extrapolated: float

    def to_dict(self):
        return self.__dict__.copy()


def boundary_limit_check(domain, alpha, boundary_point, distances, k=1, ref=RefinementSpec(),
                         direction=None):
    """Eigenvalue ``lambda_k`` for poles approaching a boundary point.

    The pole sits at ``boundary_point - d * n`` with ``n`` the outward normal.
    The mesh size is reduced when needed so that ``d > 2 h_max``. The limit is
    extrapolated assuming ``lambda(d) = L + C d^2`` from the two closest poles.
    """
    bp = np.asarray(boundary_point, float)
    n = np.asarray(direction if direction is not None else domain.outward_normal(bp), float)
    n = n / np.hypot(*n)
    lam = []
    for d in distances:
        h = min(ref.h_max, d / 2.2)
        r = RefinementSpec(h, ref.pole_depth, ref.order, ref.n_theta)
        a = bp - d * n
        mesh = build_mesh(domain, a, r)
        pen = assemble_branch_cut(mesh, PoleFluxParams(a, alpha))
        lam.append(float(solve_eigs(pen, k).lambdas[k - 1]))
    try:
        ref_val = float(dirichlet_eigenvalues(domain, k)[k - 1])
    except GeometryError:
        ref_val = float("nan")
    order = np.argsort(distances)[::-1]
    seq = np.array(lam)[order]
    diffs = np.diff(seq - ref_val) if np.isfinite(ref_val) else np.diff(seq)
    monotone = bool(np.all(np.abs(seq[1:] - ref_val) <= np.abs(seq[:-1] - ref_val))) \
        if np.isfinite(ref_val) else bool(np.all(diffs <= 0) or np.all(diffs >= 0))
    ds = np.asarray(distances, float)[order]
    if len(ds) >= 2:
        d1, d2 = ds[-1], ds[-2]
        l1, l2 = seq[-1], seq[-2]
        extrap = float((l1 * d2 ** 2 - l2 * d1 ** 2) / (d2 ** 2 - d1 ** 2))
    else:
        extrap = float(seq[-1])
    dev = [abs(x - ref_val) / ref_val for x in lam]
    return BoundaryLimitTable(list(map(float, distances)), lam, ref_val, dev, monotone, extrap)


@dataclass
class IsolationResult:
    verdict: str
    gaps: np.ndarray
    offsets: np.ndarray
    center_gap: float
    min_gap: float
    kappa_min: float
    cone_slope: float
    records: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"verdict": self.verdict, "center_gap": self.center_gap,
                "min_gap": self.min_gap, "kappa_min": self.kappa_min,
                "cone_slope": self.cone_slope,
                "gaps": self.gaps.tolist(), "offsets": self.offsets.tolist()}


def isolation_check(domain, center=(0.0, 0.0), alpha0=0.5, rho_a=0.05, rho_alpha=0.05, n=5,
                    cluster=(0, 1), ref=RefinementSpec(), conditions_hold=True, workers=None,
                    cache_path=None):
    """Gap ``lambda_{j+1} - lambda_j`` on a punctured (a1, a2, alpha) grid.

    Verdict "isolated" requires the smallest punctured gap to exceed three
    times the discretization gap at the centre and the ratio gap / distance to
    stay positive; ``cone_slope`` is the least-squares slope of gap against
    the distance ``sqrt(|a - center|^2 + (alpha - alpha0)^2)``.
    """
    plan = SweepPlan.grid(domain, center, alpha0, rho_a, rho_alpha, n, include_center=True,
                          k=max(cluster) + 1, refinement=ref)
    offs = np.array([(a[0] - center[0], a[1] - center[1], al - alpha0) for a, al in plan.points])
    dist = np.linalg.norm(offs, axis=1)
    if np.all(dist == 0):
        raise ContractError("isolation grid contains only the centre point")
    recs = sweep(plan, workers=workers, cache_path=cache_path)
    j, k = cluster
    gaps = np.array([r.lambdas[k] - r.lambdas[j] if r.error is None else np.nan for r in recs])
    c = dist == 0
    center_gap = float(gaps[c][0]) if np.any(c) else 0.0
    punct = ~c
    g, dd = gaps[punct], dist[punct]
    min_gap = float(np.nanmin(g))
    kappa = float(np.nanmin(g / dd))
    slope = float(np.nansum(g * dd) / np.nansum(dd * dd))
    if not conditions_hold:
        verdict = "theorem not applicable"
    elif min_gap > 3 * center_gap and kappa > 0:
        verdict = "isolated"
    else:
        verdict = "not isolated"
    return IsolationResult(verdict, gaps, offs, center_gap, min_gap, kappa, slope, recs)


__all__ = [
    "SweepPlan", "SweepRecord", "sweep", "solve_point", "write_jsonl", "write_csv",
    "write_long_csv", "max_jumps", "boundary_limit_check", "isolation_check",
    "dirichlet_eigenvalues", "bessel_zeros", "IsolationResult", "BoundaryLimitTable",
    "detect_multiplicity",
]
