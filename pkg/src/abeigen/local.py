"""Leading coefficients of a K-real eigenfunction at the pole.

Near the pole a half-flux eigenfunction expands as

    u = exp(i t / 2) * sum_{h odd} r^{h/2} (c_h cos(h t / 2) + d_h sin(h t / 2)) (1 + O(r^2)),

and its nodal set consists of ``h`` curves ending at the pole, with ``h`` the
lowest harmonic carrying nonzero coefficients.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import AccuracyError, FitError

HARMONICS = (1, 3, 5)
# coefficients below this fraction of m count as zero when fixing the sign
SIGN_TOL = 1e-8


@dataclass(frozen=True)
class NodalData:
    c: float
    d: float
    m: float
    angle: float
    h: int
    fit_residual: float
    c_raw: float = 0.0
    d_raw: float = 0.0

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in asdict(self).items()}

    @property
    def nodal_direction(self):
        """Direction in which the nodal line leaves the pole (h = 1)."""
        return (self.angle + math.pi) % (2 * math.pi)


def polar_form(c, d):
    """(m, alpha_j) with c = m cos(alpha_j / 2), d = m sin(alpha_j / 2) up to a common sign."""
    m = math.hypot(c, d)
    ang = (2.0 * math.atan2(d, c)) % (2 * math.pi) if m > 0 else 0.0
    return m, (0.0 if ang >= 2 * math.pi else ang)


def fit_circle(u, a, r, n_angles=64):
    """Harmonic coefficients of ``exp(-i t / 2) u`` on the circle of radius ``r``.

    Returns ``(coef, residual)`` where ``coef[h] = (C_h, D_h)`` are the raw
    Fourier weights (including the factor ``r^{h/2}``).
    """
    t = 2 * math.pi * (np.arange(n_angles) + 0.5) / n_angles
    pts = np.asarray(a, float) + r * np.stack([np.cos(t), np.sin(t)], axis=1)
    g = np.exp(-0.5j * t) * np.asarray(u(pts))
    B = np.hstack([np.stack([np.cos(h * t / 2), np.sin(h * t / 2)], axis=1) for h in HARMONICS])
    sol, *_ = np.linalg.lstsq(B, g.real, rcond=None)
    fit = B @ sol
    den = np.linalg.norm(g)
    res = float(np.linalg.norm(g - fit) / den) if den > 0 else 0.0
    coef = {h: sol[2 * i:2 * i + 2] for i, h in enumerate(HARMONICS)}
    return coef, res


def canonical_sign(c, d, tol=0.0):
    """Sign making the first nonzero of (c, d) positive."""
    if abs(c) > tol:
        return 1.0 if c > 0 else -1.0
    if abs(d) > tol:
        return 1.0 if d > 0 else -1.0
    return 1.0


def _extrapolate(radii, lead):
    """Leading coefficient at r -> 0 from per-radius estimates.

    The discrete field near the pole behaves like a tiny Dirichlet hole, which
    adds a relative error proportional to 1 / r; the analytic remainder is
    O(r^2). Two radii eliminate the 1 / r term; three or more fit both.
    """
    r = np.asarray(radii, dtype=float)
    cols = [np.ones_like(r), 1.0 / r]
    if len(r) >= 3:
        cols.append(r ** 2)
    A = np.stack(cols, axis=1)
    sol, *_ = np.linalg.lstsq(A, np.asarray(lead), rcond=None)
    return sol[0]


def extract_nodal_coeffs(u, a, radii, n_angles=64, graded_radius=None, max_residual=0.1,
                         h_energy=0.5):
    """Fit the leading coefficients (c, d) from samples on circles about ``a``.

    ``u`` is a callable returning complex values at points and ``radii`` holds
    at least two distinct radii. Each circle gives ``C_1(r) / sqrt(r)``; these
    are extrapolated to r = 0 (see ``_extrapolate``). A single radius is
    accepted for exact synthetic fields and used without extrapolation.
    """
    radii = sorted(float(r) for r in np.atleast_1d(radii))
    if radii[0] <= 0:
        raise AccuracyError("sampling radii must be positive")
    if graded_radius is not None and radii[0] > graded_radius:
        raise AccuracyError("sampling radii lie outside the graded region")
    fits = [fit_circle(u, a, r, n_angles) for r in radii]
    res = max(f[1] for f in fits)
    if res > max_residual:
        raise FitError(f"harmonic fit residual {res:.3g} exceeds {max_residual}")
    lead = np.array([coef[1] / math.sqrt(r) for (coef, _), r in zip(fits, radii)])
    cd = lead[0] if len(radii) == 1 else _extrapolate(radii, lead)
    e = np.array([np.sum(fits[0][0][h] ** 2) for h in HARMONICS])
    frac = e / e.sum() if e.sum() > 0 else np.array([1.0, 0, 0])
    h = next((hh for hh, f in zip(HARMONICS, frac) if f > h_energy), HARMONICS[int(np.argmax(frac))])
    c_raw, d_raw = float(cd[0]), float(cd[1])
    if h > 1:
        c, d = 0.0, 0.0
    else:
        s = canonical_sign(c_raw, d_raw, SIGN_TOL * math.hypot(c_raw, d_raw))
        c, d = s * c_raw, s * d_raw
    m, ang = polar_form(c, d)
    return NodalData(c=c, d=d, m=m, angle=ang, h=int(h), fit_residual=res,
                     c_raw=c_raw, d_raw=d_raw)


def sin_half_difference(n1: NodalData, n2: NodalData):
    """sin((alpha_1 - alpha_2) / 2) from the coefficients (sign follows the raw basis)."""
    if n1.m == 0 or n2.m == 0:
        return 0.0
    return (n1.d * n2.c - n1.c * n2.d) / (n1.m * n2.m)


def angle_difference(n1: NodalData, n2: NodalData):
    """alpha_1 - alpha_2 wrapped to (-pi, pi]."""
    x = (n1.angle - n2.angle + math.pi) % (2 * math.pi) - math.pi
    return math.pi if x == -math.pi else x


@dataclass(frozen=True)
class PreconditionVerdict:
    condition_i: bool
    condition_ii: bool
    tol_m: float
    sin_half: float

    @property
    def both(self):
        return self.condition_i and self.condition_ii


def theorem_precondition_i_ii(n1: NodalData, n2: NodalData, tol_m=None, tol_angle=0.05):
    """Conditions (i) both magnitudes nonzero and (ii) non-parallel (c, d) vectors."""
    if tol_m is None:
        tol_m = 0.05 * max(n1.m, n2.m)
    cond_i = n1.m > tol_m and n2.m > tol_m and n1.h == 1 and n2.h == 1
    s = sin_half_difference(n1, n2)
    cond_ii = cond_i and abs(s) > tol_angle
    return PreconditionVerdict(bool(cond_i), bool(cond_ii), float(tol_m), float(s))
