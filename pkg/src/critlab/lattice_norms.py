"""The direction-dependent lattice norm ``|x|_a`` and resolvent asymptotics on Z^d.

For ``a > 0`` and ``x != 0`` the scale ``r(x)`` is the positive root of

    (1/d) sum_i sqrt(1 + x_i^2 r^2) = 1 + a^2,

``m_a = acosh(1 + d a^2)`` and ``|x|_a = (1/m_a) sum_i x_i asinh(x_i r(x))``.
The leading resolvent term is
``C_a(x) = m_a^((d-3)/2) |x|_a^(-(d-1)/2) exp(-m_a |x|_a)`` and the lattice
Green function satisfies ``G_alpha ~ C_a / (2d)`` with ``a^2 = alpha / (2d)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .builders import axis_points, diagonal_points

ROOT_TOL = 1e-13
INV_2D = "1/(2d)"


def m_a(d: int, a: float) -> float:
    """``acosh(1 + d a^2)``, written to stay accurate for small ``a``."""
    t = d * a * a
    return math.log1p(t + math.sqrt(t * (t + 2.0)))


def _check(d: int, a: float):
    if d < 1:
        raise ValueError("d must be >= 1")
    if not a > 0:
        raise ValueError("a must be > 0")


def solve_r_many(X, a: float) -> np.ndarray:
    """Vectorised root solve over the rows of ``X`` (all rows nonzero)."""
    X = np.abs(np.atleast_2d(np.asarray(X, dtype=float)))
    d = X.shape[1]
    _check(d, a)
    l1 = X.sum(axis=1)
    if np.any(l1 == 0):
        raise ValueError("r(x) is undefined at x = 0")
    target = d * (1.0 + a * a)
    x2 = X * X
    # sqrt(1+t^2) >= |t| gives the upper end; the left side is convex and
    # increasing in r, so Newton from there decreases monotonically onto the root
    r = target / l1
    active = np.arange(len(r))
    for _ in range(200):
        xa, ra = x2[active], r[active]
        s = np.sqrt(1.0 + xa * (ra * ra)[:, None])
        f = s.sum(axis=1) - target
        fp = (xa * ra[:, None] / s).sum(axis=1)
        step = f / fp
        r[active] = ra - step
        # descent is monotone, so a nonpositive or roundoff-sized step means converged
        active = active[step > 2e-15 * ra]
        if active.size == 0:
            break
    return r


def residual_r(X, r, a: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.sqrt(1.0 + (X * np.asarray(r)[:, None]) ** 2).mean(axis=1) - (1.0 + a * a)


def solve_r(x: Sequence[int], d: int | None = None, a: float = 1.0) -> float:
    """Positive root ``r(x)`` for a single nonzero point."""
    x = np.asarray(x, dtype=float).ravel()
    if d is not None and d != x.size:
        raise ValueError(f"point has {x.size} coordinates, expected {d}")
    r = float(solve_r_many(x[None, :], a)[0])
    res = float(abs(residual_r(x[None, :], [r], a)[0]))
    if res > ROOT_TOL:
        raise ArithmeticError(f"root residual {res:.3g} above {ROOT_TOL}")
    return r


def norm_a_many(X, a: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(len(X))
    nz = np.any(X != 0, axis=1)
    if np.any(nz):
        Y = np.abs(X[nz])
        r = solve_r_many(Y, a)
        out[nz] = (Y * np.arcsinh(Y * r[:, None])).sum(axis=1) / m_a(X.shape[1], a)
    return out


def log_asymptotic_resolvent_many(X, a: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    if np.any(np.all(X == 0, axis=1)):
        raise ValueError("the asymptotic resolvent is undefined at x = 0")
    m = m_a(d, a)
    n = norm_a_many(X, a)
    return 0.5 * (d - 3) * math.log(m) - 0.5 * (d - 1) * np.log(n) - m * n


@dataclass(frozen=True)
class LatticeNormEval:
    x: tuple
    d: int
    a: float
    r: float
    norm_a: float
    m_a: float
    log_asymptotic: float

    @property
    def asymptotic(self) -> float:
        return math.exp(self.log_asymptotic)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["x"] = list(self.x)
        out["asymptotic"] = self.asymptotic
        return out


def norm_a(x: Sequence[int], d: int | None = None, a: float = 1.0) -> LatticeNormEval:
    """Evaluation record for one point; ``x = 0`` gives norm 0 and no asymptotic."""
    x = tuple(int(v) for v in np.asarray(x).ravel())
    d = len(x) if d is None else d
    if d != len(x):
        raise ValueError(f"point has {len(x)} coordinates, expected {d}")
    _check(d, a)
    m = m_a(d, a)
    if not any(x):
        return LatticeNormEval(x, d, a, math.inf, 0.0, m, math.nan)
    r = solve_r(x, d, a)
    n = float(norm_a_many(np.array([x]), a)[0])
    logc = 0.5 * (d - 3) * math.log(m) - 0.5 * (d - 1) * math.log(n) - m * n
    return LatticeNormEval(x, d, a, r, n, m, logc)


def log_asymptotic_resolvent(x, d: int | None = None, a: float = 1.0) -> float:
    x = np.asarray(x).ravel()
    if d is not None and d != x.size:
        raise ValueError(f"point has {x.size} coordinates, expected {d}")
    return float(log_asymptotic_resolvent_many(x[None, :], a)[0])


def asymptotic_resolvent(x, d: int | None = None, a: float = 1.0) -> float:
    """Leading term ``C_a(x)``; underflows to 0 only when the log is below ~-745."""
    return math.exp(log_asymptotic_resolvent(x, d, a))


def a_from_alpha(d: int, alpha: float) -> float:
    return math.sqrt(alpha / (2.0 * d))


def log_green_asymptotic(x, d: int, alpha: float) -> float:
    """``log(C_a(x) / (2d))`` with ``a^2 = alpha / (2d)``."""
    return log_asymptotic_resolvent(x, d, a_from_alpha(d, alpha)) - math.log(2 * d)


# ------------------------------------------------------------- lemma sweep

def _resolve_a2(value, d: int) -> float:
    if isinstance(value, str):
        if value.replace(" ", "") in (INV_2D, "inv2d"):
            return 1.0 / (2 * d)
        return float(value)
    return float(value)


def _all_points(d: int, radius: int) -> np.ndarray:
    side = np.arange(-radius, radius + 1)
    grid = np.stack(np.meshgrid(*([side] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return grid[np.any(grid != 0, axis=1)]


@dataclass(frozen=True)
class LemmaSweepEntry:
    d: int
    a2: float
    points: int
    a1_lower_violations: int
    a1_upper_violations: int
    a2_checked: bool
    a2_violations: int
    a1_lower_slack: float
    a1_upper_slack: float
    a2_slack: float
    max_root_residual: float
    axis_max_error: float
    examples: tuple = ()


@dataclass(frozen=True)
class LemmaSweepReport:
    d_max: int
    radius: int
    rel_tol: float
    entries: tuple

    @property
    def violations(self) -> int:
        return sum(e.a1_lower_violations + e.a1_upper_violations + e.a2_violations
                   for e in self.entries)

    @property
    def axis_max_error(self) -> float:
        return max(e.axis_max_error for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "d_max": self.d_max,
            "radius": self.radius,
            "rel_tol": self.rel_tol,
            "violations": self.violations,
            "axis_max_error": self.axis_max_error,
            "entries": [asdict(e) | {"examples": [list(map(list, ex)) if isinstance(ex, tuple)
                                                  else ex for ex in e.examples]}
                        for e in self.entries],
        }


def verify_norm_lemmas(d_max: int = 4, radius: int = 20,
                       a2_grid: Iterable = (0.1, 0.5, INV_2D, 1.9),
                       rel_tol: float = 1e-12, d_values: Sequence[int] | None = None
                       ) -> LemmaSweepReport:
    """Exhaustive check of ``|x| <= |x|_a <= ||x||_1`` and, for ``a^2 < 2``,
    ``m_a |x|_a <= sqrt(2 a^2 d) |x|`` over ``0 < ||x||_inf <= radius``.

    Slacks are normalised by ``||x||_1``; an inequality counts as violated
    only beyond ``rel_tol`` (the axis cases are equalities).
    """
    entries = []
    a2_grid = list(a2_grid)
    for d in d_values or range(1, d_max + 1):
        X = _all_points(d, radius)
        Xf = X.astype(float)
        eu = np.sqrt((Xf**2).sum(axis=1))
        l1 = np.abs(Xf).sum(axis=1)
        ax = axis_points(d, radius)[1:]
        for spec_a2 in a2_grid:
            a2 = _resolve_a2(spec_a2, d)
            a = math.sqrt(a2)
            r = solve_r_many(X, a)
            res = float(np.max(np.abs(residual_r(X, r, a))))
            n = (np.abs(Xf) * np.arcsinh(np.abs(Xf) * r[:, None])).sum(axis=1) / m_a(d, a)
            low = (n - eu) / l1
            up = (l1 - n) / l1
            bad_low = low < -rel_tol
            bad_up = up < -rel_tol
            check2 = a2 < 2
            if check2:
                s2 = (math.sqrt(2 * a2 * d) * eu - m_a(d, a) * n) / l1
                bad2 = s2 < -rel_tol
                slack2 = float(s2.min())
            else:
                bad2 = np.zeros_like(bad_low)
                slack2 = math.nan
            examples = tuple(tuple(int(v) for v in X[k])
                             for k in np.flatnonzero(bad_low | bad_up | bad2)[:5])
            axis_err = float(np.max(np.abs(norm_a_many(ax, a) - np.arange(1, radius + 1))))
            entries.append(LemmaSweepEntry(
                d, a2, len(X), int(bad_low.sum()), int(bad_up.sum()), check2, int(bad2.sum()),
                float(low.min()), float(up.min()), slack2, res, axis_err, examples))
    return LemmaSweepReport(d_max, radius, rel_tol, tuple(entries))


def convexity_spot_check(d: int, a: float, samples: int = 1000, scale: float = 20.0,
                         seed: int = 0) -> float:
    """Largest observed ``|x+y|_a - |x|_a - |y|_a`` over random real pairs.

    Diagnostic only: a positive value would contradict the triangle inequality.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-scale, scale, (samples, d))
    Y = rng.uniform(-scale, scale, (samples, d))
    return float(np.max(norm_a_many(X + Y, a) - norm_a_many(X, a) - norm_a_many(Y, a)))


# --------------------------------------------------------------- fit

@dataclass(frozen=True)
class RayFit:
    direction: str
    n: list
    residual: list
    local_drift: list
    spread: float
    final_drift: float
    intercept: float
    drift_monotone: bool


@dataclass(frozen=True)
class AsymptoticFitReport:
    d: int
    alpha: float
    a: float
    m_a: float
    reference_intercept: float
    rays: tuple

    def ray(self, name: str) -> RayFit:
        for r in self.rays:
            if r.direction == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "alpha": self.alpha,
            "a": self.a,
            "m_a": self.m_a,
            "reference_intercept": self.reference_intercept,
            "rays": [asdict(r) for r in self.rays],
        }


def asymptotic_fit(green, directions: Sequence[str] = ("axis",), window: tuple = (5, 25),
                   min_points: int = 3) -> AsymptoticFitReport:
    """Residual ``rho = log G(x) + m_a |x|_a + ((d-1)/2) log |x|_a`` along rays.

    Per ray: ``spread`` is ``max - min`` of ``rho`` over the window,
    ``local_drift`` the absolute successive differences (``drift_monotone``
    says whether they never increase), and ``intercept`` the constant of a
    least-squares fit ``rho ~ c + s / |x|_a``.  The leading-order reference
    ``log(m_a^((d-3)/2) / 2d)`` is reported alongside.
    """
    g = green.graph
    if green.alpha <= 0:
        raise ValueError("asymptotic_fit needs alpha > 0")
    if g.coords is None or g.kind not in ("lattice", "file"):
        raise ValueError("asymptotic_fit needs a lattice Green table")
    d = g.coords.shape[1]
    a = a_from_alpha(d, green.alpha)
    m = m_a(d, a)
    lo, hi = window
    rays = []
    for name in directions:
        if name not in ("axis", "diagonal"):
            raise ValueError(f"unknown direction {name!r}")
        pts = (axis_points if name == "axis" else diagonal_points)(d, hi)[lo:]
        idx = g.index_of(pts + g.coords[g.root])
        ok = idx >= 0
        ok[ok] &= g.interior[idx[ok]] & (green.values[idx[ok]] > 0)
        if ok.sum() < min_points:
            raise ValueError(f"only {int(ok.sum())} usable points on the {name} ray in {window}")
        P = pts[ok]
        vals = green.values[idx[ok]]
        na = norm_a_many(P, a)
        rho = np.log(vals) + m * na + 0.5 * (d - 1) * np.log(na)
        step = np.abs(np.diff(rho))
        coef = np.polyfit(1.0 / na, rho, 1)
        rays.append(RayFit(name, P[:, 0].tolist(), rho.tolist(), step.tolist(),
                           float(rho.max() - rho.min()), float(step[-1]), float(coef[1]),
                           bool(np.all(np.diff(step) <= 0))))
    ref = 0.5 * (d - 3) * math.log(m) - math.log(2 * d)
    return AsymptoticFitReport(d, green.alpha, a, m, ref, tuple(rays))
