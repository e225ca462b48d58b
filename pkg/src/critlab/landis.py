"""Finite-volume checks of Landis-type hypothesis sets.

Every check runs on a truncation and reports trends over a radius window
kept away from the Dirichlet layer.  Nothing here claims an infinite-graph
limit: a ``liminf`` is proxied by the minimum over the outer half of the
window together with a monotonicity diagnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import solvers
from .graph import WeightedGraph, apply_laplacian, edge_ratio_sup

AXIS_LAMBDA = math.acosh(1.5)
POTENTIAL_TOL = 1e-12
BOUND_SLACK = 1.05
DECAY_FACTOR = 0.5
WINDOW_FRACTION = 0.75

# canonical ids, with the numbering used on the command line as aliases
THEOREMS = {
    "general": "3.2",
    "hardy-ground-state": "3.4",
    "green-root": "3.5",
    "green-alpha": "3.6",
    "l2": "l2",
    "lattice": "4.1",
    "lattice-axis": "4.2",
    "tree": "4.3",
    "fractional": "5.1",
    "fractional-1d": "5.2",
}
_ALIASES = {v: k for k, v in THEOREMS.items()}


class MissingReference(ValueError):
    pass


def canonical_theorem(theorem_id: str) -> str:
    tid = str(theorem_id)
    if tid in THEOREMS:
        return tid
    if tid in _ALIASES:
        return _ALIASES[tid]
    raise ValueError(f"unknown theorem id {theorem_id!r}; choose from "
                     f"{sorted(THEOREMS) + sorted(_ALIASES)}")


@dataclass(frozen=True)
class Hypothesis:
    name: str
    satisfied: Optional[bool]  # None: not checked
    value: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "satisfied": self.satisfied, "value": self.value,
                **self.detail}


@dataclass(frozen=True)
class Profile:
    """Per-radius values with the outer-half window used for trend decisions."""

    radii: np.ndarray
    values: np.ndarray
    window: tuple[int, int]

    def _outer(self) -> np.ndarray:
        lo, hi = self.window
        return self.values[(self.radii >= lo) & (self.radii <= hi)]

    @property
    def liminf_proxy(self) -> float:
        outer = self._outer()
        return float(outer.min()) if outer.size else float("nan")

    @property
    def monotone_decreasing(self) -> bool:
        outer = self._outer()
        return bool(outer.size >= 2 and np.all(np.diff(outer) < 0))

    def to_dict(self) -> dict:
        return {"radii": self.radii.tolist(), "values": self.values.tolist(),
                "window": list(self.window), "liminf_proxy": self.liminf_proxy,
                "monotone_decreasing": self.monotone_decreasing}


def tends_to_zero(profile: Profile, zero_tol: float = 1e-12) -> tuple[bool, str]:
    """Decision rule for ``liminf = 0`` on a truncation.

    True when the outer window is (numerically) zero, or strictly decreasing
    with its last value at most ``DECAY_FACTOR`` times its first.
    """
    outer = profile._outer()
    if outer.size == 0:
        raise ValueError("empty radius window")
    scale = float(np.max(np.abs(profile.values))) if profile.values.size else 0.0
    if not np.all(np.isfinite(outer)):
        return False, "non-finite"
    if scale == 0 or outer.min() <= zero_tol * scale:
        return True, "zero"
    if profile.monotone_decreasing and outer[-1] <= DECAY_FACTOR * outer[0]:
        return True, "decaying"
    if np.all(np.diff(outer) >= 0):
        return False, "nondecreasing"
    return False, "no decay trend"


def bounded_trend(profile: Profile) -> tuple[bool, str]:
    """``O(.)`` rule: finite, and the last value within ``BOUND_SLACK`` of the window minimum."""
    outer = profile._outer()
    if outer.size == 0:
        raise ValueError("empty radius window")
    if not np.all(np.isfinite(outer)):
        return False, "non-finite"
    if outer[-1] <= BOUND_SLACK * outer.min():
        return True, "bounded"
    return False, "growing"


# ------------------------------------------------------------------ geometry

def usable_radius(g: WeightedGraph, fraction: float = WINDOW_FRACTION) -> int:
    """Largest radius kept for profiles: a fraction of the distance to the boundary layer."""
    dist = g.distance
    r_in = float(dist[g.boundary].min()) if g.boundary.any() else float(dist.max())
    return max(1, int(math.floor(fraction * r_in)))


def _radii(g: WeightedGraph, radii) -> np.ndarray:
    if radii is None:
        return np.arange(0, usable_radius(g) + 1)
    radii = np.asarray(radii, dtype=np.int64)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a nonempty 1-D sequence")
    return radii


def _window(radii: np.ndarray) -> tuple[int, int]:
    hi = int(radii.max())
    return int(math.ceil(hi / 2)), hi


def _bins(g: WeightedGraph) -> np.ndarray:
    return np.floor(g.distance + 1e-9).astype(np.int64)


def _log_abs(u: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(u))


def sphere_profile(g: WeightedGraph, log_ratio: np.ndarray, radii=None, reduce=np.min) -> Profile:
    """``reduce`` of ``exp(log_ratio)`` over each sphere ``{floor |x| = r}``."""
    radii = _radii(g, radii)
    bins = _bins(g)
    vals = np.empty(radii.size)
    for k, r in enumerate(radii):
        sel = bins == r
        if not sel.any():
            raise ValueError(f"sphere of radius {r} is empty")
        vals[k] = float(np.exp(reduce(log_ratio[sel])))
    return Profile(radii, vals, _window(radii))


def _reference_log(g: WeightedGraph, ref) -> np.ndarray:
    vals = ref.on(g) if hasattr(ref, "on") else np.asarray(ref, dtype=float)
    if vals.shape != (g.n,):
        raise ValueError(f"reference has shape {vals.shape}, graph has {g.n} vertices")
    return np.log(np.where(vals > 0, vals, np.nan))


def decay_profile(g: WeightedGraph, u, ref, radii=None) -> Profile:
    """Per-radius ``min |u| / ref`` over spheres; ``ref`` is a GreenTable or an array.

    ``ref`` must be positive on every sphere used.
    """
    u = np.asarray(u, dtype=float)
    lr = _reference_log(g, ref)
    radii = _radii(g, radii)
    used = np.isin(_bins(g), radii)
    if np.any(np.isnan(lr[used])):
        raise ValueError("reference must be positive on the spheres in use")
    return sphere_profile(g, _log_abs(u) - lr, radii)


def _annulus_sup(g: WeightedGraph, u, ref, radii) -> Profile:
    lr = _reference_log(g, ref)
    return sphere_profile(g, _log_abs(np.asarray(u, dtype=float)) - lr, radii, reduce=np.max)


def check_apriori(b: WeightedGraph, u, b_prime: WeightedGraph, v) -> float:
    """Smallest ``C`` with ``b(|u| x |u|) <= C b'(v x v)`` on interior-incident edges."""
    return edge_ratio_sup(b, np.abs(np.asarray(u, dtype=float)), b_prime, v).value


def apriori_trend(b: WeightedGraph, u, b_prime: WeightedGraph, v, radii=None) -> Profile:
    """Edge-ratio sup restricted to edges whose nearer end lies in each annulus."""
    radii = _radii(b, radii)
    u = np.abs(np.asarray(u, dtype=float))
    v = np.asarray(v, dtype=float)
    i, j, w = b.edges
    keep = b.interior[i] | b.interior[j]
    i, j, w = i[keep], j[keep], w[keep]
    w2 = np.asarray(b_prime.b[i, j]).ravel()
    num = w * u[i] * u[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num > 0, num / (w2 * v[i] * v[j]), 0.0)
    near = np.minimum(_bins(b)[i], _bins(b)[j])
    vals = np.array([ratio[near == r].max() if np.any(near == r) else 0.0 for r in radii])
    return Profile(radii, vals, _window(radii))


# ------------------------------------------------------------------ report

@dataclass(frozen=True, eq=False)
class LandisReport:
    theorem_id: str
    hypotheses: tuple
    apriori_constant: float
    decay: Profile
    potential_bound_ok: Optional[bool]
    consistency: dict

    @property
    def decay_liminf_proxy(self) -> float:
        return self.decay.liminf_proxy

    @property
    def violated(self) -> list[str]:
        return [h.name for h in self.hypotheses if h.satisfied is False]

    @property
    def verdict(self) -> str:
        return "hypotheses-violated" if self.violated else "hypotheses-satisfied"

    @property
    def red_flag(self) -> bool:
        return bool(self.consistency.get("red_flag", False))

    def hypothesis(self, name: str) -> Hypothesis:
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "alias": THEOREMS[self.theorem_id],
            "verdict": self.verdict,
            "violated": self.violated,
            "apriori_constant": self.apriori_constant,
            "decay_liminf_proxy": self.decay_liminf_proxy,
            "decay_profile": self.decay.to_dict(),
            "potential_bound_ok": self.potential_bound_ok,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "consistency": self.consistency,
        }


def _potential(g: WeightedGraph, V) -> Hypothesis:
    if V is None:
        return Hypothesis("potential", None, float("nan"), {"note": "no potential supplied"})
    V = np.asarray(V, dtype=float)
    vmax = float(np.max(V[g.interior]))
    return Hypothesis("potential", vmax <= 1 + POTENTIAL_TOL, vmax, {"bound": 1.0})


def _harmonic_residual(g: WeightedGraph, V, u) -> float:
    Hu = apply_laplacian(g, u) * g.m + np.asarray(V, dtype=float) * u
    scale = max(float(np.max(np.abs(u))), 1e-300)
    return float(np.nanmax(np.abs(Hu[g.interior]))) / scale


def _positive_form(g: WeightedGraph, V, u, residual: float, max_n: int = 60_000) -> Hypothesis:
    """Positivity of the energy form, by a positive-solution certificate or a spectral check."""
    if V is None:
        return Hypothesis("positive_form", None, float("nan"), {"note": "no potential supplied"})
    inner = g.interior
    if residual <= 1e-9 and np.all(u[inner] > 0):
        return Hypothesis("positive_form", True, 0.0, {"method": "positive harmonic function"})
    if inner.sum() > max_n:
        return Hypothesis("positive_form", None, float("nan"), {"note": "truncation too large"})
    A = g.operator_matrix(potential=V)
    lam = solvers.smallest_eigenvalue(A, g.m[inner])
    scale = float(np.max(g.degree[inner] / g.m[inner]))
    return Hypothesis("positive_form", lam >= -1e-10 * scale, float(lam),
                      {"method": "smallest Dirichlet eigenvalue"})


def _liminf(name: str, prof: Profile, **detail) -> Hypothesis:
    ok, why = tends_to_zero(prof)
    return Hypothesis(name, ok, prof.liminf_proxy, {"trend": why, **detail})


def _bound(name: str, prof: Profile, **detail) -> Hypothesis:
    ok, why = bounded_trend(prof)
    outer = prof._outer()
    return Hypothesis(name, ok, float(outer[-1]), {"trend": why, "window_min": float(outer.min()),
                                                   **detail})


def _dist(g: WeightedGraph) -> np.ndarray:
    return g.distance


def _log_power(g: WeightedGraph, power: float) -> np.ndarray:
    """``log max(|x|, 1)^power``."""
    return power * np.log(np.maximum(_dist(g), 1.0))


def _axis_profiles(g: WeightedGraph, u, lam: float, radii) -> list[Profile]:
    if g.coords is None or g.kind not in ("lattice", "fractional"):
        raise MissingReference("axis hypotheses need a lattice truncation")
    d = g.coords.shape[1]
    radii = _radii(g, radii)
    radii = radii[radii >= 1]
    out = []
    for j in range(d):
        pts = np.zeros((radii.size, d), dtype=np.int64)
        pts[:, j] = radii
        idx = g.index_of(pts + g.coords[g.root])
        if np.any(idx < 0):
            raise ValueError("axis leaves the truncation")
        n = radii.astype(float)
        logw = 0.5 * (d - 1) * np.log(n) + lam * n
        vals = np.exp(_log_abs(np.asarray(u, dtype=float)[idx]) + logw)
        out.append(Profile(radii, vals, _window(radii)))
    return out


def check_theorem(theorem_id: str, g: WeightedGraph, u, V=None, *, green1=None, v=None,
                  b_prime: Optional[WeightedGraph] = None, green_alpha=None,
                  green0=None, sigma: Optional[float] = None, radii=None,
                  core_radius: int = 2, core_tol: float = 1e-8) -> LandisReport:
    """Evaluate one hypothesis set for ``u`` on the truncation ``g``.

    Reference objects by theorem: ``general`` needs ``v`` (and optionally
    ``b_prime``) and ``green1``; ``hardy-ground-state`` needs ``v`` and
    ``green1``; ``green-root`` needs ``green0`` and ``green1``;
    ``green-alpha`` needs ``green_alpha`` and ``green1``; ``l2`` needs
    ``green1``; the fractional ids need ``sigma``.  The lattice and tree
    ids use their explicit threshold weights.
    """
    tid = canonical_theorem(theorem_id)
    u = np.asarray(u, dtype=float)
    if u.shape != (g.n,):
        raise ValueError(f"u has shape {u.shape}, graph has {g.n} vertices")
    radii = _radii(g, radii)
    shell = radii[radii >= 1]
    hyps = [_potential(g, V)]
    residual = _harmonic_residual(g, V, u) if V is not None else float("nan")
    hyps.append(_positive_form(g, V, u, residual))
    d_lat = g.coords.shape[1] if g.coords is not None else None
    la = _log_abs(u)
    apriori_c = float("nan")

    def need(obj, name):
        if obj is None:
            raise MissingReference(f"theorem {tid!r} needs the reference object {name!r}")
        return obj

    if tid == "general":
        vv = np.asarray(need(v, "v"), dtype=float)
        bp = b_prime if b_prime is not None else g
        apriori_c = check_apriori(g, u, bp, vv)
        hyps.append(_bound("apriori", apriori_trend(g, u, bp, vv, shell), constant=apriori_c))
        decay = decay_profile(g, u, need(green1, "green1"), radii)
        hyps.append(_liminf("liminf", decay, weight="1/G_1"))
    elif tid in ("hardy-ground-state", "green-root", "green-alpha"):
        if tid == "hardy-ground-state":
            ref = np.asarray(need(v, "v"), dtype=float)
        elif tid == "green-root":
            g0 = need(green0, "green0")
            ref = np.sqrt(np.clip(g0.on(g) if hasattr(g0, "on") else np.asarray(g0), 0, None))
        else:
            ga = need(green_alpha, "green_alpha")
            ref = ga.on(g) if hasattr(ga, "on") else np.asarray(ga, dtype=float)
        prof = _annulus_sup(g, u, ref, shell)
        hyps.append(_bound("apriori", prof))
        apriori_c = float(prof.values.max())
        decay = decay_profile(g, u, need(green1, "green1"), radii)
        hyps.append(_liminf("liminf", decay, weight="1/G_1"))
    elif tid == "l2":
        ref = _reference_log(g, need(green1, "green1"))
        contrib = np.exp(2 * (la - ref))
        bins = _bins(g)
        sums = np.array([contrib[bins == r].sum() for r in radii])
        prof = Profile(radii, sums, _window(radii))
        ok, why = tends_to_zero(prof)
        partial = np.cumsum(sums)
        hyps.append(Hypothesis("l2", ok, float(partial[-1]),
                               {"trend": why, "partial_sums": partial.tolist()}))
        decay = decay_profile(g, u, green1, radii)
    elif tid in ("lattice", "lattice-axis"):
        if d_lat is None or g.kind != "lattice":
            raise MissingReference(f"theorem {tid!r} needs a lattice truncation")
        if d_lat <= 2:
            prof = sphere_profile(g, la, shell, reduce=np.max)
            hyps.append(_bound("apriori", prof, reference="1"))
        else:
            prof = sphere_profile(g, la - _log_power(g, (2 - d_lat) / 2), shell, reduce=np.max)
            hyps.append(_bound("apriori", prof, reference=f"|x|^{(2 - d_lat) / 2:g}"))
        apriori_c = float(prof.values.max())
        if tid == "lattice":
            logw = _log_power(g, (d_lat - 1) / 2) + _dist(g)
            decay = sphere_profile(g, la + logw, shell)
            hyps.append(_liminf("liminf", decay, weight="|x|^((d-1)/2) e^|x|"))
        else:
            profs = _axis_profiles(g, u, AXIS_LAMBDA, shell)
            best = min(range(len(profs)), key=lambda k: profs[k].liminf_proxy)
            decisions = [tends_to_zero(p) for p in profs]
            ok = [k for k, (s, _) in enumerate(decisions) if s]
            decay = profs[ok[0]] if ok else profs[best]
            hyps.append(Hypothesis("liminf", bool(ok), decay.liminf_proxy,
                                   {"trend": [w for _, w in decisions], "lambda": AXIS_LAMBDA,
                                    "axis": int(ok[0] if ok else best),
                                    "weight": "n^((d-1)/2) e^(lambda n)"}))
    elif tid == "tree":
        if g.kind != "tree":
            raise MissingReference("theorem 'tree' needs a regular tree truncation")
        q = float(g.meta.get("degree", g.degree[g.root]))
        r = _dist(g)
        logv = 0.5 * np.log(np.maximum(r, 1.0)) - 0.5 * r * math.log(q)
        prof = sphere_profile(g, la - logv, shell, reduce=np.max)
        hyps.append(_bound("apriori", prof, reference="|x|^(1/2) d^(-|x|/2)"))
        apriori_c = float(prof.values.max())
        decay = sphere_profile(g, la + r * math.log(q), shell)
        hyps.append(_liminf("liminf", decay, weight="d^|x|"))
    elif tid in ("fractional", "fractional-1d"):
        s = need(sigma, "sigma")
        if d_lat is None:
            raise MissingReference(f"theorem {tid!r} needs a lattice truncation")
        if tid == "fractional":
            if not 0 < 2 * s < d_lat:
                raise ValueError("needs 0 < 2 sigma < d")
            power = 2 * s - d_lat
            wpow = 2 * s + d_lat
        else:
            if d_lat != 1 or not 0 < s < 0.5:
                raise ValueError("needs d = 1 and 0 < sigma < 1/2")
            power = (2 * s - 1) / 2  # declared ground-state profile
            wpow = 1 + 2 * s
        prof = sphere_profile(g, la - _log_power(g, power), shell, reduce=np.max)
        hyps.append(_bound("apriori", prof, reference=f"|x|^{power:g}"))
        apriori_c = float(prof.values.max())
        decay = sphere_profile(g, la + _log_power(g, wpow), shell)
        hyps.append(_liminf("liminf", decay, weight=f"|x|^{wpow:g}"))
    else:  # pragma: no cover
        raise AssertionError(tid)

    core = _dist(g) <= core_radius
    sup_core = float(np.max(np.abs(u[core])))
    satisfied = not any(h.satisfied is False for h in hyps)
    harmonic = V is not None and residual <= 1e-9
    consistency = {
        "core_radius": core_radius,
        "sup_core": sup_core,
        "harmonic_residual": residual,
        "red_flag": bool(satisfied and harmonic and sup_core > core_tol),
    }
    pot = hyps[0].satisfied
    return LandisReport(tid, tuple(hyps), apriori_c, decay, pot, consistency)


# ------------------------------------------------------------------ sharpness

@dataclass(frozen=True, eq=False)
class SharpnessInstance:
    graph: WeightedGraph
    V: np.ndarray
    u: np.ndarray
    residual: float
    green: object

    def to_dict(self) -> dict:
        o = self.graph.root
        return {"V_root": float(self.V[o]), "V_max": float(np.max(self.V[self.graph.interior])),
                "G1_root": float(self.u[o]), "residual": self.residual}


def sharpness_instance(green1) -> SharpnessInstance:
    """``V = 1 - (m(o)/G_1(o)) 1_o`` and ``u = G_1``, for a ``GreenTable`` at ``alpha = 1``."""
    if abs(green1.alpha - 1.0) > 0:
        raise ValueError("sharpness instance needs the resolvent at alpha = 1")
    g = green1.graph
    o = green1.root
    u = np.asarray(green1.values, dtype=float)
    V = np.ones(g.n)
    V[o] = 1.0 - g.m[o] / u[o]
    if np.any(V > 1):
        raise AssertionError("potential exceeds 1")
    Hu = apply_laplacian(g, u) * g.m + V * u
    res = float(np.nanmax(np.abs(Hu[g.interior])))
    return SharpnessInstance(g, V, u, res, green1)
