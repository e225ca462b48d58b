"""Green functions by Dirichlet exhaustion, the alpha -> 0 limit, criticality
constants and null-sequence energies."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from . import solvers
from .builders import LatticeSpec, TreeSpec, _lattice_points, build
from .graph import WeightedGraph, apply_laplacian, induced_subgraph

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GreenTable:
    """Values of ``G_alpha`` on a truncation.

    ``values`` covers every vertex of ``graph``; for a plain Dirichlet solve
    they vanish on the boundary layer, for an extrapolated exhaustion they
    are the limit estimate there too.
    """

    graph: WeightedGraph
    root: int
    alpha: float
    values: np.ndarray
    radius: Optional[int]
    converged: bool
    est_error: float
    residual: float
    history: tuple = ()
    extrapolated: bool = False
    meta: dict = field(default_factory=dict)

    def on(self, other: WeightedGraph) -> np.ndarray:
        """Transfer values onto another truncation of the same model."""
        return transfer(self.graph, self.values, other)

    def trim(self) -> "GreenTable":
        """Drop the boundary layer so that the values are positive everywhere.

        The former outermost interior layer becomes the new boundary; the
        equation then holds on the (smaller) interior only.
        """
        g = self.graph
        sub, idx = induced_subgraph(g, g.interior, self.root)
        meta = dict(self.meta)
        if self.radius is not None:
            sub.meta["radius"] = self.radius - (g.meta.get("layer", 1))
        return GreenTable(sub, sub.root, self.alpha, self.values[idx],
                          sub.meta.get("radius"), self.converged, self.est_error, self.residual,
                          self.history, self.extrapolated, meta)

    def to_dict(self, include_values: bool = True) -> dict:
        g = self.graph
        out = {
            "alpha": self.alpha,
            "root": int(self.root),
            "radius": self.radius,
            "converged": self.converged,
            "est_error": self.est_error,
            "residual": self.residual,
            "extrapolated": self.extrapolated,
            "history": list(self.history),
            "model": {k: v for k, v in g.meta.items() if k != "names"},
        }
        out.update(self.meta)
        if include_values:
            out["coords"] = g.coords.tolist() if g.coords is not None else None
            out["values"] = self.values.tolist()
            out["boundary"] = g.boundary.astype(int).tolist()
        return out


def transfer(src: WeightedGraph, values, dst: WeightedGraph) -> np.ndarray:
    """Map vertex values between nested truncations (coordinates, or BFS
    prefix order for trees).  Vertices of ``dst`` missing in ``src`` get 0."""
    values = np.asarray(values, dtype=float)
    if src.kind == "tree" and dst.kind == "tree":
        out = np.zeros(dst.n)
        k = min(src.n, dst.n)
        out[:k] = values[:k]
        return out
    if src.coords is None or dst.coords is None:
        if src is dst:
            return values.copy()
        raise ValueError("cannot transfer values between unlabelled graphs")
    idx = src.index_of(dst.coords - dst.coords[dst.root] + src.coords[src.root])
    out = np.zeros(dst.n)
    ok = idx >= 0
    out[ok] = values[idx[ok]]
    return out


def green_dirichlet(g: WeightedGraph, o: Optional[int] = None, alpha: float = 0.0,
                    direct: Optional[bool] = None) -> GreenTable:
    """Solve ``sum_y b(x,y)(u(x)-u(y)) + alpha m(x) u(x) = 1_o(x)`` on the
    interior with ``u = 0`` on the boundary layer."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    o = g.root if o is None else int(o)
    if g.boundary[o]:
        raise ValueError("root must be interior")
    inner = np.flatnonzero(g.interior)
    if alpha == 0 and inner.size == g.n:
        raise ValueError("alpha = 0 needs a nonempty boundary layer")
    A = g.operator_matrix(alpha=alpha)
    rhs = np.zeros(inner.size)
    pos = int(np.searchsorted(inner, o))
    rhs[pos] = 1.0
    try:
        u_in = solvers.solve_spd(A, rhs, direct=direct)
    except solvers.SolverError as exc:
        raise solvers.SolverError(f"singular Dirichlet system: {exc}") from exc
    u = np.zeros(g.n)
    u[inner] = u_in
    res = float(np.max(np.abs(A @ u_in - rhs)))
    if np.any(u_in < 0):
        log.warning("Green function has negative interior values (min %g)", u_in.min())
    return GreenTable(g, o, float(alpha), u, g.meta.get("radius"), True, 0.0, res)


def residual(table: GreenTable) -> float:
    """Max interior ``|(m (Delta + alpha) u) - 1_o|`` for any table, boundary values included."""
    g = table.graph
    lap = apply_laplacian(g, table.values) * g.m + table.alpha * g.m * table.values
    lap[table.root] -= 1.0
    return float(np.nanmax(np.abs(lap[g.interior])))


def _core_index(spec, g: WeightedGraph, core_radius: int) -> np.ndarray:
    if isinstance(spec, TreeSpec):
        return np.flatnonzero(g.coords[:, 0] <= core_radius)
    pts = _lattice_points(g.coords.shape[1], core_radius, "linf")
    idx = g.index_of(pts + g.coords[g.root])
    if np.any(idx < 0):
        raise ValueError("core region exceeds truncation")
    return idx


def _richardson_order(radii, changes, p_min: float = 0.2) -> Optional[float]:
    """Order ``p`` of an ``R^-p`` error model fitted to the last two changes."""
    r0, r1, r2 = radii[-3:]
    c1, c2 = changes[-2:]
    if not (c1 > 0 and c2 > 0) or c2 >= c1:
        return None
    target = c2 / c1

    def model(p):
        return (r1**-p - r2**-p) / (r0**-p - r1**-p) - target

    lo, hi = 1e-3, 40.0
    if model(lo) * model(hi) > 0:
        return None
    p = brentq(model, lo, hi, xtol=1e-12)
    return p if p >= p_min else None


def green_exhaustion(spec, o: Optional[int] = None, alpha: float = 0.0, core_radius: int = 5,
                     tol: float = 1e-8, *, start_radius: Optional[int] = None,
                     radius_cap: Optional[int] = None, growth: float = 1.5,
                     extrapolate: Optional[bool] = None, order: Optional[float] = None,
                     value_cap: float = 1e6) -> GreenTable:
    """Green function on growing truncations until the core values settle.

    Radii grow geometrically (additively on trees).  With ``extrapolate``
    (default: only for ``alpha = 0``, where truncation errors decay like a
    power of ``R`` rather than exponentially) the last two solves are
    combined linearly under an ``R^-p`` boundary-error model (``p`` fitted,
    or ``order`` if given); the combination is again an exact solution of
    the resolvent equation on the smaller truncation, so it can be used
    wherever a Green function is expected.  Recurrent cases never settle and
    come back with ``converged=False``.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if extrapolate is None:
        extrapolate = alpha == 0
    R = start_radius or core_radius + max(4, math.ceil(core_radius / 2))
    if radius_cap is None:
        radius_cap = _default_cap(spec)
    radii, tables, cores, changes, ext, ext_changes = [], [], [], [], [], []
    history = []
    while True:
        if R > radius_cap:
            break
        g = build(spec.with_radius(R))
        t = green_dirichlet(g, o, alpha)
        core = t.values[_core_index(spec, g, core_radius)]
        radii.append(R)
        tables.append(t)
        cores.append(core)
        entry = {"radius": R, "root_value": float(t.values[t.root])}
        if len(cores) > 1:
            changes.append(float(np.max(np.abs(core - cores[-2]))))
            entry["change"] = changes[-1]
        if extrapolate and len(cores) >= 2:
            p = order if order is not None else (
                _richardson_order(radii, changes) if len(changes) >= 2 else None)
            if p is not None:
                c = radii[-1] ** -p / (radii[-2] ** -p - radii[-1] ** -p)
                ext.append((p, c, cores[-1] + c * (cores[-1] - cores[-2])))
                entry["order"] = p
                if len(ext) >= 2:
                    ext_changes.append(float(np.max(np.abs(ext[-1][2] - ext[-2][2]))))
                    entry["extrapolated_change"] = ext_changes[-1]
                    if ext_changes[-1] <= tol:
                        history.append(entry)
                        return _extrapolated(tables[-2], tables[-1], c, p, ext_changes[-1],
                                             history)
            else:
                ext.clear()
        # with an extrapolation series running, wait for it to settle instead
        if changes and changes[-1] <= tol and not (extrapolate and ext):
            history.append(entry)
            return _finish(t, True, changes[-1], history, False)
        history.append(entry)
        if float(np.max(core)) > value_cap:
            log.info("core values exceed cap %g: declaring divergence", value_cap)
            break
        if isinstance(spec, TreeSpec):
            R += max(2, R // 4)  # volume is already exponential
        else:
            R = max(R + 1, math.ceil(growth * R))
    if not tables:
        raise ValueError(f"radius cap {radius_cap} below the starting radius {R}")
    last = tables[-1]
    meta = {"growth": _growth_fit(radii, [h["root_value"] for h in history])}
    est = changes[-1] if changes else float("inf")
    return _finish(last, False, est, history, False, meta)


def _default_cap(spec) -> int:
    budget = 2_000_000
    if isinstance(spec, LatticeSpec):
        return int((budget ** (1.0 / spec.d) - 1) // 2)
    if isinstance(spec, TreeSpec):
        d = spec.degree
        r = 2
        while 1 + d * ((d - 1) ** (r + 1) - 1) // max(d - 2, 1) <= budget and r < 200:
            r += 1
        return r
    return 10_000


def _growth_fit(radii, root_values) -> dict:
    if len(radii) < 2:
        return {}
    lr = np.log(radii)
    v = np.asarray(root_values)
    log_slope = float(np.polyfit(lr, v, 1)[0])
    power = float(np.polyfit(lr, np.log(v), 1)[0])
    return {"value_vs_log_radius_slope": log_slope, "log_value_vs_log_radius_slope": power}


def _finish(t: GreenTable, converged, est, history, extrapolated, meta=None) -> GreenTable:
    return GreenTable(t.graph, t.root, t.alpha, t.values, t.radius, converged, float(est),
                      t.residual, tuple(history), extrapolated, meta or {})


def _extrapolated(small: GreenTable, big: GreenTable, c: float, p: float, est: float,
                  history) -> GreenTable:
    g = small.graph
    gb = big.on(g)
    vals = gb + c * (gb - small.values)
    out = GreenTable(g, small.root, small.alpha, vals, small.radius, True, float(est), 0.0,
                     tuple(history), True, {"order": p, "radii": [small.radius, big.radius]})
    return GreenTable(g, out.root, out.alpha, vals, out.radius, True, float(est), residual(out),
                      tuple(history), True, out.meta)


# ------------------------------------------------------------ alpha -> 0

@dataclass(frozen=True)
class ZeroLimitReport:
    """Outcome of the ``alpha -> 0`` limit on a fixed truncation."""

    converged: bool
    alphas: list
    root_values: list
    increments: list
    bulk_alphas: list
    contraction: Optional[float]
    spectral_gap: float
    limit: Optional[GreenTable]
    exhaustion_mismatch: Optional[float]
    reason: str

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "alphas": self.alphas,
            "root_values": self.root_values,
            "increments": self.increments,
            "bulk_alphas": self.bulk_alphas,
            "contraction": self.contraction,
            "spectral_gap": self.spectral_gap,
            "exhaustion_mismatch": self.exhaustion_mismatch,
            "reason": self.reason,
        }


def green_zero_limit(spec, o: Optional[int] = None, alphas: Sequence[float] = None,
                     core_radius: int = 3, *, tol: float = 1e-6, gap_factor: float = 4.0,
                     contraction_max: float = 0.9, value_cap: float = 1e6) -> ZeroLimitReport:
    """Limit of ``G_alpha`` on the core as ``alpha`` decreases to 0.

    All solves use the truncation ``build(spec)``.  Shifts much larger than
    the Dirichlet spectral gap ``lambda_1`` of the truncation see the
    infinite graph; their increments decide between convergence
    (geometric contraction) and divergence (recurrent growth).  A convergent
    sequence is extrapolated and cross-checked against the ``alpha = 0``
    Dirichlet solve on the same truncation; disagreement beyond ``tol``
    raises, since both compute the same finite-volume object.
    """
    if alphas is None:
        alphas = [10.0 ** (-k / 4) for k in range(33)]
    alphas = [float(a) for a in alphas]
    if any(a <= 0 for a in alphas) or any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be positive and strictly decreasing")
    g = build(spec)
    core = _core_index(spec, g, core_radius)
    inner = np.flatnonzero(g.interior)
    gap = solvers.smallest_eigenvalue(g.operator_matrix(), g.m[inner])
    cores = [green_dirichlet(g, o, a).values[core] for a in alphas]
    root_vals = [float(c[np.argmax(core == g.root)]) for c in cores]
    incs = [float(np.max(np.abs(b - a))) for a, b in zip(cores, cores[1:])]
    bulk = [k for k, a in enumerate(alphas) if a >= gap_factor * gap]
    bulk_incs = [incs[k - 1] for k in bulk if k >= 1]
    if len(bulk_incs) < 2:
        raise ValueError("need at least three shifts above the truncation's spectral gap "
                         f"({gap_factor} * {gap:.3g}); enlarge the truncation")
    ratios = [b / a for a, b in zip(bulk_incs, bulk_incs[1:]) if a > 0]
    rho = max(ratios[-2:]) if ratios else None
    base = dict(alphas=alphas, root_values=root_vals, increments=incs,
                bulk_alphas=[alphas[k] for k in bulk], contraction=rho, spectral_gap=gap)
    if max(np.max(c) for c in cores) > value_cap:
        return ZeroLimitReport(False, limit=None, exhaustion_mismatch=None,
                               reason="core values exceed cap", **base)
    if rho is None or rho > contraction_max:
        return ZeroLimitReport(False, limit=None, exhaustion_mismatch=None,
                               reason="increments do not contract: divergent (recurrent) limit",
                               **base)
    a, b, c = cores[-3:]
    den = (c - b) - (b - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = np.where(np.abs(den) > 1e-300, c - (c - b) ** 2 / den, c)
    zero = green_dirichlet(g, o, 0.0)
    mismatch = float(np.max(np.abs(lim - zero.values[core])))
    if mismatch > tol:
        raise RuntimeError(f"alpha -> 0 limit disagrees with the alpha = 0 solve by {mismatch:.3g}")
    table = GreenTable(g, zero.root, 0.0, zero.values, zero.radius, True, incs[-1], zero.residual,
                       meta={"source": "alpha->0 limit, cross-checked"})
    return ZeroLimitReport(True, limit=table, exhaustion_mismatch=mismatch,
                           reason="Cauchy in sup norm", **base)


# ------------------------------------------------------- criticality probe

@dataclass(frozen=True)
class CriticalityProbeResult:
    alpha: float
    root: int
    radii: list
    constants: list
    extrapolated: Optional[float]
    bisect_tol: float
    green_root: list

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "root": self.root,
            "radii": self.radii,
            "constants": self.constants,
            "extrapolated": self.extrapolated,
            "bisect_tol": self.bisect_tol,
            "green_root": self.green_root,
        }


def tree_radial_operator(degree: int, radius: int, alpha: float):
    """Radial reduction of the Dirichlet operator on a regular-tree ball.

    Returns ``(A, S)`` with ``A`` the (dense, tridiagonal) form matrix on
    levels ``0..radius-1`` in radial coordinates and ``S`` the sphere sizes
    (the mass matrix).  The ground state of any operator of the form
    ``Delta + alpha - C 1_o`` on the ball is invariant under automorphisms
    fixing ``o``, so the reduction preserves its smallest eigenvalue.
    """
    S = TreeSpec(degree, max(radius, 2)).sphere_sizes()[: radius + 1].astype(float)
    n = radius
    A = np.zeros((n, n))
    for k in range(n):
        A[k, k] = S[k + 1] + (S[k] if k else 0.0) + alpha * S[k]
        if k + 1 < n:
            A[k, k + 1] = A[k + 1, k] = -S[k + 1]
    return A, S[:n]


def aitken(seq: Sequence[float]) -> Optional[float]:
    if len(seq) < 3:
        return None
    a, b, c = seq[-3:]
    den = (c - b) - (b - a)
    if den == 0:
        return float(c)
    return float(c - (c - b) ** 2 / den)


def _bisect_constant(is_pd, guess: float, upper: float, tol: float) -> float:
    lo, hi = 0.0, upper
    if not is_pd(lo):
        raise ValueError("operator is not positive at C = 0; bisection bracket failure")
    if is_pd(hi):
        raise ValueError("bisection bracket failure at the upper end")
    if 0 < guess < upper:
        delta = 1e-6
        if is_pd(guess * (1 - delta)) and not is_pd(guess * (1 + delta)):
            lo, hi = guess * (1 - delta), guess * (1 + delta)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if is_pd(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def criticality_constant(spec, o: Optional[int] = None, alpha: float = 0.0,
                         radii: Sequence[int] = (), bisect_tol: float = 1e-9
                         ) -> CriticalityProbeResult:
    """``C*_R = sup{C : Delta + alpha - C 1_o >= 0 on B_R}`` for each radius.

    Each bisection step is an eigenvalue-sign test on the truncated
    operator: a dense eigenvalue for small problems, the LDL^T inertia for
    large ones.  Regular trees use the exact radial reduction.  The inverse
    root value of ``G_alpha`` on the same ball is reported alongside; the two
    agree by the rank-one perturbation identity.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    consts, groots = [], []
    root = 0
    for R in radii:
        if isinstance(spec, TreeSpec):
            A, S = tree_radial_operator(spec.degree, int(R), alpha)
            e0 = np.zeros(A.shape[0])
            e0[0] = 1.0
            groot = float(np.linalg.solve(A, e0)[0])
            s = 1.0 / np.sqrt(S)
            base = A * np.outer(s, s)

            def is_pd(C, base=base):
                M = base.copy()
                M[0, 0] -= C
                return solvers.tridiagonal_smallest_eigenvalue(
                    np.diag(M), np.diag(M, 1)) > 0

            upper = A[0, 0] * (1 + 1e-12) + 1e-300
        else:
            g = build(spec.with_radius(int(R)))
            o_ = g.root if o is None else int(o)
            root = o_
            A = g.operator_matrix(alpha=alpha)
            inner = np.flatnonzero(g.interior)
            pos = int(np.searchsorted(inner, o_))
            tab = green_dirichlet(g, o_, alpha)
            groot = float(tab.values[o_])

            def is_pd(C, A=A, pos=pos):
                shift = sp.csr_matrix(([C], ([pos], [pos])), shape=A.shape)
                return solvers.is_positive_definite(A - shift)

            upper = float(A[pos, pos]) * (1 + 1e-12)
        consts.append(_bisect_constant(is_pd, 1.0 / groot, upper, bisect_tol))
        groots.append(groot)
    return CriticalityProbeResult(float(alpha), root, [int(r) for r in radii], consts,
                                  aitken(consts), bisect_tol, groots)


# ---------------------------------------------------------- null sequences

def _profile(kind: str, n: int):
    if kind == "tent":
        return lambda r: np.clip(1.0 - r / n, 0.0, None)
    if kind == "log":
        ln = math.log(n)

        def phi(r):
            with np.errstate(divide="ignore"):
                val = np.log(n * n / np.where(r > 0, r, 1.0)) / ln
            return np.clip(np.where(r > 0, val, 1.0), 0.0, 1.0)

        return phi
    raise ValueError(f"unknown profile {kind!r}")


def profile_support(kind: str, n: int) -> float:
    return float(n if kind == "tent" else n * n)


def profile_values(kind: str, n: int, coords: np.ndarray) -> np.ndarray:
    r = np.sqrt((np.asarray(coords, dtype=float) ** 2).sum(axis=1))
    return _profile(kind, n)(r)


def _energy_direct(d: int, kind: str, n: int, chunk: int = 512) -> float:
    """Sum over all lattice edges of ``(phi(x) - phi(y))^2`` for a radial profile.

    Uses the symmetries of a radial profile: both coordinate directions carry
    the same energy, and every direction sum is even in each coordinate.
    """
    phi = _profile(kind, n)
    N = int(math.floor(profile_support(kind, n))) + 1
    xs = np.arange(0, N + 1, dtype=float)
    if d == 1:
        return 2.0 * float(np.sum((phi(xs[1:]) - phi(xs[:-1])) ** 2))
    # edges (x, x + e_1) with x_1 >= 0 mirror those with x_1 <= -1
    total = 0.0
    if d == 2:
        for start in range(0, N + 1, chunk):
            ys = xs[start:start + chunk]
            w = np.where(ys == 0, 1.0, 2.0)
            r2 = ys[:, None] ** 2
            a = phi(np.sqrt(xs[None, :-1] ** 2 + r2))
            b = phi(np.sqrt(xs[None, 1:] ** 2 + r2))
            total += float(np.sum(w[:, None] * (b - a) ** 2))
        return 2.0 * 2.0 * total
    if d == 3:
        ys = xs
        wy = np.where(ys == 0, 1.0, 2.0)
        for z in xs:
            wz = 1.0 if z == 0 else 2.0
            r2 = ys[:, None] ** 2 + z * z
            a = phi(np.sqrt(xs[None, :-1] ** 2 + r2))
            b = phi(np.sqrt(xs[None, 1:] ** 2 + r2))
            total += wz * float(np.sum(wy[:, None] * (b - a) ** 2))
        return 3.0 * 2.0 * total
    raise ValueError("direct summation implemented for d <= 3")


def null_sequence_energy(d: int, profile: str, ns: Sequence[int],
                         graph: Optional[WeightedGraph] = None) -> list[tuple[int, float]]:
    """``(n, Q_0(phi_n))`` for tent ``(1 - |x|/n)_+`` or log cutoffs
    ``min(1, (log(n^2/|x|)/log n)_+)`` on Z^d, each normalised at the origin.

    Without ``graph`` the energy is summed over all lattice edges directly;
    with a graph the profile must fit inside its interior.
    """
    out = []
    for n in ns:
        if n < 2:
            raise ValueError("n must be >= 2")
        if graph is None:
            q = _energy_direct(d, profile, int(n))
        else:
            from .graph import quadratic_form

            rel = graph.coords - graph.coords[graph.root]
            phi = profile_values(profile, int(n), rel)
            if np.any(phi[graph.boundary] != 0):
                raise ValueError(f"profile with n={n} is not supported in the interior")
            q = quadratic_form(graph, np.zeros(graph.n), phi)
        out.append((int(n), float(q)))
    return out
