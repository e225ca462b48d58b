"""Fractional powers of the lattice Laplacian as long-range weighted graphs.

The heat kernel of the standard Laplacian on Z^d is the Bessel product
``p_t(z) = prod_i exp(-2t) I_{z_i}(2t)``.  Subordination turns it into the
graph weights

    w(z) = (1 / |Gamma(-sigma)|) * int_0^inf p_t(z) t^(-1-sigma) dt,   z != 0,

and the graph Laplacian built from ``w`` is ``Delta^sigma``.  Every weight is
computed twice with independent quadratures:

* route A: adaptive Gauss-Kronrod (``scipy.integrate.quad_vec``).  On
  ``[0, 1]`` the substitution ``t = s^(1/beta)``, ``beta = ||z||_1 - sigma``,
  removes the endpoint singularity; on ``[1, inf)`` it works in ``u = log t``
  and doubles the cutoff until the added piece is below ``1e-12`` relative.
* route B: Gauss-Jacobi with weight ``t^(beta-1)`` on ``[0, 1]`` and
  composite Gauss-Legendre panels in ``u`` beyond.

Both add the same analytic tail ``int_U^inf (4 pi t)^(-d/2) t^(-1-sigma) dt``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad_vec
from scipy.special import gammaln, roots_jacobi, roots_legendre

from .bessel import ive_table
from .builders import enumerate_offsets
from .graph import WeightedGraph

log = logging.getLogger(__name__)

MAX_NNZ = 80_000_000


def abs_gamma_neg(sigma: float) -> float:
    """``|Gamma(-sigma)| = Gamma(1 - sigma) / sigma`` for ``0 < sigma < 1``."""
    return math.gamma(1.0 - sigma) / sigma


def heat_kernel(d: int, t: float, z: Sequence[int]) -> float:
    """``prod_i exp(-2t) I_{z_i}(2t)``."""
    z = np.abs(np.asarray(z, dtype=np.int64)).ravel()
    if z.size != d:
        raise ValueError(f"offset has {z.size} coordinates, expected {d}")
    if t < 0:
        raise ValueError("t must be >= 0")
    tab = ive_table(int(z.max()), [2.0 * t])[:, 0]
    return float(np.prod(tab[z]))


def heat_kernel_table(d: int, t: float, radius: int) -> np.ndarray:
    """``p_t`` on the whole box ``||z||_inf <= radius`` as a d-dimensional array."""
    row = ive_table(radius, [2.0 * t])[:, 0]
    line = np.concatenate([row[:0:-1], row])
    out = line
    for _ in range(d - 1):
        out = np.multiply.outer(out, line)
    return out


# ------------------------------------------------------------- quadrature

def _log_series_factor(n: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``log(n! * sum_k t^(2k) / (k! (n+k)!))`` = log of ``n! I_n(2t) / t^n``.

    Positive terms only, so the value is accurate to rounding for ``t <= 1``.
    """
    term = np.ones(np.broadcast(n, t).shape)
    acc = term.copy()
    t2 = t * t
    for k in range(1, 40):
        term = term * t2 / (k * (n + k))
        acc += term
        if np.all(term < 1e-17 * acc):
            break
    return np.log(acc)


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances and grids of the two quadrature routes."""

    epsrel: float = 1e-13
    tail_tol: float = 1e-12
    u_start: float = 20.0
    u_max: float = 400.0
    jacobi_nodes: int = 40
    panel_width: float = 0.5
    panel_nodes: int = 16
    route_b_tail_tol: float = 1e-14


def _scales(reps: np.ndarray, sigma: float) -> np.ndarray:
    d = reps.shape[1]
    return (1.0 + np.sqrt((reps.astype(float) ** 2).sum(axis=1))) ** (-(d + 2.0 * sigma))


def _tail(d: int, sigma: float, U: float) -> float:
    """``int_{e^U}^inf (4 pi t)^(-d/2) t^(-1-sigma) dt``; the large-t heat kernel bound."""
    k = 0.5 * d + sigma
    return (4.0 * math.pi) ** (-0.5 * d) * math.exp(-k * U) / k


def _near_route_a(reps, sigma, q: QuadSpec):
    n = reps.astype(float)
    l1 = n.sum(axis=1)
    beta = l1 - sigma
    lognfact = gammaln(n + 1.0).sum(axis=1)
    d = reps.shape[1]

    def f(s):
        if s <= 0:
            return 1.0 / beta
        t = s ** (1.0 / beta)
        val = -2.0 * d * t + _log_series_factor(n, t[:, None]).sum(axis=1)
        return np.exp(val) / beta

    val, err = quad_vec(f, 0.0, 1.0, epsrel=q.epsrel, epsabs=0.0, norm="max")
    # undo the n! normalisation used to keep every component O(1)
    return val * np.exp(-lognfact), err * np.exp(-lognfact)


def _p_at(reps: np.ndarray, t: float) -> np.ndarray:
    tab = ive_table(int(reps.max()), [2.0 * t])[:, 0]
    return np.prod(tab[reps], axis=1)


def _far_route_a(reps, sigma, q: QuadSpec, scale):
    d = reps.shape[1]

    def f(u):
        t = math.exp(u)
        return _p_at(reps, t) * math.exp(-sigma * u) / scale

    U = q.u_start
    total, err = quad_vec(f, 0.0, U, epsrel=q.epsrel, epsabs=0.0, norm="max")
    while True:
        inc, e2 = quad_vec(f, U, 2.0 * U, epsrel=q.epsrel, epsabs=0.0, norm="max")
        total = total + inc
        err = err + e2
        U *= 2.0
        if np.max(np.abs(inc) / np.maximum(total, 1e-300)) < q.tail_tol or U >= q.u_max:
            break
    tail = _tail(d, sigma, U) / scale
    return (total + tail) * scale, (err + tail * 1e-3) * scale, U


def _near_route_b(reps, sigma, q: QuadSpec):
    n = reps.astype(float)
    l1 = reps.sum(axis=1)
    d = reps.shape[1]
    out = np.empty(len(reps))
    for s1 in np.unique(l1):
        sel = l1 == s1
        beta = s1 - sigma
        x, wts = roots_jacobi(q.jacobi_nodes, 0.0, beta - 1.0)
        t = 0.5 * (1.0 + x)
        nn = n[sel]
        logg = (-2.0 * d * t[None, :]
                + _log_series_factor(nn[:, :, None], t[None, None, :]).sum(axis=1)
                - gammaln(nn + 1.0).sum(axis=1)[:, None])
        out[sel] = 2.0 ** (-beta) * (np.exp(logg) * wts[None, :]).sum(axis=1)
    return out


def _far_route_b(reps, sigma, q: QuadSpec):
    d = reps.shape[1]
    k = 0.5 * d + sigma
    # cutoff from the tail bound alone, independent of route A's doubling
    U = max(q.u_start, -math.log(q.route_b_tail_tol * k) / k + 4.0 * math.log(1 + reps.max()))
    U = math.ceil(U / q.panel_width) * q.panel_width
    x, wts = roots_legendre(q.panel_nodes)
    edges = np.arange(0.0, U + 0.5 * q.panel_width, q.panel_width)
    total = np.zeros(len(reps))
    for a, b in zip(edges[:-1], edges[1:]):
        u = 0.5 * (b - a) * x + 0.5 * (a + b)
        tab = ive_table(int(reps.max()), 2.0 * np.exp(u))
        p = np.prod(tab[reps], axis=1)
        total += 0.5 * (b - a) * (p * (np.exp(-sigma * u) * wts)[None, :]).sum(axis=1)
    return total + _tail(d, sigma, U)


@lru_cache(maxsize=32)
def _weights_cached(d: int, sigma: float, rw: int, q: QuadSpec):
    offsets = enumerate_offsets(d, rw)
    keys = np.sort(np.abs(offsets), axis=1)
    reps, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    scale = _scales(reps, sigma)
    near_a, near_err = _near_route_a(reps, sigma, q)
    far_a, far_err, U = _far_route_a(reps, sigma, q, scale)
    a = near_a + far_a
    b = _near_route_b(reps, sigma, q) + _far_route_b(reps, sigma, q)
    c = abs_gamma_neg(sigma)
    return offsets, reps, inverse, a / c, b / c, (near_err + far_err) / c, U


@dataclass(frozen=True, eq=False)
class FractionalWeights:
    """``w(z) = b_sigma(0, z) / |Gamma(-sigma)|`` on ``0 < ||z||_inf <= rw``."""

    d: int
    sigma: float
    rw: int
    offsets: np.ndarray
    values: np.ndarray
    values_alt: np.ndarray
    quad_error: np.ndarray
    tail_mass: float
    representatives: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(self.values.sum())

    @property
    def dual_agreement(self) -> float:
        """Largest relative disagreement between the two quadrature routes."""
        return float(np.max(np.abs(self.values - self.values_alt) / self.values))

    def weight(self, z) -> float:
        z = np.asarray(z, dtype=np.int64).ravel()
        if not 0 < np.abs(z).max() <= self.rw:
            return 0.0
        side = 2 * self.rw + 1
        flat = int(np.ravel_multi_index(tuple(z + self.rw), (side,) * self.d))
        center = (side**self.d) // 2
        return float(self.values[flat - (flat > center)])

    def to_dict(self, include_table: bool = True) -> dict:
        out = {
            "d": self.d,
            "sigma": self.sigma,
            "rw": self.rw,
            "total_mass": self.total_mass,
            "tail_mass": self.tail_mass,
            "dual_agreement": self.dual_agreement,
            "max_quad_error": float(np.max(self.quad_error)),
        }
        out.update(self.meta)
        if include_table:
            out["offsets"] = self.offsets.tolist()
            out["values"] = self.values.tolist()
            out["quad_error"] = self.quad_error.tolist()
        return out


def fractional_weights(d: int, sigma: float, rw: int, quad: Optional[QuadSpec] = None,
                       agreement_tol: float = 1e-9) -> FractionalWeights:
    """Tabulate ``w`` on every offset with ``0 < ||z||_inf <= rw``.

    Values depend only on the sorted ``|z_i|``, so one representative per
    symmetry class is integrated.  ``quad_error`` is the larger of route A's
    own estimate and the route A / route B difference.  Raises if the routes
    disagree by more than ``agreement_tol`` (relative).
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    if rw < 1:
        raise ValueError("rw must be >= 1")
    q = quad or QuadSpec()
    offsets, reps, inv, a, b, err, U = _weights_cached(d, float(sigma), int(rw), q)
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ArithmeticError("quadrature produced a nonpositive weight")
    rel = np.abs(a - b) / a
    if rel.max() > agreement_tol:
        k = int(np.argmax(rel))
        raise ArithmeticError(f"quadrature routes disagree by {rel[k]:.3g} at offset "
                              f"{reps[k].tolist()}")
    qerr = np.maximum(err, np.abs(a - b))
    vals = a[inv]
    # tail beyond the cutoff from the outer shell: w ~ c |z|^-(d+2 sigma)
    shell = np.abs(offsets).max(axis=1) == rw
    norms = np.sqrt((offsets[shell].astype(float) ** 2).sum(axis=1))
    c = float(np.mean(vals[shell] * norms ** (d + 2 * sigma)))
    omega = 2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)
    tail = c * omega * rw ** (-2.0 * sigma) / (2.0 * sigma)
    return FractionalWeights(d, float(sigma), int(rw), offsets, vals, b[inv], qerr[inv], tail,
                             reps, {"route_a_cutoff_log_t": U, "classes": int(len(reps))})


# ------------------------------------------------------------------ graph

@dataclass(frozen=True)
class FractionalSpec:
    """Box of ``||x||_inf <= radius`` with cutoff ``rw`` for the fractional weights."""

    d: int
    sigma: float
    radius: int
    rw: int

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if self.rw < 1 or self.radius <= self.rw:
            raise ValueError("need 1 <= rw < radius")

    def weights(self) -> FractionalWeights:
        return fractional_weights(self.d, self.sigma, self.rw)

    def with_radius(self, radius: int) -> "FractionalSpec":
        return replace(self, radius=int(radius))


def build_fractional_graph(fw: FractionalWeights, box_radius: int,
                           max_nnz: int = MAX_NNZ) -> WeightedGraph:
    """Box ``||x||_inf <= box_radius`` with weights ``w(x - y)`` for
    ``0 < ||x - y||_inf <= rw`` and ``m = 1``.

    The outer ``rw`` layers form the Dirichlet boundary, so every interior
    vertex sees its full neighbourhood.
    """
    d, rw = fw.d, fw.rw
    if box_radius <= rw:
        raise ValueError(f"box radius {box_radius} leaves no interior for rw = {rw}")
    if box_radius < 2 * rw:
        warnings.warn(f"box radius {box_radius} < 2 rw: the interior is thin", stacklevel=2)
    side = 2 * box_radius + 1
    n = side**d
    K = len(fw.offsets)
    if n * K > max_nnz:
        raise MemoryError(f"fractional graph would have up to {n * K} entries (> {max_nnz})")
    side_idx = np.arange(-box_radius, box_radius + 1)
    pts = np.stack(np.meshgrid(*([side_idx] * d), indexing="ij"), axis=-1).reshape(-1, d)
    strides = side ** np.arange(d - 1, -1, -1)
    # CSR assembled offset by offset; offsets are row-major so columns come out sorted
    cols = np.empty((n, K), dtype=np.int32)
    valid = np.empty((n, K), dtype=bool)
    for k, z in enumerate(fw.offsets):
        nb = pts + z
        ok = np.all(np.abs(nb) <= box_radius, axis=1)
        valid[:, k] = ok
        cols[:, k] = ((nb + box_radius) @ strides).astype(np.int32)
    counts = valid.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = cols[valid]
    data = np.broadcast_to(fw.values, (n, K))[valid]
    del cols, valid
    b = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    boundary = np.abs(pts).max(axis=1) > box_radius - rw
    root = int(((pts[:1] * 0 + box_radius) @ strides)[0])
    meta = {"model": "fractional", "d": d, "sigma": fw.sigma, "rw": rw, "radius": box_radius,
            "layer": rw, "tail_mass": fw.tail_mass}
    return WeightedGraph(b, np.ones(n), boundary, coords=pts, root=root, kind="fractional",
                         meta=meta)


# ------------------------------------------------------------------ slopes

@dataclass(frozen=True)
class SlopeFit:
    d: int
    sigma: float
    alpha: float
    box_radius: int
    rw: int
    window: tuple
    slope: float
    expected: float
    rel_error: float
    radii: list
    values: list
    residual: float
    dual_agreement: float
    tail: str = "drop"

    def to_dict(self) -> dict:
        return dict(self.__dict__, window=list(self.window))


def expected_slope(d: int, sigma: float, alpha: float) -> float:
    return 2 * sigma - d if alpha == 0 else -(2 * sigma + d)


def fractional_green_slopes(d: int, sigma: float, alpha: float, box_radius: int, rw: int,
                            window: Optional[tuple] = None, tail: str = "drop") -> SlopeFit:
    """Fit ``log G_alpha^sigma`` against ``log |x|`` along the positive axes.

    The default window is ``[rw/4, 3rw/4]``: close to ``rw`` the truncated
    weights stop carrying the power-law tail, close to the origin the decay
    is not yet asymptotic.  ``tail="drop"`` discards jumps longer than
    ``rw``; ``tail="kill"`` treats their (estimated) mass as leaving the
    domain, i.e. adds it to ``alpha``.
    """
    if tail not in ("drop", "kill"):
        raise ValueError("tail must be 'drop' or 'kill'")
    from .resolvent import green_dirichlet

    if alpha not in (0, 1):
        raise ValueError("alpha must be 0 or 1")
    if alpha == 0 and not 0 < 2 * sigma < d:
        raise ValueError("alpha = 0 requires 0 < 2 sigma < d")
    fw = fractional_weights(d, sigma, rw)
    g = build_fractional_graph(fw, box_radius)
    lo, hi = window or (max(3, rw // 4), max(6, (3 * rw) // 4))
    limit = box_radius - rw
    if hi > limit or hi - lo < 2:
        raise ValueError(f"window {(lo, hi)} too small or beyond the interior radius {limit}")
    shift = float(alpha) + (fw.tail_mass if tail == "kill" else 0.0)
    table = green_dirichlet(g, alpha=shift)
    from .resolvent import residual

    res = residual(table)
    radii = np.arange(lo, hi + 1)
    vals = np.zeros(len(radii))
    for axis in range(d):
        P = np.zeros((len(radii), d), dtype=np.int64)
        P[:, axis] = radii
        vals += table.values[g.index_of(P)]
    vals /= d
    slope = float(np.polyfit(np.log(radii), np.log(vals), 1)[0])
    exp = expected_slope(d, sigma, alpha)
    return SlopeFit(d, float(sigma), float(alpha), int(box_radius), int(rw), (lo, hi), slope, exp,
                    abs(slope - exp) / abs(exp), radii.tolist(), vals.tolist(), res,
                    fw.dual_agreement, tail)
