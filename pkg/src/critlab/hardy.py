"""Hardy weights from positive supersolutions and their diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .builders import TreeSpec, build_regular_tree
from .graph import WeightedGraph, apply_laplacian, quadratic_form


@dataclass(frozen=True, eq=False)
class HardyWeightTable:
    """``W = (Delta v) / v`` with ``v = phi^(1/2)`` on the interior.

    ``W`` is NaN on the boundary layer.  ``boundary_adjacent`` marks
    interior vertices whose value depends on boundary data of ``phi``.
    """

    graph: WeightedGraph
    phi: np.ndarray
    W: np.ndarray
    v: np.ndarray
    oscillation_sup: float
    properness: dict
    identity_residual: float
    boundary_adjacent: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def min_weight(self) -> float:
        return float(np.nanmin(self.W))

    def to_dict(self, include_values: bool = True) -> dict:
        out = {
            "oscillation_sup": self.oscillation_sup,
            "properness": self.properness,
            "identity_residual": self.identity_residual,
            "min_weight": self.min_weight,
            "max_weight": float(np.nanmax(self.W)),
        }
        out.update(self.meta)
        if include_values:
            g = self.graph
            out["coords"] = g.coords.tolist() if g.coords is not None else None
            out["phi"] = self.phi.tolist()
            out["W"] = [None if np.isnan(w) else float(w) for w in self.W]
        return out


def _neighbours_of(g: WeightedGraph, mask: np.ndarray) -> np.ndarray:
    return (np.asarray(g.b @ mask.astype(float)).ravel() > 0) | mask


def _require_positive(g: WeightedGraph, phi: np.ndarray):
    need = _neighbours_of(g, g.interior)
    bad = need & ~(phi > 0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        where = "boundary neighbour" if g.boundary[k] else "interior vertex"
        raise ValueError(f"phi must be strictly positive on the interior and its neighbours; "
                         f"{where} {k} has phi = {phi[k]!r}")


def oscillation_and_properness(g: WeightedGraph, phi, band_width: float = 0.5) -> dict:
    """``sup phi(x)/phi(y)`` over interior-incident edges, and level-band counts.

    Bands are slices of ``log phi`` of width ``band_width``.  On a finite
    truncation properness is proxied by ``proper_within_truncation``: the
    superlevel set ``{phi > max over the boundary layer}`` avoids the
    boundary, so every band above that level is finite and fully resolved.
    """
    phi = np.asarray(phi, dtype=float)
    _require_positive(g, phi)
    i, j, _ = g.edges
    keep = g.interior[i] | g.interior[j]
    i, j = i[keep], j[keep]
    ratio = phi[i] / phi[j]
    osc = float(np.max(np.maximum(ratio, 1.0 / ratio))) if i.size else 1.0
    lp = np.log(phi[_neighbours_of(g, g.interior)])
    if np.ptp(lp) == 0:
        counts = np.array([lp.size])
    else:
        nb = max(1, int(np.ceil(np.ptp(lp) / band_width)))
        counts, _ = np.histogram(lp, bins=nb)
    top_boundary = float(np.max(phi[g.boundary])) if g.boundary.any() else -np.inf
    above = phi > top_boundary
    proper = bool(np.all(g.interior[above])) and bool(above.any())
    return {
        "oscillation_sup": osc,
        "band_width": band_width,
        "max_band_size": int(counts.max()),
        "band_sizes": counts.tolist(),
        "boundary_level": top_boundary,
        "proper_within_truncation": proper,
    }


def supersolution_hardy(g: WeightedGraph, phi) -> HardyWeightTable:
    """Hardy weight ``W = Delta(phi^(1/2)) / phi^(1/2)`` for a positive ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.n,):
        raise ValueError(f"phi has shape {phi.shape}, graph has {g.n} vertices")
    _require_positive(g, phi)
    v = np.sqrt(np.where(phi > 0, phi, 0.0))
    lap = apply_laplacian(g, v)
    W = np.full(g.n, np.nan)
    inner = g.interior
    W[inner] = lap[inner] / v[inner]
    # (Delta - W) v at interior vertices, relative to the local scale deg * v
    res = (apply_laplacian(g, v) - W * v)[inner]
    scale = (g.degree * v / g.m)[inner]
    ident = float(np.max(np.abs(res) / scale)) if inner.any() else 0.0
    diag = oscillation_and_properness(g, phi)
    adj = inner & (np.asarray(g.b @ g.boundary.astype(float)).ravel() > 0)
    return HardyWeightTable(g, phi, W, v, diag["oscillation_sup"], diag, ident, adj)


def tree_ground_state(spec: TreeSpec, base: Optional[float] = None
                      ) -> tuple[np.ndarray, HardyWeightTable]:
    """``v(x) = |x|^(1/2) base^(-|x|/2)`` with ``v(o) = 1`` and its weight ``W = Delta v / v``.

    ``base`` defaults to the vertex degree.  The value of ``W`` on the first
    sphere depends on the choice ``v(o) = 1``.
    """
    g = build_regular_tree(spec)
    q = float(spec.degree if base is None else base)
    if q <= 0:
        raise ValueError("base must be positive")
    depth = g.coords[:, 0].astype(float)
    v = np.sqrt(depth) * q ** (-depth / 2.0)
    v[depth == 0] = 1.0
    table = supersolution_hardy(g, v * v)
    meta = {"base": q, "v_root": 1.0}
    return v, HardyWeightTable(table.graph, table.phi, table.W, v, table.oscillation_sup,
                               table.properness, table.identity_residual,
                               table.boundary_adjacent, meta)


def hardy_form_check(table: HardyWeightTable, n_tests: int = 200, seed: int = 0) -> dict:
    """Spot check of ``Q_{Delta - W}(psi) >= 0`` on interior-supported ``psi``.

    The battery mixes white noise, localised bumps and ``v``-profiled cutoffs
    (which make the form nearly vanish).  Returns the smallest value of
    ``Q(psi) / ||psi||^2`` and the index of the test achieving it.
    """
    g = table.graph
    rng = np.random.default_rng(seed)
    inner = np.flatnonzero(g.interior)
    V = np.zeros(g.n)
    V[inner] = -table.W[inner] * g.m[inner]
    dist = g.distance
    rmax = float(dist[inner].max()) if inner.size else 0.0
    worst, arg, vals = np.inf, -1, []
    for k in range(n_tests):
        psi = np.zeros(g.n)
        kind = k % 3
        if kind == 0:
            psi[inner] = rng.standard_normal(inner.size)
        elif kind == 1:
            c = rng.choice(inner)
            width = 1.0 + rng.uniform(0, max(rmax, 1.0) / 3)
            dc = _distance_from(g, c)
            psi[inner] = np.exp(-(dc[inner] / width) ** 2)
        else:
            cut = rng.uniform(0.3, 1.0) * rmax
            psi[inner] = table.v[inner] * np.clip(1.0 - dist[inner] / max(cut, 1.0), 0, None)
        norm2 = float(np.sum(g.m * psi**2))
        if norm2 == 0:
            continue
        q = quadratic_form(g, V, psi) / norm2
        vals.append(q)
        if q < worst:
            worst, arg = q, k
    return {"min_normalized_form": float(worst), "argmin": arg, "tests": len(vals)}


def _distance_from(g: WeightedGraph, c: int) -> np.ndarray:
    if g.coords is not None and g.kind in ("lattice", "fractional"):
        rel = (g.coords - g.coords[c]).astype(float)
        return np.sqrt((rel**2).sum(axis=1))
    from scipy.sparse.csgraph import shortest_path

    return shortest_path(g.b, indices=c, unweighted=True, directed=False)
