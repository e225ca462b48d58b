"""Weighted graphs over a measure space and the Schrödinger operators on them.

A :class:`WeightedGraph` is a finite truncation of an infinite graph: edge
weights ``b`` (symmetric, zero diagonal, nonnegative), a strictly positive
vertex measure ``m`` and a boundary mask marking the Dirichlet ghost layer.
Operator values are only trusted at interior vertices; boundary entries of
:func:`apply_laplacian` are returned as NaN.

Vertex functions and potentials are plain float arrays indexed by vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Finite truncation of a weighted graph ``b`` over ``(X, m)``.

    ``coords`` is an optional integer label map (lattice coordinates, or the
    depth column for trees); ``root`` is the index of the distinguished
    vertex ``o``.
    """

    b: sp.csr_matrix
    m: np.ndarray
    boundary: np.ndarray
    coords: Optional[np.ndarray] = None
    root: int = 0
    kind: str = "graph"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        b = sp.csr_matrix(self.b, dtype=float)
        b.sum_duplicates()
        b.sort_indices()
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))
        object.__setattr__(self, "boundary", np.asarray(self.boundary, dtype=bool))
        n = b.shape[0]
        if b.shape != (n, n):
            raise ValueError(f"b must be square, got {b.shape}")
        if self.m.shape != (n,) or self.boundary.shape != (n,):
            raise ValueError("m and boundary must have one entry per vertex")
        if self.coords is not None and len(self.coords) != n:
            raise ValueError("coords must have one row per vertex")
        if not 0 <= self.root < n:
            raise ValueError(f"root {self.root} out of range")
        if not np.all(np.isfinite(b.data)) or np.any(b.data < 0):
            raise ValueError("edge weights must be finite and nonnegative")
        if b.diagonal().any():
            raise ValueError("b must have zero diagonal")
        asym = b - b.T
        if asym.nnz and np.abs(asym.data).max() > 0:
            raise ValueError("b must be symmetric")
        if not np.all(np.isfinite(self.m)) or np.any(self.m <= 0):
            bad = int(np.flatnonzero(~(self.m > 0))[0])
            raise ValueError(f"vertex measure must be strictly positive (vertex {bad})")
        if self.boundary[self.root]:
            raise ValueError("root must be an interior vertex")
        inner = np.flatnonzero(~self.boundary)
        ncomp, _ = connected_components(b[inner][:, inner], directed=False)
        if ncomp != 1:
            raise ValueError(f"interior is not connected ({ncomp} components)")

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    @cached_property
    def degree(self) -> np.ndarray:
        """Weighted degree ``sum_y b(x, y)``."""
        return np.asarray(self.b.sum(axis=1)).ravel()

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each unordered pair once: ``(i, j, w)`` with ``i < j``."""
        up = sp.triu(self.b, k=1).tocoo()
        order = np.lexsort((up.col, up.row))
        return up.row[order], up.col[order], up.data[order]

    @cached_property
    def _lookup(self):
        lo = self.coords.min(axis=0)
        shape = tuple(self.coords.max(axis=0) - lo + 1)
        table = np.full(shape, -1, dtype=np.int64)
        table[tuple((self.coords - lo).T)] = np.arange(self.n)
        return lo, table

    def index_of(self, points) -> np.ndarray:
        """Vertex indices of integer label rows; ``-1`` where absent."""
        if self.coords is None:
            raise ValueError("graph has no coordinate labels")
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        lo, table = self._lookup
        rel = pts - lo
        ok = np.all((rel >= 0) & (rel < np.array(table.shape)), axis=1)
        out = np.full(len(pts), -1, dtype=np.int64)
        out[ok] = table[tuple(rel[ok].T)]
        return out

    @cached_property
    def distance(self) -> np.ndarray:
        """Distance of every vertex to the root.

        Trees carry their depth as label; lattices use the Euclidean norm of
        the coordinate offset; other graphs use combinatorial distance.
        """
        if self.kind == "tree":
            return self.coords[:, 0].astype(float)
        if self.coords is not None and self.kind in ("lattice", "fractional"):
            rel = self.coords - self.coords[self.root]
            return np.sqrt((rel.astype(float) ** 2).sum(axis=1))
        from scipy.sparse.csgraph import breadth_first_order

        order, pred = breadth_first_order(self.b, self.root, directed=False)
        dist = np.full(self.n, np.inf)
        dist[self.root] = 0.0
        for v in order[1:]:
            dist[v] = dist[pred[v]] + 1.0
        return dist

    def operator_matrix(self, potential=None, alpha: float = 0.0) -> sp.csr_matrix:
        """Interior block of ``D - B + diag(V) + alpha*M`` (m-unnormalised).

        This is the matrix of the quadratic form restricted to functions that
        vanish on the boundary layer, so it is symmetric.
        """
        diag = self.degree + alpha * self.m
        if potential is not None:
            diag = diag + np.asarray(potential, dtype=float)
        inner = np.flatnonzero(self.interior)
        full = sp.diags(diag) - self.b
        return sp.csr_matrix(full[inner][:, inner])


def _check(g: WeightedGraph, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (g.n,):
        raise ValueError(f"vertex function has shape {f.shape}, graph has {g.n} vertices")
    return f


def apply_laplacian(g: WeightedGraph, f) -> np.ndarray:
    """``(1/m(x)) sum_y b(x,y) (f(x) - f(y))``; NaN on the boundary layer."""
    f = _check(g, f)
    out = (g.degree * f - g.b @ f) / g.m
    out[g.boundary] = np.nan
    return out


def apply_schrodinger(g: WeightedGraph, V, f) -> np.ndarray:
    f = _check(g, f)
    V = _check(g, V)
    return apply_laplacian(g, f) + V / g.m * f


def _interior_supported(g: WeightedGraph, phi: np.ndarray, name: str = "phi"):
    if np.any(phi[g.boundary] != 0):
        raise ValueError(f"{name} must vanish on the boundary layer")


def quadratic_form(g: WeightedGraph, V, phi) -> float:
    """``(1/2) sum_{x,y} b (phi(x) - phi(y))^2 + sum_x V phi^2``.

    With ``H = Delta + V/m`` this equals ``sum_x m (H phi) phi`` exactly.
    """
    phi = _check(g, phi)
    V = _check(g, V)
    _interior_supported(g, phi)
    i, j, w = g.edges
    return float(np.sum(w * (phi[i] - phi[j]) ** 2) + np.sum(V * phi**2))


def green_pairing(g: WeightedGraph, V, f, h) -> float:
    """``sum_x m(x) (H f)(x) h(x)`` over interior vertices (h interior-supported)."""
    h = _check(g, h)
    _interior_supported(g, h, "h")
    Hf = apply_schrodinger(g, V, f)
    inner = g.interior
    return float(np.sum(g.m[inner] * Hf[inner] * h[inner]))


def ground_state_transform_check(g: WeightedGraph, V, f, phi) -> tuple[float, float]:
    """Both sides of the ground state transform for ``Q(f * phi)``.

    ``rhs = (1/2) sum b f(x) f(y) (phi(x) - phi(y))^2 + sum m f (H f) phi^2``
    where ``H`` carries the ``1/m`` factor, hence the explicit ``m`` weight.
    """
    f = _check(g, f)
    phi = _check(g, phi)
    V = _check(g, V)
    if np.any(f <= 0):
        raise ValueError("f must be strictly positive")
    _interior_supported(g, phi)
    lhs = quadratic_form(g, V, f * phi)
    i, j, w = g.edges
    Hf = apply_schrodinger(g, V, f)
    inner = g.interior
    pot = np.sum(g.m[inner] * f[inner] * Hf[inner] * phi[inner] ** 2)
    rhs = float(np.sum(w * f[i] * f[j] * (phi[i] - phi[j]) ** 2) + pot)
    return lhs, rhs


def pointwise_max(u, v) -> np.ndarray:
    return np.maximum(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


def subharmonic_sample(g: WeightedGraph, V, source) -> np.ndarray:
    """Solve ``H u = -source`` on the interior with zero boundary values.

    Requires ``H`` to be positive on the truncation; then ``u <= 0`` and
    ``H u <= 0`` by construction.
    """
    from .solvers import smallest_eigenvalue, solve_spd

    V = _check(g, V)
    source = _check(g, source)
    if np.any(source < 0):
        raise ValueError("source must be nonnegative")
    A = g.operator_matrix(V)
    inner = np.flatnonzero(g.interior)
    lam = smallest_eigenvalue(A, g.m[inner])
    if lam < 0:
        raise ValueError(f"H is not positive on the truncation: smallest eigenvalue {lam:.6g}")
    u = np.zeros(g.n)
    if np.any(source):
        u[inner] = solve_spd(A, -(g.m * source)[inner])
    return u


@dataclass(frozen=True)
class EdgeRatio:
    """Minimal ``C`` with ``b1 |u| x |u| <= C b2 v x v``, plus the maximising edge."""

    value: float
    edge: Optional[tuple[int, int]]

    def __float__(self) -> float:
        return self.value


def edge_ratio_sup(b1: WeightedGraph, u, b2: WeightedGraph, v) -> EdgeRatio:
    """Sup over interior-incident ``b1`` edges of ``b1 |u(x)||u(y)| / (b2 v(x) v(y))``."""
    u = np.abs(_check(b1, u))
    v = _check(b2, v)
    if b1.n != b2.n:
        raise ValueError("graphs must share the vertex set")
    if np.any(v <= 0):
        raise ValueError("v must be strictly positive")
    i, j, w1 = b1.edges
    keep = b1.interior[i] | b1.interior[j]
    i, j, w1 = i[keep], j[keep], w1[keep]
    if i.size == 0:
        return EdgeRatio(0.0, None)
    w2 = np.asarray(b2.b[i, j]).ravel()
    num = w1 * u[i] * u[j]
    missing = (w2 == 0) & (num > 0)
    if np.any(missing):
        k = int(np.flatnonzero(missing)[0])
        return EdgeRatio(float("inf"), (int(i[k]), int(j[k])))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(num > 0, num / (w2 * v[i] * v[j]), 0.0)
    k = int(np.argmax(ratio))
    return EdgeRatio(float(ratio[k]), (int(i[k]), int(j[k])))


def induced_subgraph(g: WeightedGraph, keep, root: Optional[int] = None) -> tuple[WeightedGraph, np.ndarray]:
    """Restriction to ``keep`` (mask or indices), order preserved.

    Kept vertices that were boundary, or lose a neighbour, form the new
    boundary layer.  Returns the subgraph and the kept original indices.
    """
    keep = np.asarray(keep)
    idx = np.flatnonzero(keep) if keep.dtype == bool else np.sort(keep.astype(np.int64))
    mask = np.zeros(g.n, dtype=bool)
    mask[idx] = True
    lost = np.asarray(g.b[idx][:, ~mask].sum(axis=1)).ravel() > 0
    boundary = g.boundary[idx] | lost
    old_root = g.root if root is None else root
    pos = np.searchsorted(idx, old_root)
    if pos >= idx.size or idx[pos] != old_root:
        raise ValueError("root is not kept")
    coords = None if g.coords is None else g.coords[idx]
    meta = dict(g.meta)
    meta.pop("names", None)
    if g.meta.get("names") is not None:
        meta["names"] = [g.meta["names"][k] for k in idx]
    sub = WeightedGraph(g.b[idx][:, idx], g.m[idx], boundary, coords=coords, root=int(pos),
                        kind=g.kind, meta=meta)
    return sub, idx
