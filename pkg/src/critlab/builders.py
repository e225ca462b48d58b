"""Model graphs: boxes and balls in Z^d, balls in regular trees, TSV graph files."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import WeightedGraph

MAX_VERTICES = 20_000_000

NORMS = ("linf", "l1", "l2")


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    """Truncation of Z^d with standard weights ``b(x,y) = 1_{|x-y|=1}`` and ``m = 1``."""

    d: int
    radius: int
    norm_kind: str = "linf"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.norm_kind not in NORMS:
            raise ValueError(f"norm_kind must be one of {NORMS}")

    def with_radius(self, radius: int) -> "LatticeSpec":
        return replace(self, radius=int(radius))


@dataclass(frozen=True)
class TreeSpec:
    """Ball of combinatorial radius ``radius`` in the ``degree``-regular tree."""

    degree: int
    radius: int

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError("degree must be >= 2")
        if self.radius < 2:
            raise ValueError("radius must be >= 2")

    def with_radius(self, radius: int) -> "TreeSpec":
        return replace(self, radius=int(radius))

    def sphere_sizes(self) -> np.ndarray:
        d = self.degree
        return np.array([1] + [d * (d - 1) ** (k - 1) for k in range(1, self.radius + 1)],
                        dtype=np.int64)


def _guard(n: int, limit: int):
    if n > limit:
        raise ValueError(f"truncation has {n} vertices, above the limit {limit}")


def _lattice_points(d: int, radius: int, norm_kind: str) -> np.ndarray:
    side = np.arange(-radius, radius + 1)
    grid = np.stack(np.meshgrid(*([side] * d), indexing="ij"), axis=-1).reshape(-1, d)
    if norm_kind == "l1":
        grid = grid[np.abs(grid).sum(axis=1) <= radius]
    elif norm_kind == "l2":
        grid = grid[(grid.astype(np.int64) ** 2).sum(axis=1) <= radius * radius]
    return grid


def build_lattice(spec: LatticeSpec, max_vertices: int = MAX_VERTICES) -> WeightedGraph:
    """Lattice points with ``norm <= radius`` in row-major order, unit weights, ``m = 1``.

    Boundary vertices are those with a lattice neighbour outside the set.
    """
    d, R = spec.d, spec.radius
    _guard((2 * R + 1) ** d, max_vertices)
    pts = _lattice_points(d, R, spec.norm_kind)
    n = len(pts)
    lookup = np.full((2 * R + 3,) * d, -1, dtype=np.int64)
    lookup[tuple((pts + R + 1).T)] = np.arange(n)
    rows, cols = [], []
    boundary = np.zeros(n, dtype=bool)
    for k in range(d):
        for step in (1, -1):
            nb = pts.copy()
            nb[:, k] += step
            idx = lookup[tuple((nb + R + 1).T)]
            boundary |= idx < 0
            if step == 1:
                ok = idx >= 0
                rows.append(np.flatnonzero(ok))
                cols.append(idx[ok])
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    w = np.ones(2 * i.size)
    b = sp.csr_matrix((w, (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    root = int(lookup[(R + 1,) * d])
    meta = {"model": "lattice", "d": d, "radius": R, "norm_kind": spec.norm_kind}
    return WeightedGraph(b, np.ones(n), boundary, coords=pts, root=root, kind="lattice", meta=meta)


def build_regular_tree(spec: TreeSpec, max_vertices: int = MAX_VERTICES) -> WeightedGraph:
    """Breadth-first indexed ball; the root has ``d`` children, other vertices ``d - 1``.

    The single coordinate column stores the depth ``|x|``.
    """
    sizes = spec.sphere_sizes()
    n = int(sizes.sum())
    _guard(n, max_vertices)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    depth = np.repeat(np.arange(spec.radius + 1), sizes)
    child, parent = [], []
    for k in range(1, spec.radius + 1):
        local = np.arange(sizes[k])
        par_local = np.zeros_like(local) if k == 1 else local // (spec.degree - 1)
        child.append(starts[k] + local)
        parent.append(starts[k - 1] + par_local)
    c = np.concatenate(child)
    p = np.concatenate(parent)
    w = np.ones(2 * c.size)
    b = sp.csr_matrix((w, (np.concatenate([c, p]), np.concatenate([p, c]))), shape=(n, n))
    boundary = depth == spec.radius
    meta = {"model": "tree", "degree": spec.degree, "radius": spec.radius}
    return WeightedGraph(b, np.ones(n), boundary, coords=depth[:, None], root=0, kind="tree",
                         meta=meta)


def build(spec, **kw) -> WeightedGraph:
    if isinstance(spec, LatticeSpec):
        return build_lattice(spec, **kw)
    if isinstance(spec, TreeSpec):
        return build_regular_tree(spec, **kw)
    from .fractional import FractionalSpec, build_fractional_graph

    if isinstance(spec, FractionalSpec):
        return build_fractional_graph(spec.weights(), spec.radius)
    raise TypeError(f"unsupported model spec {spec!r}")


def spec_from_dict(data: dict):
    """``{"kind": "lattice", "d": 3, "radius": 30}`` or ``{"kind": "tree", ...}``."""
    data = dict(data)
    kind = data.pop("kind", None)
    if kind == "lattice":
        return LatticeSpec(int(data["d"]), int(data["radius"]), data.get("norm_kind", "linf"))
    if kind == "tree":
        return TreeSpec(int(data["degree"]), int(data["radius"]))
    if kind == "fractional":
        from .fractional import FractionalSpec

        return FractionalSpec(int(data["d"]), float(data["sigma"]), int(data["radius"]),
                              int(data["rw"]))
    raise ValueError(f"unknown model kind {kind!r}")


def load_spec(path) -> object:
    return spec_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- TSV files

def _vertex_name(g: WeightedGraph, k: int) -> str:
    names = g.meta.get("names")
    if names is not None:
        return names[k]
    if g.coords is not None and g.kind == "lattice":
        return ",".join(str(int(c)) for c in g.coords[k])
    return str(k)


def write_graph(g: WeightedGraph, edge_path, vertex_path, potential=None) -> None:
    """Write ``x<TAB>y<TAB>weight`` and ``x<TAB>m<TAB>V<TAB>is_boundary`` files."""
    V = np.zeros(g.n) if potential is None else np.asarray(potential, dtype=float)
    names = [_vertex_name(g, k) for k in range(g.n)]
    with open(vertex_path, "w") as fh:
        for k in range(g.n):
            fh.write(f"{names[k]}\t{float(g.m[k])!r}\t{float(V[k])!r}\t{int(g.boundary[k])}\n")
    i, j, w = g.edges
    with open(edge_path, "w") as fh:
        for a, c, x in zip(i.tolist(), j.tolist(), w.tolist()):
            fh.write(f"{names[a]}\t{names[c]}\t{x!r}\n")


def _fields(line: str, lineno: int, path, count: int) -> list[str]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != count:
        raise GraphFormatError(f"{path}:{lineno}: expected {count} tab-separated fields, "
                               f"got {len(parts)}")
    return parts


def _float(text: str, lineno: int, path) -> float:
    try:
        val = float(text)
    except ValueError:
        raise GraphFormatError(f"{path}:{lineno}: not a number: {text!r}") from None
    if not math.isfinite(val):
        raise GraphFormatError(f"{path}:{lineno}: non-finite value {text!r}")
    return val


def load_graph(edge_path, vertex_path, root: str | None = None, with_potential: bool = False):
    """Read and validate a graph from the TSV pair written by :func:`write_graph`.

    Returns the graph, or ``(graph, V)`` when ``with_potential`` is set.
    """
    names: list[str] = []
    index: dict[str, int] = {}
    m, V, bnd = [], [], []
    with open(vertex_path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            x, ms, vs, bs = _fields(line, lineno, vertex_path, 4)
            if x in index:
                raise GraphFormatError(f"{vertex_path}:{lineno}: duplicate vertex {x!r}")
            mv = _float(ms, lineno, vertex_path)
            if mv <= 0:
                raise GraphFormatError(f"{vertex_path}:{lineno}: vertex {x!r} has "
                                       f"nonpositive measure {mv!r}")
            if bs not in ("0", "1"):
                raise GraphFormatError(f"{vertex_path}:{lineno}: is_boundary must be 0 or 1")
            index[x] = len(names)
            names.append(x)
            m.append(mv)
            V.append(_float(vs, lineno, vertex_path))
            bnd.append(bs == "1")
    seen: dict[tuple[int, int], tuple[float, int]] = {}
    rows, cols, vals = [], [], []
    with open(edge_path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            x, y, ws = _fields(line, lineno, edge_path, 3)
            for v in (x, y):
                if v not in index:
                    raise GraphFormatError(f"{edge_path}:{lineno}: unknown vertex {v!r}")
            if x == y:
                raise GraphFormatError(f"{edge_path}:{lineno}: self-loop at {x!r}")
            w = _float(ws, lineno, edge_path)
            if w < 0:
                raise GraphFormatError(f"{edge_path}:{lineno}: negative weight {w!r}")
            a, c = index[x], index[y]
            key = (min(a, c), max(a, c))
            if key in seen:
                prev, prev_line = seen[key]
                what = "asymmetric duplicate" if prev != w else "duplicate"
                raise GraphFormatError(f"{edge_path}:{lineno}: {what} edge {x!r}-{y!r} "
                                       f"(first given on line {prev_line} with weight {prev!r})")
            seen[key] = (w, lineno)
            rows += [a, c]
            cols += [c, a]
            vals += [w, w]
    n = len(names)
    b = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    coords = _parse_coords(names)
    kind = "lattice" if coords is not None else "file"
    root_idx = 0
    if root is not None:
        root_idx = index[root]
    elif coords is not None:
        hit = np.flatnonzero(~np.any(coords, axis=1))
        root_idx = int(hit[0]) if hit.size else 0
    g = WeightedGraph(b, np.array(m), np.array(bnd), coords=coords, root=root_idx, kind=kind,
                      meta={"model": "file", "names": names})
    return (g, np.array(V)) if with_potential else g


def _parse_coords(names: list[str]):
    try:
        rows = [tuple(int(p) for p in s.split(",")) for s in names]
    except ValueError:
        return None
    if not rows or len({len(r) for r in rows}) != 1:
        return None
    return np.array(rows, dtype=np.int64)


def axis_points(d: int, radius: int) -> np.ndarray:
    """``n e_1`` for ``n = 0..radius``."""
    pts = np.zeros((radius + 1, d), dtype=np.int64)
    pts[:, 0] = np.arange(radius + 1)
    return pts


def diagonal_points(d: int, radius: int) -> np.ndarray:
    """``n (1,...,1)`` for ``n = 0..radius``."""
    return np.repeat(np.arange(radius + 1)[:, None], d, axis=1).astype(np.int64)


def enumerate_offsets(d: int, radius: int) -> np.ndarray:
    """All ``z`` with ``0 < ||z||_inf <= radius`` in row-major order."""
    side = range(-radius, radius + 1)
    return np.array([z for z in itertools.product(side, repeat=d) if any(z)], dtype=np.int64)
