"""Random weighted graphs with a Dirichlet layer, shared by several test modules."""
import numpy as np
import scipy.sparse as sp

from critlab.graph import WeightedGraph


def random_instance(rng, n_inner=None, n_bnd=None, extra=None):
    """Connected interior on a random tree plus chords; boundary vertices hang off it.

    Returns ``(graph, V)`` with ``V >= 0``, so the Dirichlet operator is positive definite.
    """
    k = int(rng.integers(3, 25)) if n_inner is None else n_inner
    nb = int(rng.integers(1, 6)) if n_bnd is None else n_bnd
    n = k + nb
    rows, cols = [], []
    for v in range(1, k):
        rows.append(v)
        cols.append(int(rng.integers(0, v)))
    for _ in range(int(rng.integers(0, 2 * k)) if extra is None else extra):
        a, c = rng.choice(k, 2, replace=False)
        rows.append(int(a))
        cols.append(int(c))
    for v in range(k, n):
        for c in rng.choice(k, int(rng.integers(1, 3)), replace=False):
            rows.append(v)
            cols.append(int(c))
    w = rng.uniform(0.1, 3.0, len(rows))
    b = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    b = sp.csr_matrix((b + b.T) / 2)
    b.data[:] = np.round(b.data, 6) + 0.0  # keep symmetric sums exact
    b = sp.csr_matrix(np.maximum(b.toarray(), b.toarray().T))
    m = rng.uniform(0.5, 2.0, n)
    boundary = np.arange(n) >= k
    V = rng.uniform(0.0, 2.0, n)
    return WeightedGraph(b, m, boundary, root=0), V
