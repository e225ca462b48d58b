"""Linear-algebra backends: SPD solves, positivity tests, smallest eigenvalues.

All operator matrices built by :mod:`critlab.graph` are symmetric Z-matrices
(nonpositive off-diagonal).  Two facts are used throughout:

* LU without pivoting of a symmetric positive definite Z-matrix (an
  M-matrix) involves no cancellation in the triangular solves, so the
  solution of ``A u = e_o`` is accurate componentwise, including in the
  exponentially small tail of a Green function.  SuperLU is therefore run in
  symmetric mode with the diagonal as pivot.
* A symmetric Z-matrix is positive definite iff every pivot of that
  factorisation is positive (Sylvester inertia for M-matrices), which gives
  an exact sign test for the smallest eigenvalue.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DIRECT_SMALL_N = 15_000
DIRECT_SPARSE_MAX_N = 1_500_000
DIRECT_SPARSE_ROW_NNZ = 5.5
DENSE_EIG_MAX_N = 2_500
DENSE_SIGN_MAX_N = 400
CG_RTOL = 1e-12


class SolverError(RuntimeError):
    pass


def _splu(A: sp.spmatrix):
    return spla.splu(
        sp.csc_matrix(A),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )


def _pivots(A) -> np.ndarray | None:
    """Diagonal of ``D`` in ``A = L D L^T`` under a symmetric ordering, or
    ``None`` if SuperLU had to leave the diagonal (a zero pivot)."""
    try:
        with np.errstate(all="ignore"):
            lu = _splu(A)
    except RuntimeError:  # exactly singular
        return None
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None
    return lu.U.diagonal()


def use_direct(A: sp.spmatrix) -> bool:
    """Direct factorisation for small systems and for very sparse rows
    (paths, trees, planar grids) where fill-in stays near linear."""
    n = A.shape[0]
    if n <= DIRECT_SMALL_N:
        return True
    return n <= DIRECT_SPARSE_MAX_N and A.nnz <= DIRECT_SPARSE_ROW_NNZ * n


def _preconditioner(A: sp.csr_matrix):
    n = A.shape[0]
    if A.nnz <= 30 * n:
        try:
            import pyamg
        except ImportError:  # pragma: no cover - pyamg is a declared dependency
            pyamg = None
        if pyamg is not None:
            ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
            return ml.aspreconditioner(cycle="V")
    d = A.diagonal()
    return spla.LinearOperator(A.shape, matvec=lambda x: x / d, dtype=float)


def solve_spd(A, rhs, *, rtol: float = CG_RTOL, direct: bool | None = None, x0=None) -> np.ndarray:
    """Solve ``A x = rhs`` for a symmetric positive definite Z-matrix ``A``."""
    A = sp.csr_matrix(A)
    rhs = np.asarray(rhs, dtype=float)
    if direct is None:
        direct = use_direct(A)
    if direct:
        lu = _splu(A)
        if not np.array_equal(lu.perm_r, lu.perm_c) or not np.all(lu.U.diagonal() > 0):
            raise SolverError("matrix is not positive definite (nonpositive pivot)")
        return lu.solve(rhs)
    x, info = spla.cg(A, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=20 * A.shape[0],
                      M=_preconditioner(A))
    if info != 0:
        raise SolverError(f"CG did not converge (info={info})")
    return x


def is_positive_definite(A) -> bool:
    """Exact sign test for a symmetric Z-matrix via the pivots of its LDL^T."""
    A = sp.csr_matrix(A)
    if A.shape[0] <= DENSE_SIGN_MAX_N:
        return bool(sla.eigvalsh(A.toarray(), subset_by_index=[0, 0])[0] > 0)
    piv = _pivots(A)
    return piv is not None and bool(np.all(np.isfinite(piv)) and np.all(piv > 0))


def smallest_eigenvalue(A, mdiag=None) -> float:
    """Smallest eigenvalue of the pencil ``(A, diag(mdiag))``."""
    A = sp.csr_matrix(A)
    if mdiag is not None:
        s = 1.0 / np.sqrt(np.asarray(mdiag, dtype=float))
        A = sp.csr_matrix(sp.diags(s) @ A @ sp.diags(s))
    n = A.shape[0]
    if n <= DENSE_EIG_MAX_N:
        return float(sla.eigvalsh(A.toarray(), subset_by_index=[0, 0])[0])
    if is_positive_definite(A):
        # all eigenvalues positive: the one closest to 0 is the smallest
        vals = spla.eigsh(A, k=1, sigma=0.0, which="LM", tol=1e-12, return_eigenvectors=False)
    else:
        vals = spla.eigsh(A, k=1, which="SA", tol=1e-10, return_eigenvectors=False)
    return float(vals[0])


def tridiagonal_smallest_eigenvalue(diag, off) -> float:
    return float(sla.eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0])
