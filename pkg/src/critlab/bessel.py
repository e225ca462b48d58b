"""Exponentially scaled modified Bessel functions of integer order.

``ive_table(nmax, x)`` returns ``exp(-x) * I_n(x)`` for ``n = 0..nmax`` at
every ``x >= 0``.  Three regimes are used:

* ``x <= 1e-3``: the ascending power series (a handful of terms suffices),
* moderate ``x``: Miller's backward recurrence normalised with
  ``exp(-x) * (I_0 + 2 * sum_k I_k) = 1``,
* ``x >= max(60, 2 * nmax**2)``: the Hankel asymptotic expansion.

The recurrence produces every order at once, which is what the lattice heat
kernel needs (one call per quadrature node vector).
"""
from __future__ import annotations

import math

import numpy as np

_SERIES_MAX = 1e-3
_HUGE = 1e250


def _series(nmax: int, x: np.ndarray) -> np.ndarray:
    out = np.zeros((nmax + 1, x.size))
    half = x / 2.0
    q = half * half
    scale = np.exp(-x)
    lead = np.ones_like(x)  # (x/2)^n / n!, built up as a running product
    for n in range(nmax + 1):
        if n:
            lead = lead * half / n
        term = lead
        acc = term.copy()
        for k in range(1, 8):
            term = term * q / (k * (k + n))
            acc += term
        out[n] = acc * scale
    return out


def _asymptotic(nmax: int, x: np.ndarray) -> np.ndarray:
    out = np.empty((nmax + 1, x.size))
    inv8x = 1.0 / (8.0 * x)
    pref = 1.0 / np.sqrt(2.0 * np.pi * x)
    for n in range(nmax + 1):
        mu = 4.0 * n * n
        term = np.ones_like(x)
        acc = np.ones_like(x)
        for k in range(1, 40):
            term = -term * (mu - (2 * k - 1) ** 2) * inv8x / k
            acc += term
            if np.all(np.abs(term) < 1e-17 * np.abs(acc)):
                break
        out[n] = pref * acc
    return out


def _recurrence(nmax: int, x: np.ndarray) -> np.ndarray:
    xmax = float(x.max())
    start = nmax + 20 + int(9.0 * math.sqrt(xmax) + 2.0 * xmax ** (1.0 / 3.0))
    start += start % 2
    out = np.zeros((nmax + 1, x.size))
    inv = 2.0 / x
    upper = np.zeros_like(x)
    cur = np.full_like(x, 1e-280)
    total = np.zeros_like(x)
    for k in range(start, 0, -1):
        lower = upper + k * inv * cur
        upper = cur
        cur = lower
        # ``upper`` now holds order k, ``cur`` order k - 1
        total += upper
        if k <= nmax:
            out[k] = upper
        big = np.abs(cur) > _HUGE
        if np.any(big):
            s = np.where(big, 1.0 / _HUGE, 1.0)
            cur *= s
            upper *= s
            total *= s
            out[k:] *= s
    out[0] = cur
    norm = cur + 2.0 * total
    return out / norm


def ive_table(nmax: int, x) -> np.ndarray:
    """Return ``exp(-x) I_n(x)`` with shape ``(nmax + 1, len(x))``."""
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("x must be finite and nonnegative")
    out = np.zeros((nmax + 1, x.size))
    zero = x == 0.0
    out[0, zero] = 1.0
    small = (x > 0) & (x <= _SERIES_MAX)
    large = x >= max(60.0, 2.0 * nmax * nmax)
    mid = ~(zero | small | large)
    if np.any(small):
        out[:, small] = _series(nmax, x[small])
    if np.any(large):
        out[:, large] = _asymptotic(nmax, x[large])
    if np.any(mid):
        # chunk by magnitude so that the recurrence length tracks each chunk
        idx = np.flatnonzero(mid)
        order = idx[np.argsort(x[idx])]
        for chunk in np.array_split(order, max(1, int(math.log2(x[order[-1]] / x[order[0]] + 1)))):
            if chunk.size:
                out[:, chunk] = _recurrence(nmax, x[chunk])
    return out


def ive(n: int, x) -> np.ndarray:
    """``exp(-x) I_n(x)`` for a single integer order (sign of ``n`` ignored)."""
    n = abs(int(n))
    vals = ive_table(n, x)[n]
    return vals if np.ndim(x) else float(vals[0])
