"""Thomas algorithm for tridiagonal systems, single and batched."""
from __future__ import annotations

import numpy as np
from numba import njit

from .errors import SingularSystem


@njit(cache=True)
def _thomas(lower, diag, upper, rhs, out):
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    piv = diag[0]
    if piv == 0.0 or not np.isfinite(piv):
        return 0
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for k in range(1, n):
        piv = diag[k] - lower[k] * cp[k - 1]
        if piv == 0.0 or not np.isfinite(piv):
            return k
        cp[k] = upper[k] / piv
        dp[k] = (rhs[k] - lower[k] * dp[k - 1]) / piv
    out[n - 1] = dp[n - 1]
    for k in range(n - 2, -1, -1):
        out[k] = dp[k] - cp[k] * out[k + 1]
    return -1


@njit(cache=True)
def _thomas_rows(lower, diag, upper, rhs, out):
    # one independent system per row; returns first failing row or -1
    for r in range(rhs.shape[0]):
        if _thomas(lower[r], diag[r], upper[r], rhs[r], out[r]) >= 0:
            return r
    return -1


def thomas_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Solve ``T x = rhs`` for tridiagonal ``T``.

    ``lower[k]`` multiplies ``x[k-1]`` and ``upper[k]`` multiplies ``x[k+1]``
    in row ``k``; ``lower[0]`` and ``upper[-1]`` are ignored.  All four
    arrays have length ``n``.  No pivoting is done, so the matrix should be
    diagonally dominant.

    Raises
    ------
    SingularSystem
        When elimination meets a zero or non-finite pivot.
    """
    lower, diag, upper, rhs = (np.ascontiguousarray(a, dtype=float) for a in (lower, diag, upper, rhs))
    n = diag.shape[0]
    if n == 0 or not (lower.shape == upper.shape == rhs.shape == (n,)):
        raise ValueError("lower, diag, upper and rhs must be 1-D arrays of equal length")
    out = np.empty(n)
    k = _thomas(lower, diag, upper, rhs, out)
    if k >= 0:
        raise SingularSystem(f"zero pivot at row {k}")
    return out


def thomas_solve_rows(lower, diag, upper, rhs) -> np.ndarray:
    """Batched :func:`thomas_solve`: every argument has shape ``(batch, n)``."""
    lower, diag, upper, rhs = (np.ascontiguousarray(a, dtype=float) for a in (lower, diag, upper, rhs))
    if rhs.ndim != 2 or not (lower.shape == diag.shape == upper.shape == rhs.shape):
        raise ValueError("batched arguments must share one (batch, n) shape")
    out = np.empty_like(rhs)
    r = _thomas_rows(lower, diag, upper, rhs, out)
    if r >= 0:
        raise SingularSystem(f"zero pivot in system {r}")
    return out
