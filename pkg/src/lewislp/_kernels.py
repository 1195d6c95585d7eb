"""Compiled inner loop for the clamped weight iteration.

The descent step itself is a handful of dense operations on an m x n matrix;
at desk scale the Python dispatch overhead dominates, so the loop is JIT
compiled when numba is available.  Status codes let the caller fall back to
the (slower, QR-based) NumPy path whenever the normal equations degrade.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is normally present
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


STATUS_CONVERGED = 0
STATUS_CAP = 1
STATUS_UNSTABLE = 2


@njit(cache=True)
def _descent_loop(A, w0, w, p, lo, hi, step_div, res_target, max_iter):
    """Clamped gradient iteration on w in place.

    Returns (iterations, residual, status).  The residual belongs to the
    returned w; on STATUS_CONVERGED no update follows the final measurement.
    STATUS_UNSTABLE means the normal-equation route lost accuracy (leverage
    mass drifted) and a stabler factorization should take over.
    """
    m, n = A.shape
    e = 0.5 - 1.0 / p
    res = np.inf
    it = 0
    B = np.empty((m, n))
    sigma = np.empty(m)
    while it < max_iter:
        for i in range(m):
            s = w[i] ** e
            for j in range(n):
                B[i, j] = s * A[i, j]
        M = B.T.copy() @ B
        Minv = np.linalg.inv(M)
        C = B @ Minv
        total = 0.0
        for i in range(m):
            acc = 0.0
            for j in range(n):
                acc += C[i, j] * B[i, j]
            sigma[i] = acc
            total += acc
        if not np.isfinite(total) or abs(total - n) > 1e-6 * n:
            return it, res, STATUS_UNSTABLE
        res = 0.0
        for i in range(m):
            rr = abs(sigma[i] - w[i]) / w[i]
            if rr > res:
                res = rr
        it += 1
        if res <= res_target:
            return it, res, STATUS_CONVERGED
        for i in range(m):
            wn = w[i] - (w0[i] - (w0[i] / w[i]) * sigma[i]) / step_div
            if wn < lo[i]:
                wn = lo[i]
            elif wn > hi[i]:
                wn = hi[i]
            w[i] = wn
    return it, res, STATUS_CAP


def descent_loop(A, w0, w, p, lo, hi, step_div, res_target, max_iter):
    """Python-visible wrapper; inputs must be contiguous float64 arrays."""
    try:
        return _descent_loop(A, w0, w, p, lo, hi, step_div, res_target, max_iter)
    except Exception:
        return 0, np.inf, STATUS_UNSTABLE


def warmup():
    """Trigger JIT compilation on a tiny instance (no-op without numba)."""
    A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    w = np.full(3, 2.0 / 3.0)
    descent_loop(A, w.copy(), w.copy(), 1.0, 0.5 * w, 1.5 * w, 8.0, 1e-2, 3)
