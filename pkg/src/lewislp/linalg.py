"""Dense linear algebra substrate: normal-equation solves, leverage scores,
and projection-matrix derived quantities.

All routines operate on the row-scaled matrix ``B = diag(sqrt(d)) @ A`` and
factor it once by a thin QR.  The triangular factor ``R`` coincides with the
Cholesky factor of ``A.T @ D @ A`` up to row signs, so the backend keeps the
usual normal-equation semantics while staying stable under the extreme row
scalings produced by small-exponent weight computations.  Swapping in a
sparse or structured backend only requires replacing :class:`NormalFactor`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidTolerance, RankDeficient

# Pivot below RANK_TOL * (largest pivot) is treated as a rank deficiency.
RANK_TOL = 1e-12

# Default multiplier inside k = ceil(C_jl * log(m) / eps^2) sketch vectors.
JL_CONSTANT = 24.0


def validate_matrix(A: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Check non-degeneracy on demand: finite entries, m >= n >= 1, full
    column rank and no all-zero rows.  Returns ``A`` as a float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    m, n = A.shape
    if n < 1 or m < n:
        raise ValueError(f"need m >= n >= 1, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    row_norms = np.linalg.norm(A, axis=1)
    if np.any(row_norms == 0.0):
        raise RankDeficient("matrix has an all-zero row")
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= tol * s[0]:
        raise RankDeficient(f"smallest singular value {s[-1]:.3e} below tolerance")
    return A


def _as_scale(d, m: int) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim == 0:
        d = np.full(m, float(d))
    if d.shape != (m,):
        raise ValueError(f"row scaling has shape {d.shape}, expected ({m},)")
    if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
        raise ValueError("row scaling must be strictly positive and finite")
    return d


def _scaled_qr(A: np.ndarray, d: np.ndarray, rank_tol: float = RANK_TOL):
    """Thin QR of diag(sqrt(d)) @ A with a pivot-based rank check."""
    B = np.sqrt(d)[:, None] * A
    Q, R = np.linalg.qr(B, mode="reduced")
    piv = np.abs(np.diag(R))
    if piv.min() <= rank_tol * piv.max():
        raise RankDeficient(
            f"pivot ratio {piv.min() / piv.max():.3e} below {rank_tol:.0e}"
        )
    return Q, R


@dataclass(frozen=True)
class NormalFactor:
    """Factorization of A.T @ D @ A supporting repeated right-hand-side solves.

    ``cond_estimate`` is the squared ratio of extreme pivots, a cheap lower
    bound on the condition number of the normal matrix.
    """

    A: np.ndarray
    d: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    cond_estimate: float

    @property
    def shape(self):
        return self.A.shape

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_normal(self, rhs)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Multiply by A.T @ D @ A (used for residual checks)."""
        return self.R.T @ (self.R @ x)


def factor_normal_equations(A, d) -> NormalFactor:
    """Factor A.T @ diag(d) @ A for repeated solves.

    Raises :class:`RankDeficient` when a pivot falls below tolerance, which
    signals a degenerate ``A`` or a collapsed scaling ``d``.
    """
    A = np.asarray(A, dtype=float)
    d = _as_scale(d, A.shape[0])
    Q, R = _scaled_qr(A, d)
    piv = np.abs(np.diag(R))
    cond = float((piv.max() / piv.min()) ** 2)
    return NormalFactor(A=A, d=d, Q=Q, R=R, cond_estimate=cond)


def solve_normal(factor: NormalFactor, rhs) -> np.ndarray:
    """Solve (A.T @ D @ A) x = rhs through the cached triangular factor."""
    rhs = np.asarray(rhs, dtype=float)
    n = factor.R.shape[0]
    if rhs.shape[0] != n:
        raise ValueError(f"rhs has length {rhs.shape[0]}, expected {n}")
    from scipy.linalg import solve_triangular

    y = solve_triangular(factor.R, rhs, trans="T", lower=False)
    x = solve_triangular(factor.R, y, lower=False)
    if factor.cond_estimate > 1e6:
        # One refinement pass; anything beyond that is out of scope.
        r = rhs - factor.matvec(x)
        y = solve_triangular(factor.R, r, trans="T", lower=False)
        x = x + solve_triangular(factor.R, y, lower=False)
    return x


def leverage_scores(A, d=1.0, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Leverage scores of diag(sqrt(d)) @ A, i.e. the diagonal of its
    orthogonal projection matrix.

    Computed by diagonal extraction from the thin QR factor: sigma_i is the
    squared row norm of Q.  Entries lie in [0, 1] and sum to n.
    """
    A = np.asarray(A, dtype=float)
    d = _as_scale(d, A.shape[0])
    Q, _ = _scaled_qr(A, d, rank_tol)
    return np.einsum("ij,ij->i", Q, Q)


def sketched_leverage_scores(A, d, eps: float, seed: int, c_jl: float = JL_CONSTANT) -> np.ndarray:
    """Randomized leverage scores via k = ceil(c_jl * log(m) / eps^2) random
    sign vectors; each score is estimated as sum_j (P q_j)_i^2.

    Multiplicative accuracy (1 +- eps) holds for every row with high
    probability.  Deterministic for a fixed ``seed``: the sign matrix comes
    from a counter-based Philox stream keyed by the seed, so the entry at
    (vector index, coordinate) never depends on array chunking.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidTolerance(f"sketch tolerance must lie in (0, 1), got {eps}")
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    d = _as_scale(d, m)
    Q, _ = _scaled_qr(A, d)
    k = sketch_size(m, eps, c_jl)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    signs = rng.integers(0, 2, size=(k, m)).astype(float) * 2.0 - 1.0
    signs /= np.sqrt(k)
    # (P q_j)_i = (Q (Q^T q_j))_i for all sketch vectors at once.
    G = signs @ Q                      # k x n
    proj = Q @ G.T                     # m x k
    return np.einsum("ij,ij->i", proj, proj)


def sketch_size(m: int, eps: float, c_jl: float = JL_CONSTANT) -> int:
    """Number of sketch vectors used by :func:`sketched_leverage_scores`."""
    return int(np.ceil(c_jl * np.log(max(m, 2)) / eps**2))


@dataclass(frozen=True)
class ProjectionBundle:
    """Leverage scores together with the dense derived matrices.

    sigma          leverage scores of diag(sqrt(d)) @ A
    proj_squared   entrywise square of the projection matrix
    lap            diag(sigma) - proj_squared (a Laplacian)
    norm_lap       Sigma^{-1/2} lap Sigma^{-1/2} (normalized Laplacian)
    """

    sigma: np.ndarray
    proj_squared: np.ndarray
    lap: np.ndarray
    norm_lap: np.ndarray


def projection_bundle(A, d=1.0) -> ProjectionBundle:
    """Materialize the m x m projection-derived matrices.

    Only intended for diagnostic and barrier paths; solver hot paths never
    form these matrices.
    """
    A = np.asarray(A, dtype=float)
    d = _as_scale(d, A.shape[0])
    Q, _ = _scaled_qr(A, d)
    P = Q @ Q.T
    P2 = P * P
    sigma = np.diag(P).copy()
    lap = np.diag(sigma) - P2
    inv_sqrt = 1.0 / np.sqrt(sigma)
    norm_lap = lap * np.outer(inv_sqrt, inv_sqrt)
    return ProjectionBundle(sigma=sigma, proj_squared=P2, lap=lap, norm_lap=norm_lap)
