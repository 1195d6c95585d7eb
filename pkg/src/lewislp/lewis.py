"""lp Lewis weight machinery.

The weight vector w of a non-degenerate matrix A at exponent p is the unique
positive fixed point of ``w = sigma(W^(1/2 - 1/p) A)``.  Equivalently it is
the minimizer of the volumetric potential plus the total mass, which is what
the clamped projected-gradient iteration below exploits.  All routines treat
the measured fixed-point residual as the source of truth for convergence;
iteration-count formulas act only as hard caps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidP, InvalidTolerance, IterationCap, NotConverged
from .linalg import (
    JL_CONSTANT,
    leverage_scores,
    projection_bundle,
    sketch_size,
    sketched_leverage_scores,
)

_HOMOTOPY_STEP_CAP = 10_000_000


@dataclass(frozen=True)
class LewisParams:
    """Exponent, target multiplicative error, seed and computation mode."""

    p: float
    eps: float
    seed: int = 0
    mode: str = "exact"

    def __post_init__(self):
        if self.p <= 0.0:
            raise InvalidP(f"exponent must be positive, got {self.p}")
        if self.mode not in ("exact", "approximate"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "approximate" and not self.p < 4.0:
            raise InvalidP("approximate mode requires p in (0, 4)")
        if not 0.0 < self.eps < 1.0:
            raise InvalidTolerance(f"eps must lie in (0, 1), got {self.eps}")


def lewis_sigma(A, w, p: float) -> np.ndarray:
    """sigma(W^(1/2 - 1/p) A), the map whose fixed point is the Lewis weight.

    The row scaling is normalized in log space before exponentiation:
    leverage scores are invariant under global scaling, and the shift keeps
    w^(1 - 2/p) representable for extreme weight spreads.
    """
    w = np.asarray(w, dtype=float)
    ld = (1.0 - 2.0 / p) * np.log(w)
    d = np.exp(ld - ld.max())
    # interior-point callers squeeze rows to near-collapse; the orthonormal
    # factor still yields usable scores far below the public rank tolerance
    return leverage_scores(A, np.maximum(d, 1e-290), rank_tol=1e-15)


def volumetric_potential(A, w, p: float) -> float:
    """-(1 - 2/p)^-1 * logdet(A.T W^(1-2/p) A); minimized (plus sum w) by w_p."""
    if p == 2.0:
        raise InvalidP("volumetric potential is undefined at p = 2")
    A = np.asarray(A, dtype=float)
    w = np.asarray(w, dtype=float)
    B = (w ** (0.5 - 1.0 / p))[:, None] * A
    _, R = np.linalg.qr(B, mode="reduced")
    logdet = 2.0 * float(np.sum(np.log(np.abs(np.diag(R)))))
    return -logdet / (1.0 - 2.0 / p)


def volumetric_gradient(A, w, p: float) -> np.ndarray:
    """Gradient of the volumetric potential: -sigma_w / w entrywise.

    At the Lewis weight the gradient of (potential + sum w) vanishes, so this
    returns the -1 vector there.
    """
    if p == 2.0:
        raise InvalidP("volumetric gradient is undefined at p = 2")
    w = np.asarray(w, dtype=float)
    return -lewis_sigma(A, w, p) / w


def lewis_residual(A, w, p: float) -> float:
    """Relative fixed-point residual || (sigma_w - w) / w ||_inf."""
    w = np.asarray(w, dtype=float)
    sigma = lewis_sigma(A, w, p)
    return float(np.max(np.abs(sigma - w) / w))


def _round_weight(A: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """Multiplicative rounding (diag(A (A.T W^(1-2/p) A)^-1 A.T))^(p/2).

    Recovers w_p exactly when w = w_p: the inner diagonal equals w_i^(2/p)
    there, so the p/2 power restores the weight.
    """
    from scipy.linalg import solve_triangular

    B = (w ** (0.5 - 1.0 / p))[:, None] * A
    _, R = np.linalg.qr(B, mode="reduced")
    Y = solve_triangular(R, A.T, trans="T", lower=False)
    diag = np.einsum("ij,ij->j", Y, Y)
    return diag ** (p / 2.0)


def _not_converged(res_hat: float, eps: float, slack: float) -> NotConverged:
    return NotConverged(
        f"fixed-point residual {res_hat:.3e} above {slack}*eps = "
        f"{slack * eps:.3e}; initial weight likely outside basin"
    )


def _descent_python(A, p, w0, eps, *, clamp_radius, step_cap, scores, residual_slack):
    """Reference clamped-gradient loop; ``scores(w, j)`` supplies the
    (possibly approximate) leverage scores at iteration j.  A residual that
    decays far slower than the guaranteed geometric rate over a window
    signals the floating-point floor and ends the loop early."""
    L = max(4.0, 8.0 / p)
    lo = (1.0 - clamp_radius) * w0
    hi = (1.0 + clamp_radius) * w0
    w = np.clip(w0, lo, hi)
    check_level = eps / 2.0
    window = 12
    stall_factor = min(1.0, 4.0 * (1.0 - 1.0 / (16.0 * (p / 2.0 + 2.0 / p))) ** (window / 2.0))
    trail = []
    best = None
    for j in range(step_cap):
        sigma = scores(w, j)
        res = float(np.max(np.abs(sigma - w) / w))
        trail.append(res)
        stalled = len(trail) > window and res > trail[-window - 1] * stall_factor
        if res <= check_level or stalled or j == step_cap - 1:
            w_hat = _round_weight(A, w, p)
            res_hat = lewis_residual(A, w_hat, p)
            if best is None or res_hat < best[1]:
                best = (w_hat, res_hat)
            if res_hat <= 1.5 * eps:
                return w_hat
            if stalled:
                break
            check_level = res / 4.0
        w = np.clip(w - (w0 - (w0 / w) * sigma) / L, lo, hi)
    w_hat, res_hat = best
    if res_hat <= residual_slack * eps:
        return w_hat
    raise _not_converged(res_hat, eps, residual_slack)


def _descent_fast(A, p, w0, eps, *, clamp_radius, step_cap, residual_slack):
    """Kernel-driven variant of :func:`_descent_python` for exact scores.

    Runs the compiled loop in chunks until the measured residual reaches the
    current check level, then applies the rounding and re-enters with a
    tighter level if needed.  A chunk that shrinks the residual by less than
    the guaranteed geometric rate allows signals the floating-point floor,
    so the loop gives up early instead of burning the full cap.  Falls back
    to the QR-based path when the kernel reports a loss of accuracy.
    """
    L = max(4.0, 8.0 / p)
    lo = (1.0 - clamp_radius) * w0
    hi = (1.0 + clamp_radius) * w0
    w = np.ascontiguousarray(np.clip(w0, lo, hi))
    check_level = eps / 2.0
    chunk = 200
    rate = 1.0 - 1.0 / (16.0 * (p / 2.0 + 2.0 / p))
    used = 0
    best = None
    last_res = np.inf
    while used < step_cap:
        it, res, status = _kernels.descent_loop(
            A, w0, w, p, lo, hi, L, check_level, min(chunk, step_cap - used)
        )
        used += max(it, 1)
        if status == _kernels.STATUS_UNSTABLE:
            return _descent_python(
                A, p, w0, eps,
                clamp_radius=clamp_radius, step_cap=step_cap,
                scores=lambda v, j: lewis_sigma(A, v, p),
                residual_slack=residual_slack,
            )
        if p <= 2.0 and res <= eps:
            # the measured residual already certifies the tolerance (for
            # p <= 2 the fixed-point map is non-expansive, so the relative
            # distance is bounded by the residual); skip the rounding
            return w
        if status == _kernels.STATUS_CAP and used < step_cap:
            if res > last_res * min(1.0, 4.0 * rate ** (0.5 * it)):
                break  # residual floor: far slower than the guaranteed rate
            last_res = res
            continue
        w_hat = _round_weight(A, w, p)
        res_hat = lewis_residual(A, w_hat, p)
        if best is None or res_hat < best[1]:
            best = (w_hat, res_hat)
        if res_hat <= 1.5 * eps:
            return w_hat
        if status == _kernels.STATUS_CAP:
            break
        check_level = res / 4.0
        last_res = res
    if best is None:
        w_hat = _round_weight(A, w, p)
        res_hat = lewis_residual(A, w_hat, p)
    else:
        w_hat, res_hat = best
    if res_hat <= residual_slack * eps:
        return w_hat
    raise _not_converged(res_hat, eps, residual_slack)


def _clamped_descent(A, p, w0, eps, *, clamp_radius, step_cap, scores=None, residual_slack=3.0):
    """Shared clamped-gradient driver behind the exact and approximate
    solvers.  Convergence is decided by the measured residual of the rounded
    iterate; ``step_cap`` is only a hard cap.
    """
    A = np.ascontiguousarray(A, dtype=float)
    w0 = np.ascontiguousarray(w0, dtype=float)
    if np.any(w0 <= 0.0):
        raise ValueError("initial weight must be strictly positive")
    if scores is None and _kernels.HAVE_NUMBA:
        return _descent_fast(
            A, p, w0, eps,
            clamp_radius=clamp_radius, step_cap=step_cap,
            residual_slack=residual_slack,
        )
    if scores is None:
        scores = lambda v, j: lewis_sigma(A, v, p)  # noqa: E731
    return _descent_python(
        A, p, w0, eps,
        clamp_radius=clamp_radius, step_cap=step_cap,
        scores=scores, residual_slack=residual_slack,
    )


def exact_weight_steps(p: float, n: int, eps: float) -> int:
    """Hard iteration cap for the exact solver."""
    return int(np.ceil(32.0 * (p / 2.0 + 2.0 / p) * np.log(8.0 * n * (1.0 + 2.0 / p) / eps)))


def compute_exact_weight(A, p: float, w0, eps: float, history: list | None = None) -> np.ndarray:
    """Lewis weight from an initial weight w0 multiplicatively close to w_p.

    Runs the clamped gradient iteration with clamp radius p / (20 (p + 2))
    around w0, then applies the multiplicative rounding.  Raises
    :class:`NotConverged` when the final residual exceeds 3 * eps, which
    signals a w0 outside the convergence basin.
    """
    if p <= 0.0:
        raise InvalidP(f"exponent must be positive, got {p}")
    if not 0.0 < eps < 1.0:
        raise InvalidTolerance(f"eps must lie in (0, 1), got {eps}")
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    r = p / (20.0 * (p + 2.0))
    cap = exact_weight_steps(p, n, eps)
    scores = None
    if history is not None:

        def scores(w, j):
            history.append(np.array(w))
            return lewis_sigma(A, w, p)

    return _clamped_descent(
        A, p, w0, eps, clamp_radius=r, step_cap=cap, scores=scores
    )


def apx_eps_cap(p: float) -> float:
    """Admissible tolerance cap 2/p - |1 - 2/p| for the approximate solver."""
    return 2.0 / p - abs(1.0 - 2.0 / p)


def compute_apx_weight(
    A,
    p: float,
    w0,
    eps: float,
    seed: int = 0,
    clamp_radius: float | None = None,
    score_mode: str = "auto",
) -> np.ndarray:
    """Randomized Lewis weight computation for p in (0, 4).

    Per-step leverage scores are required only to multiplicative accuracy
    delta = (4 - p) * eps / 256.  The sketching backend is used when its
    k = ceil(C_jl log(m) / delta^2) sketch vectors undercut the m solves of
    an exact computation; otherwise exact scores (which satisfy any delta)
    are cheaper and are used instead.  ``score_mode`` forces one backend.
    Deterministic for fixed ``seed``.
    """
    if not 0.0 < p < 4.0:
        raise InvalidP(f"approximate mode requires p in (0, 4), got {p}")
    cap = apx_eps_cap(p)
    if not 0.0 < eps < cap:
        raise InvalidTolerance(f"eps must lie in (0, {cap:.6g}) at p = {p}, got {eps}")
    if score_mode not in ("auto", "exact", "sketch"):
        raise ValueError(f"unknown score_mode {score_mode!r}")
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if clamp_radius is None:
        clamp_radius = p**2 * (4.0 - p) / 2.0**20
    delta = (4.0 - p) * eps / 256.0
    steps = int(np.ceil(80.0 * (p / 2.0 + 2.0 / p) * np.log(p * n / (32.0 * eps))))
    steps = max(steps, 4)
    use_sketch = score_mode == "sketch" or (
        score_mode == "auto" and sketch_size(m, delta, JL_CONSTANT) < m
    )
    scores = None
    if use_sketch:

        def scores(w, j):
            d = w ** (1.0 - 2.0 / p)
            return sketched_leverage_scores(A, d, delta, seed=_substream(seed, j))

    return _clamped_descent(
        A, p, w0, eps, clamp_radius=clamp_radius, step_cap=steps, scores=scores
    )


def _substream(seed: int, j: int) -> int:
    # Distinct Philox keys per iteration from one user-facing seed.
    return (int(seed) * 0x9E3779B97F4A7C15 + j) % (2**63)


def compute_initial_weight(
    A, p_target: float, eps: float, mode: str = "exact", seed: int = 0
) -> np.ndarray:
    """Lewis weight with no prior estimate, via a homotopy in the exponent.

    Starts from p = 2 where the weight is the plain leverage scores, then
    walks p toward ``p_target`` in steps small enough that the rescaled
    previous weight w^(p'/p) stays inside the convergence basin, re-solving
    at tolerance r/4 each step.  The walk itself always uses the
    deterministic solver; in ``approximate`` mode only the final call is
    randomized (after one deterministic tightening into its narrower basin).
    """
    if mode not in ("exact", "approximate"):
        raise ValueError(f"unknown mode {mode!r}")
    if p_target <= 0.0:
        raise InvalidP(f"target exponent must be positive, got {p_target}")
    if mode == "approximate" and not p_target < 4.0:
        raise InvalidP("approximate mode requires p in (0, 4)")
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    w = leverage_scores(A, rank_tol=1e-15)
    if p_target == 2.0:
        return w
    logfac = np.sqrt(n) * np.log(m * np.e**2 / n)
    p = 2.0
    for _ in range(_HOMOTOPY_STEP_CAP):
        if p == p_target:
            break
        r = p / (20.0 * (p + 2.0))
        h = min(2.0, p) / logfac * r
        p_next = float(np.clip(p_target, p - h, p + h))
        w = compute_exact_weight(A, p_next, w ** (p_next / p), r / 4.0)
        p = p_next
    else:
        raise IterationCap("homotopy exceeded the step cap")
    if mode == "approximate":
        r_apx = p_target**2 * (4.0 - p_target) / 2.0**20
        w = compute_exact_weight(A, p_target, w, r_apx / 2.0)
        w = compute_apx_weight(A, p_target, w, eps, seed=seed)
    else:
        w = compute_exact_weight(A, p_target, w, eps)
    return w


def lewis_jacobian_apply(A, v, h, p: float, w=None, eps: float = 1e-10) -> np.ndarray:
    """Directional derivative of v -> w_p(V A) applied to h:
    J_w(v) h = 2 W (W - (1 - 2/p) Lambda)^-1 Lambda V^-1 h.

    Diagnostic only: materializes the dense Laplacian of W^(1/2-1/p) V A.
    When ``w`` is omitted the weight w_p(V A) is computed from scratch.
    """
    if p == 2.0:
        raise InvalidP("Jacobian formula is undefined at p = 2")
    A = np.asarray(A, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(v <= 0.0):
        raise ValueError("row scaling must be strictly positive")
    VA = v[:, None] * A
    if w is None:
        w = compute_initial_weight(VA, p, eps)
    w = np.asarray(w, dtype=float)
    bundle = projection_bundle(A, (w ** (0.5 - 1.0 / p) * v) ** 2)
    M = np.diag(w) - (1.0 - 2.0 / p) * bundle.lap
    s = np.linalg.solve(M, bundle.lap @ (h / v))
    return 2.0 * w * s
