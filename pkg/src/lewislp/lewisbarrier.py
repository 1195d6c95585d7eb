"""Lewis weight barrier for the polytope interior {x : A x > b}.

With slacks s = A x - b, rescaled rows A_x = S^-1 A and w the l_q Lewis
weight of A_x, the barrier value is

    psi(x) = (1/2) [ logdet(A_x.T W^(1-2/q) A_x) - (1 - 2/q) sum_i w_i ],

its gradient is -A_x.T sigma_x, and its Hessian is
A_x.T Sigma^(1/2) (I + N) Sigma^(1/2) A_x with
N = 2 L (I - (1 - 2/q) L)^-1 for the normalized Laplacian L of
W^(1/2-1/q) A_x.  At q = 2 this is exactly the volumetric barrier.  The
inner weight optimization is replaced by converged Lewis weights, which
perturbs the Hessian only multiplicatively at the weight tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain, RankDeficient
from .lewis import compute_exact_weight, compute_initial_weight
from .linalg import projection_bundle

DEFAULT_WEIGHT_EPS = 1e-8


def default_q(m: int) -> float:
    """q = ln m clamped below at 4."""
    return max(float(np.log(m)), 4.0)


def concordance_constant(q: float, m: int) -> float:
    """v_q = (q + 2)^(3/2) m^(1/(q+2)) + 4 max(q, 2)^2.5."""
    return (q + 2.0) ** 1.5 * m ** (1.0 / (q + 2.0)) + 4.0 * max(q, 2.0) ** 2.5


@dataclass
class BarrierEval:
    """Value, derivatives and spectra produced by :func:`psi_hessian`."""

    psi: float
    grad: np.ndarray
    hess: np.ndarray
    sigma: np.ndarray
    n_spectrum: np.ndarray
    q: float


def _slacks(A, b, x) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    s = A @ np.asarray(x, dtype=float) - np.asarray(b, dtype=float)
    if np.any(s <= 0.0):
        raise OutOfDomain(f"point has nonpositive slack (min {s.min():.3e})")
    return s


def _weights(Ax, q: float, eps: float, w0=None) -> np.ndarray:
    if w0 is not None:
        return compute_exact_weight(Ax, q, w0, eps)
    return compute_initial_weight(Ax, q, eps)


def psi_value(A, b, x, q: float, eps: float = DEFAULT_WEIGHT_EPS) -> float:
    """Barrier value through converged Lewis weights of the rescaled rows."""
    A = np.asarray(A, dtype=float)
    s = _slacks(A, b, x)
    Ax = A / s[:, None]
    if q == 2.0:
        _, R = np.linalg.qr(Ax, mode="reduced")
        return float(np.sum(np.log(np.abs(np.diag(R)))))
    w = _weights(Ax, q, eps)
    B = (w ** (0.5 - 1.0 / q))[:, None] * Ax
    _, R = np.linalg.qr(B, mode="reduced")
    piv = np.abs(np.diag(R))
    if piv.min() <= 1e-300:
        raise RankDeficient("rescaled system lost rank")
    logdet = 2.0 * float(np.sum(np.log(piv)))
    return 0.5 * (logdet - (1.0 - 2.0 / q) * float(np.sum(w)))


def psi_gradient(A, b, x, q: float, eps: float = DEFAULT_WEIGHT_EPS) -> np.ndarray:
    """grad psi(x) = -A_x.T sigma_x with sigma_x the Lewis weight of A_x."""
    A = np.asarray(A, dtype=float)
    s = _slacks(A, b, x)
    Ax = A / s[:, None]
    w = _weights(Ax, q, eps)
    return -Ax.T @ w


def psi_hessian(A, b, x, q: float, eps: float = DEFAULT_WEIGHT_EPS) -> BarrierEval:
    """Full barrier evaluation with the Hessian and its internal spectra.

    Asserts the defining inequalities on every call: the force bound
    grad.T H^-1 grad <= n, the spectrum of N inside [0, q], and the
    sandwich A_x.T Sigma A_x <= H <= (1 + q) A_x.T Sigma A_x.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    s = _slacks(A, b, x)
    Ax = A / s[:, None]
    w = _weights(Ax, q, eps)
    bundle = projection_bundle(Ax, w ** (1.0 - 2.0 / q))
    L = bundle.norm_lap
    cq = 1.0 - 2.0 / q
    N = 2.0 * L @ np.linalg.inv(np.eye(m) - cq * L)
    N = 0.5 * (N + N.T)
    sqw = np.sqrt(w)
    inner = np.eye(m) + N
    H = (Ax * sqw[:, None]).T @ inner @ (Ax * sqw[:, None])
    H = 0.5 * (H + H.T)

    spectrum = np.linalg.eigvalsh(N)
    assert spectrum.min() >= -1e-8 and spectrum.max() <= q + 1e-8, (
        f"N spectrum [{spectrum.min():.3e}, {spectrum.max():.3e}] outside [0, {q}]"
    )
    grad = -Ax.T @ w
    force = float(grad @ np.linalg.solve(H, grad))
    assert force <= n + 1e-6, f"force bound violated: {force} > {n}"
    base = (Ax * sqw[:, None]).T @ (Ax * sqw[:, None])
    lo = np.linalg.eigvalsh(H - base).min()
    hi = np.linalg.eigvalsh((1.0 + q) * base - H).min()
    scale = float(np.linalg.eigvalsh(base).max())
    assert lo >= -1e-8 * scale and hi >= -1e-8 * scale, "Hessian sandwich violated"

    psi = psi_value(A, b, x, q, eps)
    return BarrierEval(psi=psi, grad=grad, hess=H, sigma=w, n_spectrum=spectrum, q=q)


def force_bound(A, b, x, q: float, eps: float = DEFAULT_WEIGHT_EPS) -> float:
    """grad.T (hess)^-1 grad, guaranteed <= n."""
    ev = psi_hessian(A, b, x, q, eps)
    return float(ev.grad @ np.linalg.solve(ev.hess, ev.grad))


def self_concordance_probe(
    A, b, x, h, q: float, eps: float = DEFAULT_WEIGHT_EPS, fd_step: float = 1e-4
):
    """Numeric probe of the third-derivative bound.

    Normalizes h to unit Hessian norm, estimates D^3 psi[h,h,h] by a
    symmetric difference of h.T hess(x + t h) h, and returns
    (ratio, bound = 2 v_q); the defining inequality asks ratio <= bound.
    """
    A = np.asarray(A, dtype=float)
    m, _ = A.shape
    h = np.asarray(h, dtype=float)
    ev = psi_hessian(A, b, x, q, eps)
    nrm = float(np.sqrt(h @ ev.hess @ h))
    if nrm == 0.0:
        raise ValueError("direction must be nonzero")
    h = h / nrm
    hp = psi_hessian(A, b, np.asarray(x) + fd_step * h, q, eps).hess
    hm = psi_hessian(A, b, np.asarray(x) - fd_step * h, q, eps).hess
    d3 = float(h @ (hp - hm) @ h) / (2.0 * fd_step)
    return abs(d3), 2.0 * concordance_constant(q, m)
