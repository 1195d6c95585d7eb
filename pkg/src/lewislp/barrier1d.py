"""One-dimensional 1-self-concordant interval barriers.

Three closed forms cover every admissible coordinate domain: a log barrier
for half-lines bounded below or above, and a trigonometric barrier
``-log(cos(a*x + b))`` for bounded intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import OutOfDomain, ValidationError

# Floor for cos(a*x + b) before taking the log.  Domain errors are decided
# by interval membership only, never by this clamp.
_COS_FLOOR = 1e-300


class BarrierKind(Enum):
    LOWER_LOG = "lower_log"
    UPPER_LOG = "upper_log"
    TRIG = "trig"


@dataclass(frozen=True)
class IntervalBarrier:
    """Barrier for the open interval (lower, upper); infinities allowed on
    at most one side."""

    lower: float
    upper: float
    kind: BarrierKind = field(init=False)
    a: float = field(init=False, default=0.0)
    b: float = field(init=False, default=0.0)

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not lo < hi:
            raise ValidationError(f"empty interval ({lo}, {hi})")
        if math.isinf(lo) and math.isinf(hi):
            raise ValidationError("coordinate domain must not be all of R")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if math.isinf(hi):
            object.__setattr__(self, "kind", BarrierKind.LOWER_LOG)
        elif math.isinf(lo):
            object.__setattr__(self, "kind", BarrierKind.UPPER_LOG)
        else:
            object.__setattr__(self, "kind", BarrierKind.TRIG)
            object.__setattr__(self, "a", math.pi / (hi - lo))
            object.__setattr__(self, "b", -(math.pi / 2.0) * (hi + lo) / (hi - lo))

    def contains(self, x: float) -> bool:
        return self.lower < x < self.upper

    def eval(self, x: float):
        """Value and first three derivatives at x strictly inside the interval."""
        if not self.contains(x):
            raise OutOfDomain(f"{x} outside ({self.lower}, {self.upper})")
        if self.kind is BarrierKind.LOWER_LOG:
            s = x - self.lower
            return -math.log(s), -1.0 / s, 1.0 / s**2, -2.0 / s**3
        if self.kind is BarrierKind.UPPER_LOG:
            s = self.upper - x
            return -math.log(s), 1.0 / s, 1.0 / s**2, 2.0 / s**3
        # Evaluate through the distance to the nearer edge: with
        # theta = pi * s / (u - l), cos(a x + b) equals sin(theta), which
        # stays accurate arbitrarily close to the boundary (computing
        # a x + b directly would cancel near +-pi/2).
        s_lo = x - self.lower
        s_hi = self.upper - x
        width = self.upper - self.lower
        if s_lo <= s_hi:
            theta = math.pi * s_lo / width
            sin_ab = -math.cos(theta)
        else:
            theta = math.pi * s_hi / width
            sin_ab = math.cos(theta)
        cos_ab = max(math.sin(theta), _COS_FLOOR)
        phi = -math.log(cos_ab)
        d1 = self.a * sin_ab / cos_ab
        d2 = self.a**2 / cos_ab**2
        d3 = 2.0 * self.a**3 * sin_ab / cos_ab**3
        return phi, d1, d2, d3


def barrier_eval(bar: IntervalBarrier, x: float):
    """Functional form of :meth:`IntervalBarrier.eval`."""
    return bar.eval(x)


def barriers_from_bounds(lower, upper) -> list[IntervalBarrier]:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape:
        raise ValidationError("bound vectors differ in length")
    return [IntervalBarrier(lo, hi) for lo, hi in zip(lower, upper)]


def eval_all(barriers: list[IntervalBarrier], x: np.ndarray):
    """Vectors (phi, d1, d2, d3) for a coordinate-wise barrier stack."""
    m = len(barriers)
    x = np.asarray(x, dtype=float)
    if x.shape != (m,):
        raise ValueError(f"point has shape {x.shape}, expected ({m},)")
    out = np.empty((4, m))
    for i, bar in enumerate(barriers):
        out[0, i], out[1, i], out[2, i], out[3, i] = bar.eval(x[i])
    return out[0], out[1], out[2], out[3]


class BarrierStack:
    """Vectorized evaluation of a list of interval barriers.

    Solver hot paths call this instead of looping over the per-coordinate
    closed forms; the results agree with :meth:`IntervalBarrier.eval`.
    """

    def __init__(self, barriers: list[IntervalBarrier]):
        self.barriers = barriers
        self.lower = np.array([b.lower for b in barriers])
        self.upper = np.array([b.upper for b in barriers])
        kinds = [b.kind for b in barriers]
        self.is_low = np.array([k is BarrierKind.LOWER_LOG for k in kinds])
        self.is_up = np.array([k is BarrierKind.UPPER_LOG for k in kinds])
        self.is_trig = np.array([k is BarrierKind.TRIG for k in kinds])
        self.a = np.array([b.a for b in barriers])
        self.b = np.array([b.b for b in barriers])

    def __len__(self):
        return len(self.barriers)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            bad = int(np.argmax(~((x > self.lower) & (x < self.upper))))
            raise OutOfDomain(
                f"coordinate {bad}: {x[bad]} outside "
                f"({self.lower[bad]}, {self.upper[bad]})"
            )
        m = x.size
        phi = np.empty(m)
        d1 = np.empty(m)
        d2 = np.empty(m)
        d3 = np.empty(m)
        lo = self.is_low
        if np.any(lo):
            s = x[lo] - self.lower[lo]
            phi[lo] = -np.log(s)
            d1[lo] = -1.0 / s
            d2[lo] = s**-2.0
            d3[lo] = -2.0 * s**-3.0
        up = self.is_up
        if np.any(up):
            s = self.upper[up] - x[up]
            phi[up] = -np.log(s)
            d1[up] = 1.0 / s
            d2[up] = s**-2.0
            d3[up] = 2.0 * s**-3.0
        tr = self.is_trig
        if np.any(tr):
            # boundary-stable form, see IntervalBarrier.eval
            s_lo = x[tr] - self.lower[tr]
            s_hi = self.upper[tr] - x[tr]
            width = self.upper[tr] - self.lower[tr]
            near = np.minimum(s_lo, s_hi)
            theta = np.pi * near / width
            sign = np.where(s_lo <= s_hi, -1.0, 1.0)
            sin_ab = sign * np.cos(theta)
            c = np.maximum(np.sin(theta), _COS_FLOOR)
            a = self.a[tr]
            phi[tr] = -np.log(c)
            d1[tr] = a * sin_ab / c
            d2[tr] = a**2 / c**2
            d3[tr] = 2.0 * a**3 * sin_ab / c**3
        return phi, d1, d2, d3
