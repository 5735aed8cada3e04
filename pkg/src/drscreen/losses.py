"""Sample-sparse loss functions, their convex conjugates and zero-gradient sets.

All four losses are convex, piecewise smooth functions of the margin ``t``
(for classification ``t = y * x @ beta``; for regression ``t = x @ beta``).
Each one has an interval of margins on which its subdifferential is ``{0}``;
a sample whose margin provably stays inside that interval has a zero dual
variable and can be dropped from training.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Unbounded(enum.Enum):
    """Tagged infinite value returned where a conjugate (or dual) diverges."""

    POS = "+inf"
    NEG = "-inf"

    def __repr__(self):
        return self.value


class LossKind(enum.IntEnum):
    HINGE = 0
    SQUARED_HINGE = 1
    EPS_INSENSITIVE = 2
    SQUARED_EPS_INSENSITIVE = 3


@dataclass(frozen=True)
class Loss:
    """A loss family plus its insensitivity width ``eps`` (regression only)."""

    kind: LossKind
    eps: float = 0.0

    def __post_init__(self):
        if self.kind in (LossKind.EPS_INSENSITIVE, LossKind.SQUARED_EPS_INSENSITIVE):
            if not (self.eps > 0 and math.isfinite(self.eps)):
                raise ValueError(f"{self.kind.name} needs eps > 0, got {self.eps}")
        elif self.eps != 0.0:
            raise ValueError(f"{self.kind.name} takes no eps")

    @property
    def is_classification(self) -> bool:
        return self.kind in (LossKind.HINGE, LossKind.SQUARED_HINGE)

    @property
    def code(self) -> int:
        return int(self.kind)

    @property
    def name(self) -> str:
        if self.is_classification:
            return self.kind.name.lower()
        return f"{self.kind.name.lower()}({self.eps:g})"

    def dual_box(self) -> tuple[float, float]:
        """Range of ``alpha`` on which ``conj(-alpha)`` is finite."""
        if self.kind == LossKind.HINGE:
            return 0.0, 1.0
        if self.kind == LossKind.SQUARED_HINGE:
            return 0.0, math.inf
        if self.kind == LossKind.EPS_INSENSITIVE:
            return -1.0, 1.0
        return -math.inf, math.inf


def hinge() -> Loss:
    return Loss(LossKind.HINGE)


def squared_hinge() -> Loss:
    return Loss(LossKind.SQUARED_HINGE)


def eps_insensitive(eps: float) -> Loss:
    return Loss(LossKind.EPS_INSENSITIVE, float(eps))


def squared_eps_insensitive(eps: float) -> Loss:
    return Loss(LossKind.SQUARED_EPS_INSENSITIVE, float(eps))


@dataclass(frozen=True)
class Interval:
    """Real interval with explicit endpoint openness; ``lo``/``hi`` may be infinite."""

    lo: float
    hi: float
    lo_open: bool
    hi_open: bool

    def contains(self, t: float) -> bool:
        above = t > self.lo if self.lo_open else t >= self.lo
        below = t < self.hi if self.hi_open else t <= self.hi
        return above and below

    def contains_range(self, lo, hi):
        """Elementwise test of ``[lo, hi]`` being a subset of the interval.

        Open endpoints demand strict inequality, so a range touching an open
        end is rejected.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        left = lo > self.lo if self.lo_open else lo >= self.lo
        right = hi < self.hi if self.hi_open else hi <= self.hi
        return left & right

    def __str__(self):
        return "{}{:g}, {:g}{}".format(
            "(" if self.lo_open else "[", self.lo, self.hi, ")" if self.hi_open else "]"
        )


def loss_value(loss: Loss, y, t):
    """Evaluate the loss at margin ``t`` (vectorized over ``y`` and ``t``)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    k = loss.kind
    if k == LossKind.HINGE:
        out = np.maximum(0.0, 1.0 - t)
    elif k == LossKind.SQUARED_HINGE:
        out = np.maximum(0.0, 1.0 - t) ** 2
    elif k == LossKind.EPS_INSENSITIVE:
        out = np.maximum(0.0, np.abs(t - y) - loss.eps)
    else:
        out = np.maximum(0.0, np.abs(t - y) - loss.eps) ** 2
    return out[()] if out.ndim == 0 else out


def conjugate_values(loss: Loss, y, s):
    """Vectorized conjugate ``loss*(s)`` plus a boolean finiteness mask.

    Entries outside the finite domain are set to 0 in the value array; callers
    must consult the mask.
    """
    s = np.asarray(s, dtype=float)
    y = np.broadcast_to(np.asarray(y, dtype=float), s.shape)
    k = loss.kind
    if k == LossKind.HINGE:
        finite = (s >= -1.0) & (s <= 0.0)
        val = s.copy()
    elif k == LossKind.SQUARED_HINGE:
        finite = s <= 0.0
        val = s * s / 4.0 + s
    elif k == LossKind.EPS_INSENSITIVE:
        finite = np.abs(s) <= 1.0
        val = s * y + loss.eps * np.abs(s)
    else:
        finite = np.ones(s.shape, dtype=bool)
        val = s * s / 4.0 + s * y + loss.eps * np.abs(s)
    return np.where(finite, val, 0.0), finite


def loss_conjugate(loss: Loss, y: float, t: float):
    """Convex conjugate at a scalar; returns ``Unbounded.POS`` off its domain."""
    val, finite = conjugate_values(loss, y, t)
    if not bool(finite):
        return Unbounded.POS
    return float(val)


def zero_interval(loss: Loss, y: float = 0.0) -> Interval:
    """Set of margins where the subdifferential of the loss is exactly ``{0}``.

    For the regression losses the interval is centred on the target ``y``.
    """
    k = loss.kind
    if k == LossKind.HINGE:
        return Interval(1.0, math.inf, True, True)
    if k == LossKind.SQUARED_HINGE:
        return Interval(1.0, math.inf, False, True)
    if k == LossKind.EPS_INSENSITIVE:
        return Interval(y - loss.eps, y + loss.eps, True, True)
    return Interval(y - loss.eps, y + loss.eps, False, False)


def subdifferential(loss: Loss, y: float, t: float) -> tuple[float, float]:
    """Subdifferential of the loss at scalar ``t`` as a closed interval."""
    k = loss.kind
    if k == LossKind.HINGE:
        if t < 1.0:
            return -1.0, -1.0
        if t > 1.0:
            return 0.0, 0.0
        return -1.0, 0.0
    if k == LossKind.SQUARED_HINGE:
        g = -2.0 * max(0.0, 1.0 - t)
        return g, g
    r = t - y
    if k == LossKind.EPS_INSENSITIVE:
        if abs(r) < loss.eps:
            return 0.0, 0.0
        if r > loss.eps:
            return 1.0, 1.0
        if r < -loss.eps:
            return -1.0, -1.0
        return (0.0, 1.0) if r > 0 else (-1.0, 0.0)
    g = 2.0 * math.copysign(max(0.0, abs(r) - loss.eps), r)
    return g, g
