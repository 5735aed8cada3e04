"""Safe sample screening for a single weight vector and over a ball of weights.

Both rules bound the unknown optimal margins ``xc_i @ beta*`` by a ball of
radius ``||xc_i|| * r`` around the margins of an approximate model and mark a
sample as removable when that whole range lies where the loss is flat.  The
per-weight rule takes ``r`` from the duality gap at one ``w``; the
distributionally robust rule takes the largest gap over the weight ball, which
is a convex quadratic in ``w`` and is maximized exactly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ballmax import BallMaxResult, QuadraticObjective, maximize_over_ball
from .losses import conjugate_values, loss_value, zero_interval
from .problem import Dataset, ModelState, WeightBall, duality_gap, primal_from_margins

GAP_CLAMP_RTOL = 1e-12


class ScreeningKind(str, enum.Enum):
    PER_WEIGHT = "per_weight"
    DR = "dr"


class NegativeGapError(ArithmeticError):
    """The duality gap is negative beyond round-off; the model is inconsistent."""


@dataclass(frozen=True)
class ScreeningCertificate:
    mask: np.ndarray
    radius: float
    gap_at_center: float
    kind: ScreeningKind
    max_gap: float = math.nan
    details: dict = field(default_factory=dict, compare=False)

    @property
    def n_removed(self) -> int:
        return int(self.mask.sum())

    @property
    def rate(self) -> float:
        return self.n_removed / self.mask.size if self.mask.size else 0.0


def radius_from_gap(gap, lam, primal=0.0):
    """``sqrt(2 gap / lam)`` with tiny negative gaps clamped to zero."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if math.isinf(gap):
        return math.inf
    thr = GAP_CLAMP_RTOL * max(1.0, abs(primal))
    if gap < -thr:
        raise NegativeGapError(f"duality gap {gap:.3e} is below -{thr:.1e}")
    return math.sqrt(2.0 * max(gap, 0.0) / lam)


def gap_radius(ds: Dataset, w, lam, model: ModelState) -> float:
    """Radius of the ball around the model's primal solution that holds the optimum at ``w``.

    ``model`` may have been trained at other weights; its primal/dual pair is
    then simply evaluated at ``w``.
    """
    gap = duality_gap(ds, w, lam, model)
    p = primal_from_margins(ds, w, lam, model.margins, model.beta_sqnorm)
    return radius_from_gap(gap, lam, p)


def interval_mask(ds: Dataset, margins, radius) -> np.ndarray:
    """Samples whose margin range ``margins +- row_norms * radius`` sits inside the flat region."""
    margins = np.asarray(margins, dtype=np.float64)
    if math.isinf(radius):
        return np.zeros(ds.n, dtype=bool)
    spread = ds.row_norms * radius
    lo = margins - spread
    hi = margins + spread
    if ds.loss.is_classification:
        return zero_interval(ds.loss).contains_range(lo, hi)
    mask = np.zeros(ds.n, dtype=bool)
    for i in range(ds.n):
        mask[i] = bool(zero_interval(ds.loss, float(ds.y[i])).contains_range(lo[i], hi[i]))
    return mask


def screen_per_weight(ds: Dataset, m: ModelState, w=None) -> ScreeningCertificate:
    """Gap safe screening at ``w`` (default: the weights ``m`` was trained with)."""
    w = m.weights if w is None else np.asarray(w, dtype=np.float64)
    gap = duality_gap(ds, w, m.lam, m)
    p = primal_from_margins(ds, w, m.lam, m.margins, m.beta_sqnorm)
    r = radius_from_gap(gap, m.lam, p)
    return ScreeningCertificate(interval_mask(ds, m.margins, r), r, max(gap, 0.0),
                                ScreeningKind.PER_WEIGHT, max_gap=gap)


def dr_gap_quadratic(ds: Dataset, m: ModelState, lam=None) -> QuadraticObjective:
    """Gap of the fixed pair (beta~, alpha~) as a quadratic in the weights.

    ``P_w(beta~) - D_w(alpha~) = w.T A w + 2 b.T w + c`` with
    ``A = (alpha~ . xc)(alpha~ . xc).T / (2 lam)``,
    ``b_i = (loss(t_i) + conj(-alpha~_i)) / 2`` and ``c = lam/2 ||beta~||^2``.
    """
    lam = m.lam if lam is None else float(lam)
    alpha = np.asarray(m.alpha, dtype=np.float64)
    conj, finite = conjugate_values(ds.loss, ds.y, -alpha)
    if not np.all(finite):
        bad = np.flatnonzero(~finite)[:5].tolist()
        raise ValueError(f"dual variables outside the conjugate domain at rows {bad}")
    if ds.is_gram:
        A = (alpha[:, None] * ds.kcheck) * alpha[None, :] / (2.0 * lam)
    else:
        ax = alpha[:, None] * ds.xcheck
        A = ax @ ax.T / (2.0 * lam)
    A = 0.5 * (A + A.T)
    b = 0.5 * (loss_value(ds.loss, ds.y, m.margins) + conj)
    c = 0.5 * lam * m.beta_sqnorm
    return QuadraticObjective(A, b, c)


def max_gap_over_ball(ds: Dataset, m: ModelState, ball: WeightBall) -> BallMaxResult:
    q = dr_gap_quadratic(ds, m)
    if ball.center.shape != (ds.n,):
        raise ValueError(f"ball center has shape {ball.center.shape}, expected ({ds.n},)")
    return maximize_over_ball(q, ball.center, ball.radius)


def dr_radius(ds: Dataset, m: ModelState, ball: WeightBall) -> float:
    """``R = sqrt(2/lam * max_{w in ball} gap(w))``.

    A zero-radius ball returns exactly the per-weight radius at the center.
    """
    return _dr(ds, m, ball)[0]


def _dr(ds, m, ball):
    if ball.radius == 0:
        r = gap_radius(ds, ball.center, m.lam, m)
        return r, duality_gap(ds, ball.center, m.lam, m), None
    res = max_gap_over_ball(ds, m, ball)
    # the maximizer sits on the sphere; reference the gap scale at that point
    p = primal_from_margins(ds, res.argmax, m.lam, m.margins, m.beta_sqnorm)
    return radius_from_gap(res.value, m.lam, p), res.value, res


def screen_dr(ds: Dataset, m: ModelState, ball: WeightBall) -> ScreeningCertificate:
    """Samples whose dual variable is zero at the optimum for every ``w`` in ``ball``."""
    R, gmax, res = _dr(ds, m, ball)
    gap0 = duality_gap(ds, ball.center, m.lam, m)
    details = {}
    if res is not None:
        details = {"argmax": res.argmax, "branch": res.branch,
                   "candidates": res.candidates_examined}
    return ScreeningCertificate(interval_mask(ds, m.margins, R), R, max(gap0, 0.0),
                                ScreeningKind.DR, max_gap=gmax, details=details)

