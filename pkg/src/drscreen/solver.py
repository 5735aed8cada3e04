"""Dual coordinate ascent for weighted L2-regularized ERM.

Each coordinate step maximizes the dual exactly in ``alpha_i`` (closed form,
clipped to the conjugate's finite domain), while a running image of
``w * alpha`` is updated in O(d) (feature mode) or O(n) (Gram mode).
Convergence is certified by the duality gap.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .losses import Loss, LossKind, conjugate_values, loss_value, subdifferential
from .problem import Dataset, DimensionError, ModelState

logger = logging.getLogger(__name__)

_POLISH_EVERY = 10


class ConvergenceError(RuntimeError):
    """Raised when the gap target is not met; ``model`` holds the last iterate."""

    def __init__(self, message, model):
        super().__init__(message)
        self.model = model


@dataclass(frozen=True)
class SolverConfig:
    rel_gap_tol: float = 1e-9
    # also require this KKT violation before stopping; None checks the gap only
    kkt_tol: float | None = 1e-6
    max_epochs: int = 10000
    sweep_order: str = "cyclic"
    seed: int = 0

    def __post_init__(self):
        if not self.rel_gap_tol > 0:
            raise ValueError("rel_gap_tol must be positive")
        if self.kkt_tol is not None and not self.kkt_tol > 0:
            raise ValueError("kkt_tol must be positive or None")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.sweep_order not in ("cyclic", "shuffled"):
            raise ValueError(f"unknown sweep order {self.sweep_order!r}")


@njit(cache=True)
def _best_coordinate(code, eps, yi, g, c):
    # argmax_a  h(a) - a*g - c*a^2 with h(a) = -conj(-a)
    if code == 0:
        z = 1.0 - g
        if c > 0.0:
            a = z / (2.0 * c)
        else:
            a = 1.0 if z > 0.0 else 0.0
        return min(1.0, max(0.0, a))
    if code == 1:
        return max(0.0, (1.0 - g) / (2.0 * c + 0.5))
    z = yi - g
    s = 0.0
    if z > eps:
        s = z - eps
    elif z < -eps:
        s = z + eps
    if code == 2:
        if c > 0.0:
            a = s / (2.0 * c)
        elif s > 0.0:
            a = 1.0
        elif s < 0.0:
            a = -1.0
        else:
            a = 0.0
        return min(1.0, max(-1.0, a))
    return s / (2.0 * c + 0.5)


@njit(cache=True)
def _sweep_feature(xc, sqn, w, lam, alpha, v, code, eps, y, order):
    d = xc.shape[1]
    for i in order:
        wi = w[i]
        if wi <= 0.0:
            continue
        xv = 0.0
        for j in range(d):
            xv += xc[i, j] * v[j]
        ai = alpha[i]
        g = (xv - wi * ai * sqn[i]) / lam
        c = wi * sqn[i] / (2.0 * lam)
        an = _best_coordinate(code, eps, y[i], g, c)
        delta = an - ai
        if delta != 0.0:
            alpha[i] = an
            coef = wi * delta
            for j in range(d):
                v[j] += coef * xc[i, j]


@njit(cache=True)
def _sweep_gram(kc, w, lam, alpha, u, code, eps, y, order):
    n = kc.shape[0]
    for i in order:
        wi = w[i]
        if wi <= 0.0:
            continue
        ai = alpha[i]
        kii = kc[i, i]
        g = (u[i] - wi * ai * kii) / lam
        c = wi * kii / (2.0 * lam)
        an = _best_coordinate(code, eps, y[i], g, c)
        delta = an - ai
        if delta != 0.0:
            alpha[i] = an
            coef = wi * delta
            for j in range(n):
                u[j] += coef * kc[i, j]


def sweep(ds: Dataset, w, lam, alpha, image, order):
    """Run coordinate updates over ``order`` in place.

    ``image`` is ``xcheck.T @ (w * alpha)`` in feature mode and
    ``kcheck @ (w * alpha)`` in Gram mode; both ``alpha`` and ``image`` are
    modified.
    """
    order = np.ascontiguousarray(order, dtype=np.int64)
    if ds.is_gram:
        _sweep_gram(ds.kcheck, w, float(lam), alpha, image, ds.loss.code,
                    ds.loss.eps, ds.y, order)
    else:
        _sweep_feature(ds.xcheck, ds.row_norms ** 2, w, float(lam), alpha, image,
                       ds.loss.code, ds.loss.eps, ds.y, order)


def _image(ds, w, alpha):
    wa = w * alpha
    if ds.is_gram:
        return ds.kcheck @ wa
    return ds.xcheck.T @ wa


def _evaluate(ds, w, lam, alpha, image):
    """Primal/dual values and the model pieces implied by ``alpha``."""
    if ds.is_gram:
        margins = image / lam
        sq = float((w * alpha) @ image)
        beta = None
    else:
        beta = image / lam
        margins = ds.xcheck @ beta
        sq = float(image @ image)
    p = float(w @ loss_value(ds.loss, ds.y, margins)) + sq / (2.0 * lam)
    conj, finite = conjugate_values(ds.loss, ds.y, -alpha)
    d = -float(w @ conj) - sq / (2.0 * lam)
    return p, d, beta, margins, sq / lam ** 2


def _dual_only(ds, w, lam, alpha, image):
    conj, _ = conjugate_values(ds.loss, ds.y, -alpha)
    if ds.is_gram:
        sq = float((w * alpha) @ image)
    else:
        sq = float(image @ image)
    return -float(w @ conj) - sq / (2.0 * lam)


def polish_hinge(ds: Dataset, w, lam, alpha, tol=1e-10):
    """Active-set refinement of a hinge-loss dual iterate.

    Samples with ``0 < alpha_i < 1`` are taken as margin support vectors and
    their duals are re-solved so that their margins equal 1 exactly
    (minimum-norm least squares when the margin system is singular).  The
    result is clipped to the box; ``None`` is returned if the free set is
    empty.
    """
    free = np.flatnonzero((alpha > tol) & (alpha < 1.0 - tol) & (w > 0))
    if free.size == 0:
        return None
    upper = np.flatnonzero((alpha >= 1.0 - tol) & (w > 0))
    wa_u = w[upper]
    if ds.is_gram:
        k_ff = ds.kcheck[np.ix_(free, free)]
        rhs = lam - ds.kcheck[np.ix_(free, upper)] @ wa_u
    else:
        xf = ds.xcheck[free]
        k_ff = xf @ xf.T
        rhs = lam - xf @ (ds.xcheck[upper].T @ wa_u)
    sol, *_ = np.linalg.lstsq(k_ff, rhs, rcond=1e-13)
    new = alpha.copy()
    new[upper] = 1.0
    new[free] = np.clip(sol / w[free], 0.0, 1.0)
    new[(alpha <= tol) | (w <= 0)] = 0.0
    return new


def train(ds: Dataset, w, lam: float, cfg: SolverConfig | None = None,
          alpha0=None, raise_on_failure: bool = True) -> ModelState:
    """Maximize the dual at weights ``w`` and return the certified model.

    Stops once ``P - D <= cfg.rel_gap_tol * max(1, |P|)`` and, unless
    ``cfg.kkt_tol`` is None, the KKT violation is at most ``cfg.kkt_tol``.
    A small gap alone leaves hinge duals near the kink loosely determined.
    Dual variables of zero-weight samples are held at 0.

    Raises
    ------
    ConvergenceError
        If ``cfg.max_epochs`` sweeps do not reach the targets (only when
        ``raise_on_failure``; otherwise the model comes back with
        ``converged=False``).
    """
    cfg = cfg or SolverConfig()
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (ds.n,):
        raise DimensionError(f"weights have shape {w.shape}, expected ({ds.n},)")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if ds.loss.kind not in LossKind:
        raise ValueError(f"unsupported loss {ds.loss}")

    lo, hi = ds.loss.dual_box()
    if alpha0 is None:
        alpha = np.zeros(ds.n)
    else:
        alpha = np.clip(np.array(alpha0, dtype=np.float64), lo, hi)
    alpha[w == 0] = 0.0
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    cyclic = np.arange(ds.n, dtype=np.int64)

    image = _image(ds, w, alpha)
    p, d, beta, margins, bsq = _evaluate(ds, w, lam, alpha, image)
    gap = p - d
    epoch = 0

    def done():
        if gap > cfg.rel_gap_tol * max(1.0, abs(p)):
            return False
        if cfg.kkt_tol is None:
            return True
        return _kkt_violations(ds, w, alpha, margins, cfg.kkt_tol).max(initial=0.0) <= cfg.kkt_tol

    converged = done()
    while not converged and epoch < cfg.max_epochs:
        order = cyclic if cfg.sweep_order == "cyclic" else rng.permutation(ds.n)
        sweep(ds, w, lam, alpha, image, order)
        epoch += 1
        if ds.loss.kind == LossKind.HINGE and epoch % _POLISH_EVERY == 0:
            cand = polish_hinge(ds, w, lam, alpha)
            if cand is not None:
                cand_image = _image(ds, w, cand)
                if _dual_only(ds, w, lam, cand, cand_image) > _dual_only(ds, w, lam, alpha, _image(ds, w, alpha)):
                    alpha = cand
        # refresh the running image to stop round-off drift
        image = _image(ds, w, alpha)
        p, d, beta, margins, bsq = _evaluate(ds, w, lam, alpha, image)
        gap = p - d
        converged = done()

    model = ModelState(alpha=alpha, beta=beta, lam=float(lam), gap=max(gap, 0.0),
                       weights=w, margins=margins, beta_sqnorm=bsq, primal=p,
                       dual=d, epochs=epoch, converged=converged)
    if not converged:
        msg = (f"dual coordinate ascent stopped after {epoch} epochs with gap "
               f"{gap:.3e} (target {cfg.rel_gap_tol * max(1.0, abs(p)):.3e}")
        if cfg.kkt_tol is not None:
            msg += f", KKT target {cfg.kkt_tol:.1e}"
        msg += ")"
        if raise_on_failure:
            raise ConvergenceError(msg, model)
        logger.warning(msg)
    return model


def _kkt_violations(ds, w, alpha, margins, tol):
    viol = np.zeros(ds.n)
    for i in range(ds.n):
        if w[i] <= 0:
            continue
        t = float(margins[i])
        glo, _ = subdifferential(ds.loss, ds.y[i], t - tol)
        _, ghi = subdifferential(ds.loss, ds.y[i], t + tol)
        g = -float(alpha[i])
        viol[i] = max(glo - g, g - ghi, 0.0)
    return viol


@dataclass
class KKTReport:
    max_violation: float
    violations: np.ndarray
    worst: int


def check_kkt(ds: Dataset, m: ModelState, tol: float = 1e-6) -> KKTReport:
    """Distance of ``-alpha_i`` to the loss subdifferential at the model margin.

    The subdifferential is taken over margins within ``tol`` of the computed
    one, so a support vector sitting at a kink up to round-off is not flagged.
    Zero-weight samples are not constrained and report 0.
    """
    viol = _kkt_violations(ds, m.weights, m.alpha, m.margins, tol)
    worst = int(np.argmax(viol)) if ds.n else -1
    return KKTReport(float(viol.max(initial=0.0)), viol, worst)
