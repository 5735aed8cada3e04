"""Weighted L2-regularized empirical risk minimization: data, objectives, KKT maps.

The primal problem for sample weights ``w >= 0`` is::

    P_w(beta) = sum_i w_i * loss(xc_i @ beta) + (lam / 2) * ||beta||^2

and its Fenchel dual is::

    D_w(alpha) = -sum_i w_i * conj(-alpha_i) - ||xc.T @ (w * alpha)||^2 / (2 lam)

where ``xc`` is the loss-adjusted design (rows multiplied by the labels for
classification).  At the optimum ``beta = xc.T @ (w * alpha) / lam``.

A dataset can also be held in Gram mode, where only the label-adjusted inner
products ``kc = xc @ xc.T`` are known.  Everything the solver and the screening
rules need is expressible through ``kc``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .losses import Loss, Unbounded, conjugate_values, loss_value


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Training data in feature mode (``xcheck``) or Gram mode (``kcheck``).

    Attributes
    ----------
    X : ndarray (n, d) or None
        Raw inputs, intercept column included when ``has_intercept``.
    y : ndarray (n,)
        Labels (+-1 for classification losses).
    xcheck : ndarray (n, d) or None
        Loss-adjusted design; ``y[:, None] * X`` for classification.
    kcheck : ndarray (n, n) or None
        ``xcheck @ xcheck.T``.  Always present in Gram mode; ``None`` in
        feature mode.
    row_norms : ndarray (n,)
        Euclidean norms of the rows of ``xcheck``.
    """

    X: np.ndarray | None
    y: np.ndarray
    xcheck: np.ndarray | None
    has_intercept: bool
    row_norms: np.ndarray
    loss: Loss
    kcheck: np.ndarray | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int | None:
        return None if self.xcheck is None else self.xcheck.shape[1]

    @property
    def is_gram(self) -> bool:
        return self.xcheck is None

    def dual_image_sqnorm(self, v):
        """``||xcheck.T @ v||^2`` for a length-n vector ``v``."""
        if self.is_gram:
            return float(v @ (self.kcheck @ v))
        z = self.xcheck.T @ v
        return float(z @ z)

    def inner(self, v):
        """``xcheck @ xcheck.T @ v`` (margins up to the factor ``1/lam``)."""
        if self.is_gram:
            return self.kcheck @ v
        return self.xcheck @ (self.xcheck.T @ v)

    def subset(self, keep) -> "Dataset":
        """Dataset restricted to the rows selected by index array or mask ``keep``."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        kc = None if self.kcheck is None else self.kcheck[np.ix_(keep, keep)]
        return Dataset(
            X=None if self.X is None else self.X[keep],
            y=self.y[keep],
            xcheck=None if self.xcheck is None else self.xcheck[keep],
            has_intercept=self.has_intercept,
            row_norms=self.row_norms[keep],
            loss=self.loss,
            kcheck=kc,
            name=self.name,
            meta=dict(self.meta),
        )


def _check_labels(y, loss):
    if loss.is_classification and not np.all((y == 1.0) | (y == -1.0)):
        bad = np.flatnonzero((y != 1.0) & (y != -1.0))[:5]
        raise ValueError(
            f"{loss.name} needs labels in {{-1, +1}}; offending rows {bad.tolist()}"
        )


def build_dataset(X, y, loss: Loss, add_intercept: bool = False, name: str = "") -> Dataset:
    """Assemble a feature-mode dataset, appending an all-ones column on request."""
    X = np.array(X, dtype=np.float64, ndmin=2)
    y = np.array(y, dtype=np.float64, ndmin=1)
    if X.size == 0 or X.shape[0] == 0:
        raise ValueError("empty input matrix")
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")
    _check_labels(y, loss)
    if add_intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    xcheck = y[:, None] * X if loss.is_classification else X.copy()
    row_norms = np.sqrt(np.einsum("ij,ij->i", xcheck, xcheck))
    return Dataset(X, y, xcheck, bool(add_intercept), row_norms, loss, name=name)


def build_gram_dataset(K, y, loss: Loss, add_intercept: bool = False, name: str = "") -> Dataset:
    """Assemble a Gram-mode dataset from the raw kernel matrix ``K``.

    ``add_intercept`` appends a constant feature equal to one, i.e. adds 1 to
    every kernel entry.
    """
    K = np.array(K, dtype=np.float64, ndmin=2)
    y = np.array(y, dtype=np.float64, ndmin=1)
    n = y.shape[0]
    if K.shape != (n, n):
        raise DimensionError(f"Gram matrix has shape {K.shape}, expected ({n}, {n})")
    if n == 0:
        raise ValueError("empty Gram matrix")
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(y))):
        raise ValueError("K and y must be finite")
    _check_labels(y, loss)
    if add_intercept:
        K = K + 1.0
    kcheck = (y[:, None] * K) * y[None, :] if loss.is_classification else K.copy()
    row_norms = np.sqrt(np.maximum(np.diag(kcheck), 0.0))
    return Dataset(None, y, None, bool(add_intercept), row_norms, loss, kcheck=kcheck, name=name)


def with_gram(ds: Dataset) -> Dataset:
    """Gram-mode twin of a feature-mode dataset (linear kernel on ``xcheck``)."""
    if ds.is_gram:
        return ds
    return Dataset(
        None, ds.y, None, ds.has_intercept, ds.row_norms.copy(), ds.loss,
        kcheck=ds.xcheck @ ds.xcheck.T, name=ds.name, meta=dict(ds.meta),
    )


@dataclass(frozen=True)
class WeightBall:
    """Euclidean ball ``{w : ||w - center|| <= radius}`` of sample weights."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        object.__setattr__(self, "center", c)
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("ball center must be finite and nonnegative")
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise ValueError(f"ball radius must be finite and >= 0, got {self.radius}")

    def contains(self, w, rtol=1e-12) -> bool:
        return float(np.linalg.norm(np.asarray(w) - self.center)) <= self.radius * (1 + rtol) + rtol


@dataclass
class ModelState:
    """Trained primal/dual pair at weight vector ``weights``.

    ``beta`` is ``None`` in Gram mode; ``margins`` (``xcheck @ beta``) and
    ``beta_sqnorm`` are always available.
    """

    alpha: np.ndarray
    beta: np.ndarray | None
    lam: float
    gap: float
    weights: np.ndarray
    margins: np.ndarray
    beta_sqnorm: float
    primal: float = math.nan
    dual: float = math.nan
    epochs: int = 0
    converged: bool = True


def _check_weights(ds: Dataset, w, lam):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (ds.n,):
        raise DimensionError(f"weights have shape {w.shape}, expected ({ds.n},)")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return w


def primal_value(ds: Dataset, w, lam: float, beta) -> float:
    """Weighted regularized risk at ``beta`` (feature mode only)."""
    w = _check_weights(ds, w, lam)
    if ds.is_gram:
        raise TypeError("primal_value needs explicit features; use primal_from_margins")
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (ds.d,):
        raise DimensionError(f"beta has shape {beta.shape}, expected ({ds.d},)")
    t = ds.xcheck @ beta
    return primal_from_margins(ds, w, lam, t, float(beta @ beta))


def primal_from_margins(ds: Dataset, w, lam, margins, beta_sqnorm) -> float:
    w = np.asarray(w, dtype=np.float64)
    losses = loss_value(ds.loss, ds.y, margins)
    return float(w @ losses) + 0.5 * lam * beta_sqnorm


def dual_value(ds: Dataset, w, lam: float, alpha):
    """Dual objective; ``Unbounded.NEG`` when a weighted conjugate term diverges.

    Zero-weight samples contribute nothing regardless of ``alpha``.
    """
    w = _check_weights(ds, w, lam)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (ds.n,):
        raise DimensionError(f"alpha has shape {alpha.shape}, expected ({ds.n},)")
    conj, finite = conjugate_values(ds.loss, ds.y, -alpha)
    if np.any(~finite & (w != 0)):
        return Unbounded.NEG
    wa = w * alpha
    return -float(w @ conj) - ds.dual_image_sqnorm(wa) / (2.0 * lam)


def primal_from_dual(ds: Dataset, w, lam: float, alpha):
    """Primal coefficients ``xcheck.T @ (w * alpha) / lam`` (feature mode)."""
    w = _check_weights(ds, w, lam)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (ds.n,):
        raise DimensionError(f"alpha has shape {alpha.shape}, expected ({ds.n},)")
    if ds.is_gram:
        raise TypeError("Gram-mode datasets have no explicit primal vector")
    return ds.xcheck.T @ (w * alpha) / lam


def margins_from_dual(ds: Dataset, w, lam, alpha):
    """``xcheck @ beta`` with ``beta`` from the dual, valid in both modes."""
    return ds.inner(np.asarray(w) * np.asarray(alpha)) / lam


def duality_gap(ds: Dataset, w, lam, model: ModelState) -> float:
    """``P_w(beta_hat) - D_w(alpha_hat)`` for the model's primal/dual pair.

    The weights ``w`` need not be those the model was trained with.
    """
    w = _check_weights(ds, w, lam)
    p = primal_from_margins(ds, w, lam, model.margins, model.beta_sqnorm)
    d = dual_value(ds, w, lam, model.alpha)
    if d is Unbounded.NEG:
        return math.inf
    return p - d
