"""Shared fixtures-by-function for the test modules."""
import functools
from pathlib import Path

import numpy as np

from drscreen.libsvm import parse_libsvm
from drscreen.losses import hinge
from drscreen.problem import build_dataset, build_gram_dataset

DATA = Path(__file__).resolve().parents[1] / "data"
DATASETS = ("sonar", "heart", "ionosphere", "breast-cancer")

# lines collected by the acceptance module, echoed in the terminal summary
ACCEPTANCE = []


def data_path(name):
    return DATA / f"{name}_scale"


@functools.lru_cache(maxsize=None)
def raw(name):
    return parse_libsvm(data_path(name))


@functools.lru_cache(maxsize=None)
def linear_ds(name, intercept=True):
    d = raw(name)
    return build_dataset(d.X, d.y, hinge(), add_intercept=intercept, name=name)


@functools.lru_cache(maxsize=None)
def gram_of(name, intercept=True):
    d = raw(name)
    return build_gram_dataset(d.X @ d.X.T, d.y, hinge(), add_intercept=intercept, name=name)


def dual_pgd(K, w, lam, lo=0.0, hi=1.0, iters=20000):
    """Reference hinge dual maximizer by projected gradient ascent.

    Works on a batch: ``w`` has shape (m, n) and the result is (m, n).
    """
    w = np.atleast_2d(w)
    L = (w.max(axis=1) ** 2)[:, None] * np.linalg.eigvalsh(K)[-1] / lam
    step = 1.0 / np.maximum(L, 1e-12)
    a = np.zeros_like(w)
    for _ in range(iters):
        grad = w - w * ((w * a) @ K) / lam
        a = np.clip(a + step * grad, lo, hi)
    return a


def hinge_dual_value(K, w, lam, a):
    u = w * a
    return float(u.sum() - u @ K @ u / (2 * lam))
