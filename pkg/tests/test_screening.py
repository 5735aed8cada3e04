import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drscreen.losses import eps_insensitive, hinge, squared_hinge
from drscreen.problem import ModelState, WeightBall, build_dataset, duality_gap, primal_from_dual, with_gram
from drscreen.screening import (
    NegativeGapError, ScreeningKind, dr_gap_quadratic, dr_radius, gap_radius, interval_mask,
    radius_from_gap, screen_dr, screen_per_weight,
)
from drscreen.solver import SolverConfig, train

from helpers import dual_pgd, linear_ds

TOY_X = np.array([[2.0, 1.5], [-1.5, -2.0], [0.4, 0.1], [-0.1, -0.5]])
TOY_Y = np.array([1.0, -1.0, 1.0, -1.0])


def model_from_alpha(ds, w, lam, alpha):
    alpha = np.asarray(alpha, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    beta = primal_from_dual(ds, w, lam, alpha)
    return ModelState(alpha=alpha, beta=beta, lam=lam, gap=0.0, weights=w,
                      margins=ds.xcheck @ beta, beta_sqnorm=float(beta @ beta))


def test_radius_examples():
    assert radius_from_gap(1.0, 2.0) == pytest.approx(1.0)
    assert radius_from_gap(1.0, 0.5) == pytest.approx(2.0)
    assert radius_from_gap(-1e-14, 1.0) == 0.0
    assert radius_from_gap(math.inf, 1.0) == math.inf
    with pytest.raises(NegativeGapError):
        radius_from_gap(-1e-6, 1.0)
    with pytest.raises(ValueError):
        radius_from_gap(1.0, 0.0)


def test_interval_examples():
    ds = build_dataset([[1.0]], [1.0], hinge())
    assert interval_mask(ds, [1.5], 0.4).tolist() == [True]
    assert interval_mask(ds, [1.5], 0.6).tolist() == [False]
    # the flat region of the hinge excludes its kink
    assert interval_mask(ds, [1.0], 0.0).tolist() == [False]
    assert interval_mask(ds, [5.0], math.inf).tolist() == [False]
    sq = build_dataset([[1.0]], [1.0], squared_hinge())
    assert interval_mask(sq, [1.0], 0.0).tolist() == [True]


def test_interval_regression_uses_each_target():
    ds = build_dataset([[1.0], [1.0]], [0.0, 3.0], eps_insensitive(0.5))
    assert interval_mask(ds, [0.1, 3.2], 0.2).tolist() == [True, True]
    assert interval_mask(ds, [0.1, 0.1], 0.2).tolist() == [True, False]


def test_gap_quadratic_with_zero_duals_is_linear():
    ds = build_dataset(TOY_X, TOY_Y, hinge())
    m = model_from_alpha(ds, np.ones(4), 2.0, np.zeros(4))
    q = dr_gap_quadratic(ds, m)
    assert not np.any(q.A)
    # hinge at margin 0 costs 1 and conj(0) = 0
    assert q.b == pytest.approx(np.full(4, 0.5))
    assert q.const == 0.0
    R = dr_radius(ds, m, WeightBall(np.ones(4), 0.5))
    assert R == pytest.approx(math.sqrt(2 * (4 + 0.5 * 2.0) / 2.0))


def test_single_sample_optimum_has_zero_gap():
    ds = build_dataset([[1.0]], [1.0], hinge())
    m = train(ds, np.ones(1), 0.5)
    assert duality_gap(ds, np.ones(1), 0.5, m) == pytest.approx(0.0, abs=1e-14)
    cert = screen_per_weight(ds, m)
    assert cert.radius == pytest.approx(0.0, abs=1e-6)
    assert cert.kind is ScreeningKind.PER_WEIGHT


def test_infinite_conjugate_is_rejected():
    ds = build_dataset([[1.0]], [1.0], hinge())
    m = model_from_alpha(ds, np.ones(1), 1.0, [1.5])
    with pytest.raises(ValueError):
        dr_gap_quadratic(ds, m)


problems = st.tuples(st.integers(0, 2**32 - 1), st.integers(2, 8), st.floats(0.05, 10))


@given(problems)
def test_gap_quadratic_reproduces_duality_gap(problem):
    seed, n, lam = problem
    rng = np.random.default_rng(seed)
    ds = build_dataset(rng.normal(size=(n, 3)), np.where(rng.random(n) < 0.5, 1.0, -1.0), hinge())
    m = model_from_alpha(ds, rng.uniform(0, 2, n), lam, rng.uniform(0, 1, n))
    q = dr_gap_quadratic(ds, m)
    for _ in range(5):
        w = rng.uniform(0, 2, n)
        assert q(w) == pytest.approx(duality_gap(ds, w, lam, m), rel=1e-10, abs=1e-10)


def test_zero_radius_ball_matches_per_weight():
    ds = linear_ds("heart")
    m = train(ds, np.ones(ds.n), 27.0)
    ball = WeightBall(np.ones(ds.n), 0.0)
    assert dr_radius(ds, m, ball) == gap_radius(ds, ball.center, m.lam, m)
    a = screen_dr(ds, m, ball)
    b = screen_per_weight(ds, m)
    assert np.array_equal(a.mask, b.mask)
    assert a.kind is ScreeningKind.DR


def test_huge_ball_screens_nothing():
    ds = linear_ds("sonar")
    m = train(ds, np.ones(ds.n), 20.0)
    cert = screen_dr(ds, m, WeightBall(np.ones(ds.n), 1e4))
    assert cert.n_removed == 0 and cert.rate == 0.0


def test_two_sample_radius_oracle():
    # frozen from a 2e6-point grid over the circle of weights
    ds = build_dataset([[1.0, 0.2], [0.4, 1.0]], [1.0, 1.0], hinge())
    m = model_from_alpha(ds, np.ones(2), 1.0, [0.66162571, 0.51984877])
    R = dr_radius(ds, m, WeightBall(np.ones(2), 0.1))
    assert R == pytest.approx(0.07762559419670957, abs=1e-9)


@pytest.mark.parametrize("lam,S,expected", [
    (2.0, 0.01, [False, True, False, False]),
    (1.0, 0.3, [True, True, False, False]),
])
def test_toy_masks_are_safe_under_retraining(lam, S, expected):
    ds = build_dataset(TOY_X, TOY_Y, hinge())
    m = train(ds, np.ones(4), lam, SolverConfig(rel_gap_tol=1e-14))
    cert = screen_dr(ds, m, WeightBall(np.ones(4), S))
    assert cert.mask.tolist() == expected

    rng = np.random.default_rng(11)
    u = rng.normal(size=(1000, 4))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    scale = np.sqrt(rng.uniform(0, 1, (1000, 1)))
    scale[:500] = 1.0
    W = np.clip(1.0 + S * scale * u, 0.0, None)
    K = ds.xcheck @ ds.xcheck.T
    A = dual_pgd(K, W, lam, iters=5000)
    margins = ((W * A) @ K) / lam
    assert np.all(margins[:, cert.mask] > 1 - 1e-6)


def test_dr_mask_shrinks_with_radius_and_is_inside_center_mask():
    ds = linear_ds("breast-cancer")
    m = train(ds, np.ones(ds.n), 68.3)
    center = screen_per_weight(ds, m).mask
    prev = center
    for S in (0.0, 0.1, 0.5, 1.0, 2.0, 4.0):
        mask = screen_dr(ds, m, WeightBall(np.ones(ds.n), S)).mask
        assert not np.any(mask & ~prev)
        prev = mask


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_gram_mode_gives_same_certificate(seed, S):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 3))
    y = np.where(X[:, 0] + 0.5 * rng.normal(size=15) > 0, 1.0, -1.0)
    ds = build_dataset(X, y, hinge(), add_intercept=True)
    m = train(ds, np.ones(15), 1.0, SolverConfig(rel_gap_tol=1e-12))
    ball = WeightBall(np.ones(15), S)
    a = screen_dr(ds, m, ball)
    b = screen_dr(with_gram(ds), m, ball)
    # radii are square roots of gaps, so round-off in a near-zero gap shows up at ~1e-7
    assert b.radius == pytest.approx(a.radius, rel=1e-8, abs=1e-6)
    slack = ds.row_norms * 1e-6
    lo_gap = np.abs(m.margins - ds.row_norms * a.radius - 1) > slack
    assert np.array_equal(a.mask[lo_gap], b.mask[lo_gap])
