import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from drscreen.losses import eps_insensitive, hinge, squared_eps_insensitive, squared_hinge
from drscreen.problem import ModelState, build_dataset, dual_value, primal_from_dual, primal_value, with_gram
from drscreen.solver import ConvergenceError, SolverConfig, check_kkt, sweep, train

from helpers import dual_pgd, hinge_dual_value, linear_ds


def test_single_sample_matches_grid_oracle():
    # max_a a - a^2 over [0, 1]; a dense grid puts the maximizer at 0.5
    ds = build_dataset([[1.0]], [1.0], hinge())
    m = train(ds, np.ones(1), 0.5)
    assert m.alpha == pytest.approx([0.5], abs=1e-12)
    assert m.beta == pytest.approx([1.0], abs=1e-12)
    assert m.gap <= 1e-12


def test_zero_weights_give_zero_model():
    ds = build_dataset(np.random.default_rng(0).normal(size=(6, 2)), [1, -1] * 3, hinge())
    m = train(ds, np.zeros(6), 1.0)
    assert not m.alpha.any() and not m.beta.any()
    assert m.gap == 0.0


def test_orthogonal_samples_get_equal_duals():
    # separable dual: each coordinate maximizes a - a^2 / (2 lam), so a = lam
    ds = build_dataset(np.eye(2), [1.0, 1.0], hinge())
    m = train(ds, np.ones(2), 0.5)
    assert m.alpha == pytest.approx([0.5, 0.5], abs=1e-12)


def test_duplicate_samples_share_the_optimal_sum():
    ds = build_dataset([[1.0], [1.0]], [1.0, 1.0], hinge())
    m = train(ds, np.ones(2), 1.0)
    assert m.alpha.sum() == pytest.approx(1.0, abs=1e-9)
    assert m.beta == pytest.approx([1.0], abs=1e-9)


def test_kkt_examples():
    ds = build_dataset([[1.0], [2.0]], [1.0, -1.0], hinge())
    bad = ModelState(alpha=np.zeros(2), beta=np.zeros(1), lam=1.0, gap=1.0, weights=np.ones(2),
                     margins=np.zeros(2), beta_sqnorm=0.0)
    assert check_kkt(ds, bad).max_violation == pytest.approx(1.0)
    m = train(ds, np.ones(2), 0.1)
    rep = check_kkt(ds, m)
    assert rep.max_violation <= 1e-6
    assert np.all(m.alpha[m.margins > 1 + 1e-6] == 0)
    assert np.all(m.alpha[m.margins < 1 - 1e-6] == pytest.approx(1.0))


def test_input_errors():
    ds = build_dataset([[1.0]], [1.0], hinge())
    with pytest.raises(ValueError):
        train(ds, np.ones(1), 0.0)
    with pytest.raises(ValueError):
        train(ds, -np.ones(1), 1.0)
    with pytest.raises(ValueError):
        SolverConfig(rel_gap_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(max_epochs=0)


def test_non_convergence_is_reported():
    ds = linear_ds("sonar")
    with pytest.raises(ConvergenceError) as info:
        train(ds, np.ones(ds.n), 0.2, SolverConfig(max_epochs=2))
    assert info.value.model.epochs == 2
    assert "gap" in str(info.value)
    m = train(ds, np.ones(ds.n), 0.2, SolverConfig(max_epochs=2), raise_on_failure=False)
    assert not m.converged


def test_dual_never_decreases_per_coordinate():
    rng = np.random.default_rng(3)
    ds = build_dataset(rng.normal(size=(12, 3)), np.where(rng.random(12) < 0.5, 1.0, -1.0), hinge())
    w = rng.uniform(0.5, 1.5, 12)
    lam = 0.7
    alpha = np.zeros(12)
    image = ds.xcheck.T @ (w * alpha)
    prev = dual_value(ds, w, lam, alpha)
    for _ in range(20):
        for i in range(12):
            sweep(ds, w, lam, alpha, image, [i])
            assert np.all((alpha >= 0) & (alpha <= 1))
            cur = dual_value(ds, w, lam, alpha)
            assert cur >= prev - 1e-12
            prev = cur


@settings(max_examples=40)
@given(
    hnp.arrays(np.float64, (6, 3), elements=st.floats(-2, 2)),
    hnp.arrays(np.float64, 6, elements=st.floats(0.0, 2.0)),
    st.integers(1, 6), st.integers(1, 3), st.floats(0.1, 10),
)
def test_matches_reference_minimizer(X, w, n, d, lam):
    X = X[:n, :d]
    w = w[:n]
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    ds = build_dataset(X, y, hinge())
    m = train(ds, w, lam)
    K = ds.xcheck @ ds.xcheck.T
    ref = dual_pgd(K, w[None, :], lam)[0]
    d_ref = hinge_dual_value(K, w, lam, ref)
    p = primal_value(ds, w, lam, m.beta)
    assert p == pytest.approx(d_ref, abs=1e-6)
    assert np.array_equal(m.beta, primal_from_dual(ds, w, lam, m.alpha)) or \
        np.allclose(m.beta, primal_from_dual(ds, w, lam, m.alpha), rtol=0, atol=1e-12)
    assert np.all((m.alpha >= 0) & (m.alpha <= 1))


@pytest.mark.parametrize("loss", [squared_hinge(), eps_insensitive(0.1), squared_eps_insensitive(0.1)])
def test_other_losses_converge_with_kkt(loss):
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 4))
    if loss.is_classification:
        y = np.sign(X[:, 0] + 0.3 * rng.normal(size=40))
    else:
        y = X @ np.array([1.0, -0.5, 0.2, 0.0]) + 0.1 * rng.normal(size=40)
    ds = build_dataset(X, y, loss, add_intercept=True)
    m = train(ds, rng.uniform(0.5, 1.5, 40), 2.0, SolverConfig(rel_gap_tol=1e-14, max_epochs=50000))
    assert m.gap <= 1e-13 * max(1.0, abs(m.primal))
    assert check_kkt(ds, m).max_violation <= 1e-6
    lo, hi = loss.dual_box()
    assert np.all((m.alpha >= lo) & (m.alpha <= hi))


@pytest.mark.parametrize("order", ["cyclic", "shuffled"])
def test_gram_mode_reproduces_feature_mode(order):
    ds = linear_ds("heart")
    cfg = SolverConfig(sweep_order=order, seed=5)
    mf = train(ds, np.ones(ds.n), 27.0, cfg)
    mg = train(with_gram(ds), np.ones(ds.n), 27.0, cfg)
    assert mg.beta is None
    assert np.max(np.abs(mf.alpha - mg.alpha)) <= 1e-8
    assert mg.margins == pytest.approx(mf.margins, abs=1e-8)
