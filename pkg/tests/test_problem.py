import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from drscreen.losses import Unbounded, eps_insensitive, hinge, squared_hinge
from drscreen.problem import (
    DimensionError, ModelState, WeightBall, build_dataset, build_gram_dataset, dual_value,
    duality_gap, primal_from_dual, primal_value, with_gram,
)


def test_xcheck_flips_rows_by_label():
    ds = build_dataset([[2.0]], [-1.0], hinge())
    assert ds.xcheck.tolist() == [[-2.0]]
    ds = build_dataset([[1, 1], [2, 1]], [1, -1], hinge())
    assert ds.xcheck.tolist() == [[1, 1], [-2, -1]]


def test_regression_keeps_design():
    ds = build_dataset([[3.0]], [0.5], eps_insensitive(0.1))
    assert ds.xcheck.tolist() == [[3.0]]


def test_intercept_column_and_row_norms():
    ds = build_dataset([[3.0, 4.0], [0.0, 0.0]], [1, -1], hinge(), add_intercept=True)
    assert ds.has_intercept
    assert ds.X[:, -1].tolist() == [1.0, 1.0]
    assert ds.row_norms == pytest.approx([np.sqrt(26.0), 1.0], rel=1e-15)


@pytest.mark.parametrize("X,y,err", [
    ([[1.0]], [0.5], ValueError),
    (np.zeros((0, 2)), [], ValueError),
    ([[np.nan]], [1.0], ValueError),
    ([[np.inf]], [1.0], ValueError),
    ([[1.0], [2.0]], [1.0], DimensionError),
])
def test_build_dataset_errors(X, y, err):
    with pytest.raises(err):
        build_dataset(X, y, hinge())


def test_gram_dataset_intercept_and_norms():
    K = np.array([[4.0, 1.0], [1.0, 9.0]])
    ds = build_gram_dataset(K, [1, -1], hinge(), add_intercept=True)
    assert ds.kcheck.tolist() == [[5.0, -2.0], [-2.0, 10.0]]
    assert ds.row_norms == pytest.approx(np.sqrt([5.0, 10.0]))


def test_primal_examples():
    ds = build_dataset([[1.0]], [1.0], hinge())
    assert primal_value(ds, [1.0], 2.0, [0.0]) == pytest.approx(1.0)
    assert primal_value(ds, [1.0], 2.0, [1.0]) == pytest.approx(1.0)
    assert primal_value(ds, [0.0], 2.0, [0.0]) == 0.0
    with pytest.raises(DimensionError):
        primal_value(ds, [1.0], 2.0, [0.0, 1.0])


def test_dual_examples():
    ds = build_dataset([[1.0]], [1.0], hinge())
    assert dual_value(ds, [1.0], 2.0, [1.0]) == pytest.approx(0.75)
    assert dual_value(ds, [1.0], 2.0, [0.0]) == 0.0
    assert dual_value(ds, [1.0], 2.0, [1.5]) is Unbounded.NEG
    with pytest.raises(DimensionError):
        dual_value(ds, [1.0], 2.0, [1.0, 1.0])


def test_primal_from_dual_examples():
    ds = build_dataset([[1.0]], [1.0], hinge())
    assert primal_from_dual(ds, [1.0], 2.0, [1.0]).tolist() == [0.5]
    ds2 = build_dataset(np.eye(2), [1, 1], hinge())
    assert primal_from_dual(ds2, [1.0, 2.0], 1.0, [0.0, 0.0]).tolist() == [0.0, 0.0]
    assert primal_from_dual(ds2, [1.0, 2.0], 1.0, [1.0, 1.0]).tolist() == [1.0, 2.0]


def test_weight_ball_validation():
    with pytest.raises(ValueError):
        WeightBall(np.array([1.0, -0.1]), 1.0)
    with pytest.raises(ValueError):
        WeightBall(np.ones(2), -1.0)
    ball = WeightBall(np.ones(2), 0.5)
    assert ball.contains([1.3, 1.4])
    assert not ball.contains([1.5, 1.5])


def _gap_model(ds, w, lam, alpha):
    beta = primal_from_dual(ds, w, lam, alpha)
    return ModelState(alpha=np.asarray(alpha), beta=beta, lam=lam, gap=0.0, weights=np.asarray(w),
                      margins=ds.xcheck @ beta, beta_sqnorm=float(beta @ beta))


problems = st.tuples(
    hnp.arrays(np.float64, (5, 3), elements=st.floats(-3, 3)),
    hnp.arrays(np.float64, 5, elements=st.floats(0, 1)),
    hnp.arrays(np.float64, 5, elements=st.floats(0, 2)),
    hnp.arrays(np.float64, 3, elements=st.floats(-3, 3)),
    st.floats(0.05, 20),
)


@given(problems, st.sampled_from([hinge(), squared_hinge()]))
def test_weak_duality(problem, loss):
    X, alpha, w, beta, lam = problem
    y = np.where(np.arange(5) % 2 == 0, 1.0, -1.0)
    ds = build_dataset(X, y, loss)
    d = dual_value(ds, w, lam, alpha)
    assert d is not Unbounded.NEG
    assert primal_value(ds, w, lam, beta) >= d - 1e-9 * (1 + abs(d))


@given(problems)
def test_gram_mode_objectives_agree(problem):
    X, alpha, w, _, lam = problem
    y = np.where(np.arange(5) % 3 == 0, -1.0, 1.0)
    ds = build_dataset(X, y, hinge())
    gs = with_gram(ds)
    assert dual_value(gs, w, lam, alpha) == pytest.approx(dual_value(ds, w, lam, alpha), rel=1e-12, abs=1e-12)
    m = _gap_model(ds, w, lam, alpha)
    assert duality_gap(gs, w, lam, m) == pytest.approx(duality_gap(ds, w, lam, m), rel=1e-10, abs=1e-10)
