import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bootmatch.errors import DimensionMismatch, EmptyDesign, SingleClass
from bootmatch.propensity import (
    DesignSpec,
    build_design,
    fit_propensity,
    penalized_gradient,
    penalized_loglik,
    predict_propensity,
)

from conftest import make_dataset


def _saturated():
    x = np.array([1.0] * 10 + [0.0] * 10)
    y = np.array([1] * 8 + [0] * 2 + [1] * 2 + [0] * 8)
    X = np.column_stack([np.ones(20), x])
    return X, y


def _random_problem(seed, n=60, p=3, ridge=None):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
    beta = rng.normal(scale=0.8, size=p + 1)
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    if ridge is None:
        ridge = float(rng.choice([0.0, 1e-6, 0.1, 1.0]))
    return X, y, ridge


def test_design_shapes():
    rng = np.random.default_rng(0)
    d = make_dataset(rng.normal(size=(8, 12)), [1, 0] * 4, 6, features=rng.normal(size=(8, 2)))
    X, _ = build_design(d, DesignSpec(use_features=True, use_pre_period_responses=False))
    assert X.shape == (8, 3)
    X, std = build_design(d, DesignSpec())
    assert X.shape == (8, 9)
    assert np.all(X[:, 0] == 1.0)
    assert np.allclose(X[:, 1:].mean(axis=0), 0) and np.allclose(X[:, 1:].std(axis=0), 1)
    assert std.constant_columns == ()


def test_constant_column_flagged():
    feats = np.column_stack([np.full(6, 3.0), np.arange(6.0)])
    d = make_dataset(np.zeros((6, 2)) + np.arange(6.0)[:, None], [1, 0] * 3, 1, features=feats)
    X, std = build_design(d, DesignSpec(use_pre_period_responses=False))
    assert std.constant_columns == (0,)
    assert np.all(X[:, 1] == 0.0)


def test_empty_design():
    with pytest.raises(EmptyDesign):
        DesignSpec(use_features=False, use_pre_period_responses=False)


def test_saturated_closed_form():
    X, y = _saturated()
    m = fit_propensity(X, y, ridge=0.0)
    assert m.converged
    assert m.coefficients[0] == pytest.approx(np.log(2 / 8), abs=1e-5)
    assert m.coefficients[0] == pytest.approx(-1.38629, abs=1e-5)
    assert m.coefficients[1] == pytest.approx(np.log(8 / 2) - np.log(2 / 8), abs=1e-5)
    assert m.coefficients[1] == pytest.approx(2.77259, abs=1e-5)
    scores = predict_propensity(m, X)
    assert np.allclose(scores[:10], 0.8, atol=1e-5)


def test_noise_covariate_slope_near_zero():
    rng = np.random.default_rng(11)
    n = 20000
    x = rng.normal(size=n)
    y = (rng.random(n) < 0.3).astype(float)
    X = np.column_stack([np.ones(n), x])
    m = fit_propensity(X, y, ridge=0.0)
    p = predict_propensity(m, X)
    w = p * (1 - p)
    cov = np.linalg.inv((X * w[:, None]).T @ X)
    assert abs(m.coefficients[1]) < 3 * np.sqrt(cov[1, 1])


def test_separated_data_finite():
    x = np.linspace(-1, 1, 40)
    y = (x > 0).astype(float)
    X = np.column_stack([np.ones(40), x])
    m = fit_propensity(X, y, ridge=1e-4)
    assert m.converged
    assert np.all(np.isfinite(m.coefficients))


def test_single_class_and_dims():
    X, _ = _saturated()
    with pytest.raises(SingleClass):
        fit_propensity(X, np.ones(20))
    m = fit_propensity(*_saturated(), ridge=0.0)
    with pytest.raises(DimensionMismatch):
        predict_propensity(m, np.ones((3, 5)))


def test_predict_zero_and_clamp():
    X, y = _saturated()
    m = fit_propensity(X, y, ridge=0.0)
    zero = type(m)(**{**m.__dict__, "fitted_coefficients": (0.0, 0.0)})
    assert np.all(predict_propensity(zero, X) == 0.5)
    huge = type(m)(**{**m.__dict__, "fitted_coefficients": (1e6, 0.0)})
    assert np.all(predict_propensity(huge, X) == 1 - 1e-12)


def _fd_gradient(beta, X, y, ridge, h=1e-5):
    g = np.empty_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        g[j] = (penalized_loglik(beta + e, X, y, ridge) - penalized_loglik(beta - e, X, y, ridge)) / (2 * h)
    return g


def _rel_err(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


@pytest.mark.parametrize("seed", range(50))
def test_gradient_matches_finite_differences(seed):
    X, y, ridge = _random_problem(seed, ridge=0.5)
    m = fit_propensity(X, y, ridge=ridge)
    beta = np.asarray(m.fitted_coefficients)
    assert np.all(_rel_err(penalized_gradient(beta, X, y, ridge), _fd_gradient(beta, X, y, ridge)) < 1e-4)
    # away from the optimum the check has real signal
    off = beta + np.random.default_rng(seed).normal(size=beta.size)
    assert np.all(_rel_err(penalized_gradient(off, X, y, ridge), _fd_gradient(off, X, y, ridge)) < 1e-4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_loglik_monotone(seed):
    X, y, ridge = _random_problem(seed)
    m = fit_propensity(X, y, ridge=ridge)
    h = np.array(m.loglik_history)
    assert np.all(np.diff(h) >= -1e-10)
    assert m.final_penalized_loglik == h[-1]


@pytest.mark.parametrize("seed", range(10))
def test_standardization_equivariance(seed):
    rng = np.random.default_rng(seed)
    n = 300
    feats = rng.normal(loc=5.0, scale=[0.1, 10.0, 3.0], size=(n, 3))
    group = (rng.random(n) < 1 / (1 + np.exp(-(feats[:, 0] - 5) * 3))).astype(int)
    d = make_dataset(rng.normal(size=(n, 2)), group, 1, features=feats)
    spec_std = DesignSpec(use_pre_period_responses=False, standardize=True)
    spec_raw = DesignSpec(use_pre_period_responses=False, standardize=False)
    Xs, std = build_design(d, spec_std)
    Xr, _ = build_design(d, spec_raw)
    ms = fit_propensity(Xs, d.group, ridge=0.0, standardization=std)
    mr = fit_propensity(Xr, d.group, ridge=0.0)
    # de-standardised coefficients applied to the raw design reproduce the scores
    raw_scores = 1 / (1 + np.exp(-(Xr @ np.asarray(ms.coefficients))))
    assert np.allclose(raw_scores, predict_propensity(mr, Xr), atol=1e-8)
    assert np.allclose(predict_propensity(ms, Xs), predict_propensity(mr, Xr), atol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_score_equation(seed):
    X, y, _ = _random_problem(seed, n=200)
    m = fit_propensity(X, y, ridge=0.0)
    assert predict_propensity(m, X).mean() == pytest.approx(y.mean(), abs=1e-6)
