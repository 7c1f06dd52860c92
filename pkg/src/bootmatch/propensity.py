"""Propensity scores from ridge-stabilised logistic regression fitted by IRLS."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, EmptyDesign, SingleClass

SCORE_CLAMP = 1e-12


@dataclass(frozen=True)
class DesignSpec:
    """Which covariates enter the propensity model.

    Attributes
    ----------
    use_features : bool
        Include the feature matrix columns.
    use_pre_period_responses : bool
        Include the pre-period response columns.
    standardize : bool
        Center and scale each covariate over the fitting sample.
    """

    use_features: bool = True
    use_pre_period_responses: bool = True
    standardize: bool = True

    def __post_init__(self):
        if not (self.use_features or self.use_pre_period_responses):
            raise EmptyDesign("design spec selects no covariates")


@dataclass(frozen=True)
class Standardization:
    """Per-covariate centering/scaling applied by :func:`build_design`.

    ``constant_columns`` lists covariate indices (0-based, excluding the
    intercept) whose sd was zero; those are centered with unit divisor.
    """

    means: tuple
    scales: tuple
    constant_columns: tuple = ()

    @classmethod
    def identity(cls, p):
        return cls((0.0,) * p, (1.0,) * p, ())


@dataclass(frozen=True)
class PropensityModel:
    """Fitted logistic propensity model.

    ``coefficients`` are on the original covariate scale (intercept
    first); ``fitted_coefficients`` are on the design matrix scale that
    was passed to :func:`fit_propensity` and are what
    :func:`predict_propensity` applies.
    """

    coefficients: tuple
    fitted_coefficients: tuple
    converged: bool
    iterations: int
    final_penalized_loglik: float
    ridge: float
    loglik_history: tuple
    spec: DesignSpec = None
    standardization: Standardization = None


def build_design(dataset, spec=DesignSpec()):
    """Design matrix ``[1, features?, pre-period responses?]``.

    Returns
    -------
    design : ndarray, shape (n_subjects, 1 + p)
    standardization : Standardization
    """
    blocks = []
    if spec.use_features:
        blocks.append(dataset.features)
    if spec.use_pre_period_responses:
        blocks.append(dataset.responses[:, :dataset.pre_period_len])
    if not blocks:
        raise EmptyDesign("design spec selects no covariates")
    cov = np.hstack(blocks)
    p = cov.shape[1]
    if spec.standardize:
        means = cov.mean(axis=0)
        sds = cov.std(axis=0)
        constant = np.flatnonzero(sds == 0.0)
        scales = np.where(sds == 0.0, 1.0, sds)
        cov = (cov - means) / scales
        std = Standardization(tuple(means.tolist()), tuple(scales.tolist()), tuple(constant.tolist()))
    else:
        std = Standardization.identity(p)
    design = np.empty((cov.shape[0], p + 1))
    design[:, 0] = 1.0
    design[:, 1:] = cov
    return design, std


def _penalty_vector(p1, ridge):
    r = np.full(p1, float(ridge))
    r[0] = 0.0
    return r


def penalized_loglik(beta, design, labels, ridge):
    """Bernoulli log-likelihood minus (ridge/2) * ||beta without intercept||^2."""
    beta = np.asarray(beta, dtype=float)
    eta = design @ beta
    ll = float(labels @ eta - np.logaddexp(0.0, eta).sum())
    return ll - 0.5 * ridge * float(beta[1:] @ beta[1:])


def penalized_gradient(beta, design, labels, ridge):
    beta = np.asarray(beta, dtype=float)
    resid = labels - expit(design @ beta)
    return design.T @ resid - _penalty_vector(beta.size, ridge) * beta


def fit_propensity(design, labels, ridge=1e-6, max_iter=50, tol=1e-8,
                   *, standardization=None, spec=None):
    """Maximise the ridge-penalised logistic log-likelihood by IRLS.

    Newton/IRLS steps are halved until the penalised log-likelihood does
    not decrease. Convergence means the largest absolute coefficient
    update fell below ``tol`` within ``max_iter`` steps; a model that did
    not converge is still returned with ``converged=False``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"design has {X.shape[0]} rows, labels has {y.shape[0]}")
    n_pos = int(np.count_nonzero(y == 1))
    if n_pos == 0 or n_pos == y.size:
        raise SingleClass("both treated and control subjects are required")
    p1 = X.shape[1]
    pen = _penalty_vector(p1, ridge)
    beta = np.zeros(p1)
    pll = penalized_loglik(beta, X, y, ridge)
    history = [pll]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        mu = expit(X @ beta)
        w = mu * (1.0 - mu)
        grad = X.T @ (y - mu) - pen * beta
        hess = (X * w[:, None]).T @ X
        hess[np.diag_indices_from(hess)] += pen
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            new_pll = penalized_loglik(candidate, X, y, ridge)
            if new_pll >= pll:
                break
            scale *= 0.5
        else:
            # no ascent direction left at machine precision
            converged = bool(np.max(np.abs(scale * step)) < tol)
            break
        delta = float(np.max(np.abs(candidate - beta)))
        beta, pll = candidate, new_pll
        history.append(pll)
        if delta < tol:
            converged = True
            break

    std = standardization or Standardization.identity(p1 - 1)
    means = np.asarray(std.means)
    scales = np.asarray(std.scales)
    original = np.empty(p1)
    original[1:] = beta[1:] / scales
    original[0] = beta[0] - float(original[1:] @ means)
    return PropensityModel(
        coefficients=tuple(original.tolist()),
        fitted_coefficients=tuple(beta.tolist()),
        converged=converged,
        iterations=it,
        final_penalized_loglik=pll,
        ridge=float(ridge),
        loglik_history=tuple(history),
        spec=spec,
        standardization=std,
    )


def linear_predictor(model, design):
    X = np.asarray(design, dtype=float)
    beta = np.asarray(model.fitted_coefficients)
    if X.ndim != 2 or X.shape[1] != beta.size:
        raise DimensionMismatch(f"design has {X.shape[-1]} columns, model expects {beta.size}")
    return X @ beta


def predict_propensity(model, design):
    """Inverse-logit scores clamped to [1e-12, 1 - 1e-12]."""
    return np.clip(expit(linear_predictor(model, design)), SCORE_CLAMP, 1.0 - SCORE_CLAMP)
