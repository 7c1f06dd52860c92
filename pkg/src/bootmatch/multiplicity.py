"""Combining replicate p-values: Bonferroni, Benjamini-Hochberg, Storey q-values
and the mean local false discovery rate.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePi0Warning, InsufficientData, OutOfRangeP
from .inference import signed_z
from .stats_core import gaussian_kde, normal_pdf

LFDR_MIN_N = 8
DENSITY_FLOOR = 1e-12
DEFAULT_STOREY_LAMBDA = 0.5

FINAL_P_MEAN_LFDR = "mean_lfdr"
FINAL_P_BH_FALLBACK = "min_bh_qvalue"


def _pvals(pvals):
    p = np.asarray(pvals, dtype=float).ravel()
    if p.size == 0:
        raise OutOfRangeP("at least one p-value is required")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise OutOfRangeP("p-values must lie in [0, 1]")
    return p


def bonferroni(pvals):
    p = _pvals(pvals)
    return np.minimum(1.0, p * p.size)


def bh_adjust(pvals):
    """Benjamini-Hochberg step-up q-values, returned in input order."""
    p = _pvals(pvals)
    n = p.size
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, n + 1, dtype=float)
    raw = p[order] * n / ranks
    stepped = np.minimum.accumulate(raw[::-1])[::-1]
    q = np.empty(n)
    q[order] = np.minimum(stepped, 1.0)
    return q


def storey_pi0(pvals, lam=DEFAULT_STOREY_LAMBDA):
    """min(1, #{p > lam} / ((1 - lam) N)), floored at 1/N with a warning."""
    p = _pvals(pvals)
    if not 0.0 < lam < 1.0:
        raise ValueError(f"storey lambda must lie in (0, 1), got {lam!r}")
    n = p.size
    pi0 = min(1.0, np.count_nonzero(p > lam) / ((1.0 - lam) * n))
    if pi0 == 0.0:
        warnings.warn(
            f"no p-value exceeds lambda={lam}; pi0 floored at 1/N", DegeneratePi0Warning, stacklevel=2
        )
        pi0 = 1.0 / n
    return float(pi0)


def storey(pvals, lam=DEFAULT_STOREY_LAMBDA):
    """Storey's pi0 estimate and q-values (pi0 times the BH q-values)."""
    pi0 = storey_pi0(pvals, lam)
    return pi0, pi0 * bh_adjust(pvals)


def lfdr_estimate(zvals, pi0):
    """Local FDR under a theoretical N(0, 1) null.

    lfdr_i = min(1, pi0 * phi(z_i) / f(z_i)) where f is a Gaussian KDE of
    all z-values (Silverman bandwidth) floored at 1e-12.
    """
    z = np.asarray(zvals, dtype=float).ravel()
    if z.size < LFDR_MIN_N:
        raise InsufficientData(f"local FDR needs >= {LFDR_MIN_N} statistics, got {z.size}")
    if not 0.0 < pi0 <= 1.0:
        raise ValueError(f"pi0 must lie in (0, 1], got {pi0!r}")
    f_hat = np.maximum(gaussian_kde(z, z), DENSITY_FLOOR)
    return np.minimum(1.0, pi0 * normal_pdf(z) / f_hat)


@dataclass(frozen=True)
class MultiplicitySummary:
    """All multiplicity corrections for one run.

    ``final_p`` is the mean local FDR when at least eight replicates are
    available, otherwise the smallest BH q-value (``final_p_method``
    records which).
    """

    bonferroni_min: float
    bh_qvalues: tuple
    storey_pi0: float
    storey_lambda: float
    storey_qvalues: tuple
    z_values: tuple
    lfdr_values: tuple
    final_p: float
    final_p_method: str
    warnings: tuple = ()


def summarize(pvals, effects, storey_lambda=DEFAULT_STOREY_LAMBDA):
    p = _pvals(pvals)
    effects = np.asarray(effects, dtype=float).ravel()
    if effects.shape != p.shape:
        raise ValueError(f"{p.size} p-values but {effects.size} effects")
    notes = []
    bonf = bonferroni(p)
    bh = bh_adjust(p)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegeneratePi0Warning)
        pi0, storey_q = storey(p, storey_lambda)
    notes.extend(str(w.message) for w in caught)
    z = np.array([signed_z(e, pv) for e, pv in zip(effects.tolist(), p.tolist())])
    if p.size >= LFDR_MIN_N:
        lfdr = lfdr_estimate(z, pi0)
        total = 0.0
        for v in lfdr.tolist():
            total += v
        final_p = total / lfdr.size
        method = FINAL_P_MEAN_LFDR
    else:
        lfdr = np.array([])
        final_p = float(bh.min())
        method = FINAL_P_BH_FALLBACK
        notes.append(
            f"only {p.size} replicate p-values (< {LFDR_MIN_N}); final p falls back to the minimum BH q-value"
        )
    return MultiplicitySummary(
        bonferroni_min=float(bonf.min()),
        bh_qvalues=tuple(bh.tolist()),
        storey_pi0=pi0,
        storey_lambda=float(storey_lambda),
        storey_qvalues=tuple(storey_q.tolist()),
        z_values=tuple(z.tolist()),
        lfdr_values=tuple(lfdr.tolist()),
        final_p=float(final_p),
        final_p_method=method,
        warnings=tuple(notes),
    )
