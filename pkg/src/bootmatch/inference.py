"""Per-replicate effect estimation on a matched sample."""

from dataclasses import dataclass, field

import numpy as np

from .data_model import post_period_means, pre_period_means
from .errors import DegenerateSample
from .stats_core import normal_quantile, paired_t_test, welch_t_test

P_CLAMP = 1e-15


@dataclass(frozen=True)
class ReplicateResult:
    """One bootstrap replicate.

    Numeric fields are ``None`` when ``status`` is ``"failed"``; ``reason``
    then names the error class that stopped the replicate.
    """

    replicate_index: int
    replicate_seed: int
    status: str = "ok"
    reason: str = None
    effect: float = None
    p_value: float = None
    z_value: float = None
    pre_balance_p: float = None
    n_pairs: int = 0
    unmatched_treated: int = 0
    propensity_converged: bool = None
    pre_gaps: tuple = ()
    warnings: tuple = field(default_factory=tuple)

    @property
    def ok(self):
        return self.status == "ok"


def signed_z(effect, p_value):
    """sign(effect) * Phi^-1(1 - p/2), with p clamped away from 0 and 1."""
    p = min(max(p_value, P_CLAMP), 1.0 - P_CLAMP)
    sign = (effect > 0) - (effect < 0)
    return sign * normal_quantile(1.0 - 0.5 * p) if sign else 0.0


def _require_pairs(matched):
    if matched.n_pairs < 2:
        raise DegenerateSample(f"need >= 2 matched pairs, got {matched.n_pairs}")


def did_pair_differences(dataset, matched):
    """Within-pair difference of (post mean - pre mean) changes."""
    t_rows = np.asarray(matched.treated_rows, dtype=np.intp)
    c_rows = np.asarray(matched.control_rows, dtype=np.intp)
    change_t = post_period_means(dataset, t_rows) - pre_period_means(dataset, t_rows)
    change_c = post_period_means(dataset, c_rows) - pre_period_means(dataset, c_rows)
    return change_t - change_c


def estimate_effect_did(dataset, matched):
    """Matched difference-in-differences with a paired t-test.

    Returns
    -------
    effect : float
        Mean within-pair DID.
    test : TestResult
    """
    _require_pairs(matched)
    d = did_pair_differences(dataset, matched)
    test = paired_t_test(d)
    return float(d.mean()), test


def estimate_effect_post(dataset, matched):
    """Post-period mean difference, matched treated minus matched controls (Welch)."""
    _require_pairs(matched)
    post_t = post_period_means(dataset, matched.treated_rows)
    post_c = post_period_means(dataset, matched.control_rows)
    test = welch_t_test(post_t, post_c)
    return float(post_t.mean() - post_c.mean()), test


ESTIMATORS = {
    "did": estimate_effect_did,
    "post_only": estimate_effect_post,
}


def matched_pre_gaps(dataset, matched):
    """Per pre-period mean of matched treated minus matched controls."""
    t = dataset.pre_period_len
    y = dataset.responses
    gaps = y[list(matched.treated_rows), :t].mean(axis=0) - y[list(matched.control_rows), :t].mean(axis=0)
    return tuple(float(v) for v in gaps)
