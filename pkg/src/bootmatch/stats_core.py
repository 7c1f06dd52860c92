"""Statistical primitives: normal and Student t distribution functions,
Welch and paired t-tests, and a Gaussian kernel density estimator.

Everything here is a pure function of its inputs.
"""

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import DegenerateSample, InsufficientData

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_STD_NORMAL = NormalDist()

BETACF_TOL = 1e-12
BETACF_MAX_ITER = 300


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-sided test.

    Attributes
    ----------
    statistic : float
        t (or z) statistic; its sign carries the direction of the effect.
    df : float
        Degrees of freedom, ``math.inf`` for a normal reference.
    p_value : float
        Two-sided p-value in [0, 1].
    """

    __test__ = False  # keep pytest from collecting this as a test class

    statistic: float
    df: float
    p_value: float


def normal_cdf(x):
    """Standard normal CDF, accurate in both tails."""
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x):
    """Standard normal density; accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT2PI
    return float(out) if out.ndim == 0 else out


def normal_quantile(p):
    """Inverse of :func:`normal_cdf` on the open interval (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    return _STD_NORMAL.inv_cdf(p)


def _betacf(a, b, x):
    # Modified Lentz evaluation of the incomplete-beta continued fraction.
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETACF_TOL:
            return h
    return h


def regularized_incomplete_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(x, df):
    """CDF of Student's t with ``df`` degrees of freedom.

    Uses the tail identity P(|T| > |x|) = I_{df/(df+x^2)}(df/2, 1/2),
    switching to the complementary argument when x^2 is small relative
    to df so the continued fraction stays in its fast region.
    """
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df!r}")
    if math.isinf(df):
        return normal_cdf(x)
    if x == 0.0:
        return 0.5
    x2 = x * x
    if x2 < df:
        # I_{x^2/(df+x^2)}(1/2, df/2) = P(|T| < |x|)
        inner = regularized_incomplete_beta(0.5, 0.5 * df, x2 / (df + x2))
        tail = 0.5 * (1.0 - inner)
    else:
        tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + x2))
    return 1.0 - tail if x > 0 else tail


def _two_sided_p(statistic, df):
    if math.isinf(df):
        p = math.erfc(abs(statistic) / _SQRT2)
    else:
        p = 2.0 * student_t_cdf(-abs(statistic), df)
    return min(1.0, max(0.0, p))


def welch_t_test(a, b):
    """Two-sample t-test with unequal variances.

    Welch-Satterthwaite degrees of freedom; the statistic is
    ``(mean(a) - mean(b)) / se``.

    Raises
    ------
    DegenerateSample
        If either sample has fewer than two values, or both variances
        are exactly zero while the means differ.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DegenerateSample(f"Welch test needs >= 2 values per sample, got {na} and {nb}")
    diff = float(a.mean() - b.mean())
    va = float(a.var(ddof=1)) / na
    vb = float(b.var(ddof=1)) / nb
    se2 = va + vb
    if se2 == 0.0:
        if diff == 0.0:
            return TestResult(0.0, float(na + nb - 2), 1.0)
        raise DegenerateSample("both samples have zero variance and different means", p_value=0.0)
    statistic = diff / math.sqrt(se2)
    # normalised form avoids underflow of the squared variance terms
    ra, rb = va / se2, vb / se2
    df = 1.0 / (ra * ra / (na - 1) + rb * rb / (nb - 1))
    return TestResult(statistic, df, _two_sided_p(statistic, df))


def paired_t_test(diffs):
    """One-sample t-test of paired differences against zero.

    A zero-variance sample with zero mean carries no evidence and returns
    statistic 0, p 1; zero variance with a nonzero mean raises.
    """
    d = np.asarray(diffs, dtype=float)
    n = d.size
    if n < 2:
        raise DegenerateSample(f"paired t-test needs >= 2 differences, got {n}")
    mean = float(d.mean())
    var = float(d.var(ddof=1))
    if var == 0.0:
        if mean == 0.0:
            return TestResult(0.0, float(n - 1), 1.0)
        raise DegenerateSample("paired differences have zero variance", p_value=0.0)
    statistic = mean / math.sqrt(var / n)
    df = float(n - 1)
    return TestResult(statistic, df, _two_sided_p(statistic, df))


def silverman_bandwidth(points):
    """1.06 * sd * n^(-1/5); falls back to sd = 1 for constant input."""
    x = np.asarray(points, dtype=float)
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    if sd == 0.0:
        sd = 1.0
    return 1.06 * sd * x.size ** (-0.2)


def gaussian_kde(points, eval_at, bandwidth=None, chunk=4096):
    """Gaussian kernel density estimate of ``points`` evaluated at ``eval_at``.

    ``bandwidth=None`` selects Silverman's rule of thumb.
    """
    x = np.asarray(points, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientData(f"kernel density needs >= 2 points, got {x.size}")
    # sorting first makes every reduction independent of input order
    x = np.sort(x)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth!r}")
    grid = np.atleast_1d(np.asarray(eval_at, dtype=float))
    out = np.empty(grid.shape, dtype=float)
    flat_grid = grid.ravel()
    flat_out = out.reshape(-1)
    norm = 1.0 / (x.size * h * _SQRT2PI)
    for start in range(0, flat_grid.size, chunk):
        g = flat_grid[start:start + chunk]
        u = (g[:, None] - x[None, :]) / h
        flat_out[start:start + chunk] = np.exp(-0.5 * u * u).sum(axis=1) * norm
    return out
