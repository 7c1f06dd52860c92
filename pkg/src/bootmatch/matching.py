"""Greedy 1:1 nearest-neighbour matching on the propensity logit scale."""

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .data_model import pre_period_means
from .errors import DimensionMismatch, EmptyGroup, EmptyMatch, NoControls, NoTreated
from .stats_core import welch_t_test

DEFAULT_CALIPER_SCALE = 0.2


@dataclass(frozen=True)
class MatchedSample:
    """Treated/control row pairs, in the order they were formed.

    ``treated_rows[j]`` is matched to ``control_rows[j]``.
    """

    treated_rows: tuple
    control_rows: tuple
    unmatched_treated: int
    caliper_logit: float = None
    max_pair_distance: float = 0.0

    @property
    def pairs(self):
        return list(zip(self.treated_rows, self.control_rows))

    @property
    def n_pairs(self):
        return len(self.treated_rows)


def logit(scores):
    p = np.asarray(scores, dtype=float)
    return np.log(p) - np.log1p(-p)


def default_caliper(logits, scale=DEFAULT_CALIPER_SCALE):
    """``scale`` times the sample standard deviation of the logits."""
    lg = np.asarray(logits, dtype=float)
    if lg.size < 2:
        return math.inf
    sd = float(lg.std(ddof=1))
    return scale * sd if sd > 0 else math.inf


class _Unused:
    """Nearest-unused-slot lookups over sorted positions with path halving."""

    def __init__(self, n):
        self.nxt = list(range(n + 1))  # n is a sentinel
        self.prv = list(range(-1, n))  # shifted by one: prv[i + 1]; -1 sentinel
        self.n = n

    def next_at_or_after(self, i):
        nxt = self.nxt
        while nxt[i] != i:
            nxt[i] = nxt[nxt[i]]
            i = nxt[i]
        return i if i < self.n else None

    def prev_at_or_before(self, i):
        prv = self.prv
        j = i + 1
        while prv[j] != j - 1:
            prv[j] = prv[prv[j] + 1]
            j = prv[j] + 1
        return j - 1 if j - 1 >= 0 else None

    def take(self, i):
        self.nxt[i] = i + 1
        self.prv[i + 1] = i - 1


def nearest_neighbor_match_logits(logits, groups, caliper_logit=None):
    """Greedy matching given logits directly; see :func:`nearest_neighbor_match`."""
    lg = np.asarray(logits, dtype=float)
    g = np.asarray(groups)
    if lg.shape != g.shape:
        raise DimensionMismatch(f"{lg.size} scores but {g.size} group labels")
    treated = np.flatnonzero(g == 1)
    controls = np.flatnonzero(g == 0)
    if treated.size == 0:
        raise NoTreated("no treated subjects to match")
    if controls.size == 0:
        raise NoControls("no control subjects to match against")

    # treated: descending logit, ties by ascending row
    t_order = treated[np.lexsort((treated, -lg[treated]))]
    # controls: ascending (logit, row)
    c_order = controls[np.lexsort((controls, lg[controls]))]
    c_vals = lg[c_order].tolist()
    c_rows = c_order.tolist()
    pool = _Unused(len(c_rows))
    cal = math.inf if caliper_logit is None else float(caliper_logit)

    out_t, out_c = [], []
    unmatched = 0
    max_dist = 0.0
    remaining = len(c_rows)
    for row in t_order.tolist():
        if remaining == 0:
            unmatched += 1
            continue
        x = float(lg[row])
        pos = bisect.bisect_left(c_vals, x)
        best = None
        best_d = math.inf
        right = pool.next_at_or_after(pos)
        if right is not None:
            best, best_d = right, abs(c_vals[right] - x)
        left = pool.prev_at_or_before(pos - 1) if pos > 0 else None
        if left is not None:
            # lowest row among unused controls sharing the left candidate's logit
            left = pool.next_at_or_after(bisect.bisect_left(c_vals, c_vals[left]))
            d = abs(x - c_vals[left])
            if d < best_d or (d == best_d and c_rows[left] < c_rows[best]):
                best, best_d = left, d
        if best_d > cal:
            unmatched += 1
            continue
        pool.take(best)
        remaining -= 1
        out_t.append(row)
        out_c.append(c_rows[best])
        if best_d > max_dist:
            max_dist = best_d
    if not out_t:
        raise EmptyMatch("no treated subject found a control within the caliper")
    return MatchedSample(
        treated_rows=tuple(out_t),
        control_rows=tuple(out_c),
        unmatched_treated=unmatched,
        caliper_logit=None if caliper_logit is None else float(caliper_logit),
        max_pair_distance=max_dist,
    )


def nearest_neighbor_match(scores, groups, caliper_logit=None):
    """Match each treated subject to its nearest unused control.

    Scores are mapped to logits. Treated subjects are processed by
    descending logit (ties: lower row first); each takes the unused
    control with the smallest absolute logit difference (ties: lower
    control row). With a caliper, a treated subject whose nearest unused
    control is farther than ``caliper_logit`` stays unmatched.

    Raises
    ------
    NoTreated, NoControls
        If either group is empty.
    EmptyMatch
        If no pair could be formed.
    """
    return nearest_neighbor_match_logits(logit(scores), groups, caliper_logit)


def balance_test(dataset, matched):
    """Welch test of pre-period means, matched treated vs matched controls."""
    if matched.n_pairs == 0:
        raise EmptyMatch("balance test needs a nonempty matched sample")
    return welch_t_test(
        pre_period_means(dataset, matched.treated_rows),
        pre_period_means(dataset, matched.control_rows),
    )


def daily_group_means(dataset, rows_t, rows_c):
    """Per-period mean response of two row sets (each of length T)."""
    rows_t = np.asarray(rows_t, dtype=np.intp)
    rows_c = np.asarray(rows_c, dtype=np.intp)
    if rows_t.size == 0 or rows_c.size == 0:
        raise EmptyGroup("both row sets must be nonempty")
    y = dataset.responses
    return y[rows_t].mean(axis=0), y[rows_c].mean(axis=0)
