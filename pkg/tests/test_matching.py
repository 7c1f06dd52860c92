import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bootmatch.errors import EmptyGroup, EmptyMatch, NoControls, NoTreated
from bootmatch.matching import (
    balance_test,
    daily_group_means,
    default_caliper,
    nearest_neighbor_match,
    nearest_neighbor_match_logits,
)

from conftest import make_dataset


def expit(x):
    return 1 / (1 + np.exp(-np.asarray(x, dtype=float)))


def brute_force_match(logits, groups, caliper=None):
    """Literal O(n^2) replay of the greedy rule."""
    lg = list(map(float, logits))
    treated = sorted((i for i, g in enumerate(groups) if g == 1), key=lambda i: (-lg[i], i))
    unused = [i for i, g in enumerate(groups) if g == 0]
    pairs, unmatched = [], 0
    for t in treated:
        if not unused:
            unmatched += 1
            continue
        c = min(unused, key=lambda j: (abs(lg[t] - lg[j]), j))
        if caliper is not None and abs(lg[t] - lg[c]) > caliper:
            unmatched += 1
            continue
        unused.remove(c)
        pairs.append((t, c))
    return pairs, unmatched


def test_single_nearest():
    m = nearest_neighbor_match_logits([0.5, 0.4, 0.61], [1, 0, 0])
    assert m.pairs == [(0, 1)]
    m2 = nearest_neighbor_match(expit([0.5, 0.4, 0.61]), [1, 0, 0])
    assert m2.pairs == [(0, 1)]


def test_greedy_order_trace():
    # rows: t0=2.0, t1=0.0, c0=1.9, c1=0.1, c2=-5
    m = nearest_neighbor_match_logits([2.0, 0.0, 1.9, 0.1, -5.0], [1, 1, 0, 0, 0])
    assert m.pairs == [(0, 2), (1, 3)]
    assert m.unmatched_treated == 0


def test_tie_break_lower_control_row():
    # equidistant on both sides (exact binary fractions)
    # lower row on the right side
    m = nearest_neighbor_match_logits([1.0, 1.25, 0.75], [1, 0, 0])
    assert m.pairs == [(0, 1)]
    # lower row on the left side
    m = nearest_neighbor_match_logits([1.0, 0.75, 1.25], [1, 0, 0])
    assert m.pairs == [(0, 1)]
    # identical control logits: lowest row wins
    m = nearest_neighbor_match_logits([0.0, 3.0, 3.0, 3.0], [0, 0, 1, 0])
    assert m.pairs == [(2, 1)]


def test_errors():
    with pytest.raises(NoTreated):
        nearest_neighbor_match_logits([0.1, 0.2], [0, 0])
    with pytest.raises(NoControls):
        nearest_neighbor_match_logits([0.1, 0.2], [1, 1])
    with pytest.raises(EmptyMatch):
        nearest_neighbor_match_logits([0.0, 5.0], [1, 0], caliper_logit=0.1)


def test_caliper_marks_unmatched():
    m = nearest_neighbor_match_logits([0.0, 3.0, 0.05, 10.0], [1, 1, 0, 0], caliper_logit=0.5)
    assert m.pairs == [(0, 2)]
    assert m.unmatched_treated == 1
    assert m.max_pair_distance == pytest.approx(0.05)


@st.composite
def matching_problem(draw):
    n = draw(st.integers(2, 40))
    groups = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if 0 not in groups:
        groups[0] = 0
    if 1 not in groups:
        groups[-1] = 1
    # coarse grid makes ties common
    logits = draw(st.lists(st.integers(-20, 20).map(lambda v: v / 4), min_size=n, max_size=n))
    return logits, groups


@settings(max_examples=300)
@given(matching_problem(), st.one_of(st.none(), st.sampled_from([0.1, 0.5, 2.0])))
def test_matches_brute_force(problem, caliper):
    logits, groups = problem
    expected, unmatched = brute_force_match(logits, groups, caliper)
    if not expected:
        with pytest.raises(EmptyMatch):
            nearest_neighbor_match_logits(logits, groups, caliper)
        return
    m = nearest_neighbor_match_logits(logits, groups, caliper)
    assert m.pairs == expected
    assert m.unmatched_treated == unmatched


@settings(max_examples=200)
@given(matching_problem())
def test_sample_invariants(problem):
    logits, groups = problem
    m = nearest_neighbor_match_logits(logits, groups, caliper_logit=None)
    assert len(set(m.treated_rows)) == m.n_pairs == len(set(m.control_rows))
    assert all(groups[t] == 1 for t in m.treated_rows)
    assert all(groups[c] == 0 for c in m.control_rows)
    if groups.count(0) >= groups.count(1):
        assert m.unmatched_treated == 0


@settings(max_examples=200)
@given(matching_problem(), st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_caliper_monotone(problem, c1, c2):
    logits, groups = problem
    lo, hi = sorted((c1, c2))

    def n_pairs(c):
        try:
            return nearest_neighbor_match_logits(logits, groups, c).n_pairs
        except EmptyMatch:
            return 0

    assert n_pairs(lo) <= n_pairs(hi)


@settings(max_examples=200)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=30, unique=True), st.data())
def test_distinct_logits_permutation_invariant(logits, data):
    n = len(logits)
    groups = [1] + [0] + [data.draw(st.integers(0, 1)) for _ in range(n - 2)]
    m = nearest_neighbor_match_logits(logits, groups)
    perm = data.draw(st.permutations(list(range(n))))
    inv = {new: old for new, old in enumerate(perm)}
    m2 = nearest_neighbor_match_logits([logits[i] for i in perm], [groups[i] for i in perm])
    assert sorted(m.pairs) == sorted((inv[t], inv[c]) for t, c in m2.pairs)


@settings(max_examples=200)
@given(matching_problem())
def test_removing_unused_control(problem):
    logits, groups = problem
    m = nearest_neighbor_match_logits(logits, groups)
    unused = [i for i, g in enumerate(groups) if g == 0 and i not in m.control_rows]
    if not unused:
        return
    drop = unused[0]
    keep = [i for i in range(len(groups)) if i != drop]
    m2 = nearest_neighbor_match_logits([logits[i] for i in keep], [groups[i] for i in keep])
    assert [(keep[t], keep[c]) for t, c in m2.pairs] == m.pairs


def test_default_caliper():
    lg = np.array([0.0, 1.0, 2.0, 3.0])
    assert default_caliper(lg) == pytest.approx(0.2 * np.std(lg, ddof=1))
    assert math.isinf(default_caliper([1.0, 1.0]))


def test_balance_identical_pre_rows():
    y = np.array([[1, 2, 9], [1, 2, 0], [3, 1, 5], [3, 1, 7]], dtype=float)
    d = make_dataset(y, [1, 0, 1, 0], 2)
    m = nearest_neighbor_match_logits([0.0, 0.0, 1.0, 1.0], [1, 0, 1, 0])
    r = balance_test(d, m)
    assert r.p_value == 1.0 and r.statistic == 0.0


def test_daily_group_means():
    y = np.array([[1, 2, 3], [4, 5, 6]], dtype=float)
    d = make_dataset(y, [1, 0], 1)
    t, c = daily_group_means(d, [0], [1])
    assert np.array_equal(t, y[0]) and np.array_equal(c, y[1])
    t, c = daily_group_means(d, [0, 1], [0, 1])
    assert np.array_equal(t, c)
    with pytest.raises(EmptyGroup):
        daily_group_means(d, [], [1])
