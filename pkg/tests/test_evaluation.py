"""Rank correlations, peak/turning-point evaluation, and ranking metrics."""

import itertools
import math

import numpy as np
import pytest

from storymetrics.evaluation import (Peak, assign_turning_points,
                                     average_precision, fisher_ci,
                                     find_peaks, kendall_tau, recall_at_k,
                                     rouge_l, spearman_rho, tp_distance)
from storymetrics.model import (DegenerateStatisticsError, GoldLabels,
                                MetricSeries, ValidationError)


# --- brute-force oracles ----------------------------------------------------------

def oracle_tau_b(x, y):
    """Tau-b from explicit pair enumeration."""
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i, j in itertools.combinations(range(n), 2):
        dx = x[i] - x[j]
        dy = y[i] - y[j]
        if dx == 0 and dy == 0:
            ties_x += 1
            ties_y += 1
        elif dx == 0:
            ties_x += 1
        elif dy == 0:
            ties_y += 1
        elif dx * dy > 0:
            concordant += 1
        else:
            discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    return (concordant - discordant) / denom


def average_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def oracle_rho(x, y):
    """Pearson correlation of average ranks."""
    rx = np.asarray(average_ranks(list(x)))
    ry = np.asarray(average_ranks(list(y)))
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))


# --- rank correlations --------------------------------------------------------------

def test_kendall_tau_examples():
    assert kendall_tau([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert kendall_tau([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3)


def test_spearman_rho_examples():
    assert spearman_rho([1, 2, 3], [5, 6, 7]) == pytest.approx(1.0)
    assert spearman_rho([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5)
    assert spearman_rho([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def test_rank_correlations_match_oracles_with_ties():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(2, 13))
        x = rng.integers(0, 5, size=n).astype(float)
        y = rng.integers(0, 5, size=n).astype(float)
        if x.std() == 0 or y.std() == 0:
            continue
        assert kendall_tau(x, y) == pytest.approx(oracle_tau_b(x, y), abs=1e-12)
        assert spearman_rho(x, y) == pytest.approx(oracle_rho(x, y), abs=1e-12)


def test_rank_correlations_monotone_transform_invariance():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(3, 10))
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        fx = np.exp(x)  # strictly increasing
        assert kendall_tau(fx, y) == pytest.approx(kendall_tau(x, y), abs=1e-12)
        assert spearman_rho(fx, y) == pytest.approx(spearman_rho(x, y), abs=1e-12)


def test_rank_correlation_degenerate_inputs():
    with pytest.raises(DegenerateStatisticsError):
        kendall_tau([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateStatisticsError):
        spearman_rho([1, 2], [5, 5])
    with pytest.raises(DegenerateStatisticsError):
        kendall_tau([1.0], [2.0])


# --- fisher interval -----------------------------------------------------------------

def test_fisher_ci_symmetric_at_zero():
    lo, hi = fisher_ci(0.0, 30)
    assert lo == pytest.approx(-hi, abs=1e-12)


def test_fisher_ci_worked_example():
    lo, hi = fisher_ci(0.5, 50, 0.95)
    assert lo == pytest.approx(0.258, abs=1e-3)
    assert hi == pytest.approx(0.683, abs=1e-3)


def test_fisher_ci_widens_with_smaller_n():
    lo_big, hi_big = fisher_ci(0.5, 50)
    lo_small, hi_small = fisher_ci(0.5, 10)
    assert lo_small < lo_big and hi_small > hi_big


def test_fisher_ci_input_validation():
    with pytest.raises(ValidationError):
        fisher_ci(0.5, 3)
    with pytest.raises(ValidationError):
        fisher_ci(1.0, 50)
    with pytest.raises(ValidationError):
        fisher_ci(0.5, 50, conf=1.0)


# --- peaks ------------------------------------------------------------------------

def test_find_peaks_monotone_none():
    assert find_peaks([1.0, 2.0, 3.0, 4.0]) == []
    assert find_peaks([4.0, 3.0, 2.0, 1.0]) == []


def test_find_peaks_worked_example():
    peaks = find_peaks([0.0, 2.0, 1.0, 3.0, 0.0])
    assert [(p.index, p.prominence) for p in peaks] == [(1, 1.0), (3, 3.0)]


def test_find_peaks_single():
    peaks = find_peaks([0.0, 5.0, 0.0])
    assert len(peaks) == 1
    assert peaks[0].index == 1 and peaks[0].prominence == 5.0


def test_find_peaks_plateau_left_edge():
    peaks = find_peaks([0.0, 3.0, 3.0, 3.0, 1.0, 0.0])
    assert [p.index for p in peaks] == [1]


def test_find_peaks_plateau_not_peak_when_rising_after():
    assert find_peaks([0.0, 2.0, 2.0, 4.0, 0.0]) == [
        Peak(index=3, height=4.0, prominence=4.0)]


def test_find_peaks_accepts_metric_series():
    peaks = find_peaks(MetricSeries("x", np.array([0.0, 1.0, 0.0])))
    assert peaks[0].index == 1


# --- turning points ------------------------------------------------------------------

def test_assign_turning_points_prefers_prominence():
    peaks = [Peak(index=2, height=3.0, prominence=2.0),
             Peak(index=4, height=4.0, prominence=5.0)]
    assigned = assign_turning_points(peaks, [(1, 5)])
    assert assigned[0].index == 4 and not assigned[0].fallback


def test_assign_turning_points_tie_earlier_index():
    peaks = [Peak(index=2, height=3.0, prominence=5.0),
             Peak(index=4, height=4.0, prominence=5.0)]
    assigned = assign_turning_points(peaks, [(1, 5)])
    assert assigned[0].index == 2


def test_assign_turning_points_empty_window_midpoint():
    assigned = assign_turning_points([], [(4, 8)])
    assert assigned[0].index == 6 and assigned[0].fallback


def test_tp_distance_values():
    assert tp_distance([1, 2, 3, 4, 5], [1, 2, 3, 4, 5], 40) == 0.0
    gold = [5, 10, 20, 25, 30]
    pred = [p + 3 for p in gold]
    assert tp_distance(pred, gold, 40) == pytest.approx(7.5)


def test_tp_distance_translation_invariance():
    gold = [5, 10, 20, 25, 30]
    pred = [4, 12, 19, 27, 28]
    base = tp_distance(pred, gold, 40)
    shifted = tp_distance([p + 3 for p in pred], [g + 3 for g in gold], 40)
    assert shifted == pytest.approx(base, abs=1e-12)


def test_tp_distance_validation():
    with pytest.raises(ValidationError):
        tp_distance([1, 2, 3], [1, 2, 3], 10)
    with pytest.raises(ValidationError):
        tp_distance([1, 2, 3, 4, 50], [1, 2, 3, 4, 5], 10)


# --- ranking metrics -------------------------------------------------------------------

def _gold(indices):
    return GoldLabels(kind="salience", salient_indices=frozenset(indices))


def test_average_precision_examples():
    # all gold ranked first
    assert average_precision(np.array([9.0, 8.0, 1.0, 0.0]), _gold({0, 1})) == 1.0
    # gold={1,3}, descending ranking order [1,2,3,...]: AP = (1 + 2/3)/2
    scores = np.array([0.0, 3.0, 2.0, 1.0])
    assert average_precision(scores, _gold({1, 3})) == pytest.approx(5 / 6)


def test_average_precision_tie_earlier_index_first():
    scores = np.array([1.0, 1.0, 0.0])
    # index 0 outranks index 1 on a tie
    assert average_precision(scores, _gold({0})) == 1.0
    assert average_precision(scores, _gold({1})) == pytest.approx(0.5)


def test_average_precision_truncation():
    scores = np.array([4.0, 3.0, 2.0, 1.0])
    assert average_precision(scores, _gold({0, 3}), truncate_at=2) == pytest.approx(1 / 2)


def test_average_precision_empty_gold():
    with pytest.raises(ValidationError):
        average_precision(np.array([1.0, 0.0]), _gold(set()))


def test_recall_at_k_examples():
    scores = np.array([0.0, 5.0, 1.0, 4.0])
    # top-2 = {1, 3}
    assert recall_at_k(scores, _gold({1, 3})) == 1.0
    assert recall_at_k(scores, _gold({1, 2})) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        recall_at_k(scores, _gold({1}), k=0)


def test_map_recall_invariant_under_increasing_transforms():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(3, 12))
        scores = rng.normal(size=n)
        gold = _gold(set(rng.choice(n, size=int(rng.integers(1, n)), replace=False).tolist()))
        transformed = 3.0 * scores + 1.0
        assert average_precision(transformed, gold) == pytest.approx(
            average_precision(scores, gold), abs=1e-12)
        assert recall_at_k(transformed, gold) == pytest.approx(
            recall_at_k(scores, gold), abs=1e-12)


def test_rouge_l_examples():
    assert rouge_l(["a", "b", "c"], ["a", "b", "c"]) == 1.0
    assert rouge_l(["a", "b", "c"], ["a", "c"]) == pytest.approx(0.8)
    assert rouge_l(["a", "b"], ["x", "y"]) == 0.0
    with pytest.raises(ValidationError):
        rouge_l([], ["a"])


def _lcs_recursive(a, b, memo=None):
    if memo is None:
        memo = {}
    key = (len(a), len(b))
    if key in memo:
        return memo[key]
    if not a or not b:
        result = 0
    elif a[-1] == b[-1]:
        result = 1 + _lcs_recursive(a[:-1], b[:-1], memo)
    else:
        result = max(_lcs_recursive(a[:-1], b, memo), _lcs_recursive(a, b[:-1], memo))
    memo[key] = result
    return result


def test_rouge_l_matches_recursive_lcs_reference():
    rng = np.random.default_rng(19)
    alphabet = list("abc")
    for _ in range(100):
        a = [alphabet[i] for i in rng.integers(0, 3, size=int(rng.integers(1, 8)))]
        b = [alphabet[i] for i in rng.integers(0, 3, size=int(rng.integers(1, 8)))]
        lcs = _lcs_recursive(tuple(a), tuple(b))
        if lcs == 0:
            assert rouge_l(a, b) == 0.0
        else:
            p = lcs / len(a)
            r = lcs / len(b)
            assert rouge_l(a, b) == pytest.approx(2 * p * r / (p + r), abs=1e-12)
