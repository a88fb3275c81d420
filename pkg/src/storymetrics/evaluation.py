"""Statistical evaluation: tie-aware rank correlations with Fisher-Z
confidence intervals, prominence-based turning-point selection, and
salience ranking metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .model import DegenerateStatisticsError, GoldLabels, MetricSeries, ValidationError


def _check_rank_inputs(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("rank correlation needs two equal-length 1-d sequences")
    if x.shape[0] < 2:
        raise DegenerateStatisticsError("rank correlation needs length >= 2")
    if float(x.std()) == 0.0 or float(y.std()) == 0.0:
        raise DegenerateStatisticsError("rank correlation undefined for an all-tied sequence")
    return x, y


def kendall_tau(x, y) -> float:
    """Kendall's tau-b (tie-corrected)."""
    x, y = _check_rank_inputs(x, y)
    tau, _ = stats.kendalltau(x, y, variant="b")
    return float(tau)


def spearman_rho(x, y) -> float:
    """Spearman's rho on average ranks (tie-aware)."""
    x, y = _check_rank_inputs(x, y)
    rho, _ = stats.spearmanr(x, y)
    return float(rho)


def fisher_ci(r: float, n: int, conf: float = 0.95) -> tuple[float, float]:
    """Confidence interval for a correlation via the Fisher Z-transform."""
    if n <= 3:
        raise ValidationError("Fisher interval needs n > 3")
    if not (-1.0 < r < 1.0):
        raise ValidationError("Fisher interval undefined at |r| = 1")
    if not (0.0 < conf < 1.0):
        raise ValidationError("confidence must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + conf / 2.0)
    center = math.atanh(r)
    half = z / math.sqrt(n - 3)
    return math.tanh(center - half), math.tanh(center + half)


@dataclass(frozen=True)
class Peak:
    index: int
    height: float
    prominence: float


def find_peaks(series) -> list[Peak]:
    """Strict local maxima with contour-line prominence.

    A flat run strictly higher than both shoulders yields one peak at the
    run's left edge. Prominence is height minus the higher of the two side
    minima, each taken between the peak and the nearest strictly higher
    value (or the boundary).
    """
    values = series.values if isinstance(series, MetricSeries) else np.asarray(series, float)
    n = values.shape[0]
    peaks: list[Peak] = []
    i = 1
    while i < n:
        if values[i] > values[i - 1]:
            j = i
            while j + 1 < n and values[j + 1] == values[i]:
                j += 1
            if j + 1 < n and values[j + 1] < values[i]:
                peaks.append(Peak(index=i, height=float(values[i]),
                                  prominence=_prominence(values, i)))
            i = j + 1
        else:
            i += 1
    return peaks


def _prominence(values: np.ndarray, peak: int) -> float:
    h = values[peak]
    left_min = h
    q = peak - 1
    while q >= 0 and values[q] <= h:
        left_min = min(left_min, values[q])
        q -= 1
    right_min = h
    q = peak + 1
    n = values.shape[0]
    while q < n and values[q] <= h:
        right_min = min(right_min, values[q])
        q += 1
    return float(h - max(left_min, right_min))


@dataclass(frozen=True)
class TPAssignment:
    index: int
    fallback: bool  # no peak fell inside the window; midpoint used


def assign_turning_points(peaks: Sequence[Peak],
                          windows: Sequence[tuple[int, int]]) -> list[TPAssignment]:
    """Per window, the contained peak of maximal prominence (ties to the
    earlier index); an empty window falls back to its midpoint."""
    assignments = []
    for lo, hi in windows:
        if lo > hi:
            raise ValidationError(f"window ({lo}, {hi}) has lo > hi")
        contained = [p for p in peaks if lo <= p.index <= hi]
        if contained:
            best = max(contained, key=lambda p: (p.prominence, -p.index))
            assignments.append(TPAssignment(index=best.index, fallback=False))
        else:
            assignments.append(TPAssignment(index=(lo + hi) // 2, fallback=True))
    return assignments


def tp_distance(pred: Sequence[int], gold: Sequence[int], n: int) -> float:
    """Mean |predicted - gold| normalized by story length, in percentage
    points."""
    if len(pred) != 5 or len(gold) != 5:
        raise ValidationError("turning-point evaluation needs exactly 5 positions each")
    if n <= 0:
        raise ValidationError("story length must be positive")
    for p in list(pred) + list(gold):
        if not (0 <= p < n):
            raise ValidationError(f"turning-point index {p} out of bounds for length {n}")
    return 100.0 * float(np.mean([abs(p - g) for p, g in zip(pred, gold)])) / n


def _descending_ranking(scores: np.ndarray) -> list[int]:
    # ties rank the earlier sentence first
    return sorted(range(scores.shape[0]), key=lambda i: (-scores[i], i))


def average_precision(scores, gold: GoldLabels,
                      truncate_at: Optional[int] = None) -> float:
    """AP of the descending-score ranking against the salient set.

    By default the full ranking is scored; truncate_at=K restricts to the
    top K and divides by min(|gold|, K).
    """
    if gold.kind != "salience":
        raise ValidationError("average precision needs salience gold labels")
    relevant = gold.salient_indices
    if not relevant:
        raise ValidationError("gold salient set is empty")
    values = scores.values if isinstance(scores, MetricSeries) else np.asarray(scores, float)
    ranking = _descending_ranking(values)
    if truncate_at is not None:
        if truncate_at < 1:
            raise ValidationError("truncation depth must be >= 1")
        ranking = ranking[:truncate_at]
    hits = 0
    precision_sum = 0.0
    for k, idx in enumerate(ranking, start=1):
        if idx in relevant:
            hits += 1
            precision_sum += hits / k
    denom = len(relevant) if truncate_at is None else min(len(relevant), truncate_at)
    return precision_sum / denom


def recall_at_k(scores, gold: GoldLabels, k: Optional[int] = None) -> float:
    """Fraction of gold salient sentences inside the top k; k defaults to
    the gold set size."""
    if gold.kind != "salience":
        raise ValidationError("recall@k needs salience gold labels")
    relevant = gold.salient_indices
    if not relevant:
        raise ValidationError("gold salient set is empty")
    if k is None:
        k = len(relevant)
    if k < 1:
        raise ValidationError("k must be >= 1")
    values = scores.values if isinstance(scores, MetricSeries) else np.asarray(scores, float)
    top = set(_descending_ranking(values)[:k])
    return len(top & relevant) / len(relevant)


def _lcs_length(a: Sequence, b: Sequence) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            curr[j] = prev[j - 1] + 1 if x == y else max(prev[j], curr[j - 1])
        prev = curr
    return prev[-1]


def rouge_l(pred_tokens: Sequence, gold_tokens: Sequence) -> float:
    """LCS-based F1 between two token sequences."""
    if len(pred_tokens) == 0 or len(gold_tokens) == 0:
        raise ValidationError("ROUGE-L needs non-empty token sequences")
    lcs = _lcs_length(pred_tokens, gold_tokens)
    if lcs == 0:
        return 0.0
    p = lcs / len(pred_tokens)
    r = lcs / len(gold_tokens)
    return 2.0 * p * r / (p + r)
