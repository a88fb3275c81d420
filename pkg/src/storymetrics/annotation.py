"""Relative suspense judgments: absolute curves, normalization, and
inter-annotator agreement."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import (AnnotationSet, DegenerateStatisticsError, Judgment,
                    MetricSeries, ValidationError)
from . import evaluation


@dataclass(frozen=True)
class JudgmentMapping:
    """Relative judgment -> signed increment. Same is pinned at 0 and
    adjacent magnitudes must stay at least 0.05 apart."""

    big_decrease: float = -0.2
    decrease: float = -0.1
    same: float = 0.0
    increase: float = 0.1
    big_increase: float = 0.2

    MIN_SEPARATION = 0.05

    def __post_init__(self):
        if self.same != 0.0:
            raise ValidationError("Same must map to 0")
        sep = self.MIN_SEPARATION
        if not (self.decrease <= -sep and self.big_decrease <= self.decrease - sep):
            raise ValidationError("decrease magnitudes must be negative and separated by >= 0.05")
        if not (self.increase >= sep and self.big_increase >= self.increase + sep):
            raise ValidationError("increase magnitudes must be positive and separated by >= 0.05")

    def value(self, judgment: Judgment) -> float:
        return {
            Judgment.BIG_DECREASE: self.big_decrease,
            Judgment.DECREASE: self.decrease,
            Judgment.SAME: self.same,
            Judgment.INCREASE: self.increase,
            Judgment.BIG_INCREASE: self.big_increase,
        }[judgment]


def absolute_curve(judgments: Sequence[Judgment],
                   mapping: JudgmentMapping = JudgmentMapping()) -> MetricSeries:
    """Cumulative sum of mapped relative judgments."""
    if len(judgments) == 0:
        raise ValidationError("judgment sequence is empty")
    increments = np.array([mapping.value(j) for j in judgments])
    return MetricSeries(name="annotated", values=np.cumsum(increments))


def zscore(series: MetricSeries) -> MetricSeries:
    """Center and scale to unit population variance."""
    if len(series) < 2:
        raise DegenerateStatisticsError(f"series {series.name!r} too short to z-score")
    std = float(series.values.std())
    if std == 0.0:
        raise DegenerateStatisticsError(f"series {series.name!r} is constant")
    values = (series.values - series.values.mean()) / std
    return MetricSeries(name=series.name, values=values, normalized=True)


_ORDINAL_VALUE = {
    Judgment.BIG_DECREASE: 0,
    Judgment.DECREASE: 1,
    Judgment.SAME: 2,
    Judgment.INCREASE: 3,
    Judgment.BIG_INCREASE: 4,
}


def krippendorff_alpha_table(data: Sequence[Sequence[Optional[float]]],
                             level: str = "ordinal") -> float:
    """Krippendorff's alpha over a coders-by-units table; None marks a
    missing value. Units with fewer than two values are unpairable and
    excluded."""
    if level not in ("nominal", "ordinal", "interval"):
        raise ValidationError(f"unknown measurement level {level!r}")
    if not data:
        raise ValidationError("no annotation data")
    n_units = max(len(row) for row in data)
    unit_values = []
    for u in range(n_units):
        vals = [row[u] for row in data if u < len(row) and row[u] is not None]
        if len(vals) >= 2:
            unit_values.append(vals)
    if not unit_values:
        raise DegenerateStatisticsError("no unit has two or more pairable values")

    categories = sorted({v for vals in unit_values for v in vals})
    cat_index = {c: i for i, c in enumerate(categories)}
    m = len(categories)
    coincidence = np.zeros((m, m))
    for vals in unit_values:
        mu = len(vals)
        for a, b in itertools.permutations(range(mu), 2):
            coincidence[cat_index[vals[a]], cat_index[vals[b]]] += 1.0 / (mu - 1)
    n_c = coincidence.sum(axis=1)
    n_total = float(n_c.sum())

    if level == "nominal":
        delta = 1.0 - np.eye(m)
    elif level == "interval":
        cats = np.asarray(categories, float)
        delta = (cats[:, None] - cats[None, :]) ** 2
    else:  # ordinal: cumulative-marginal difference
        delta = np.zeros((m, m))
        for i in range(m):
            for j in range(i + 1, m):
                span = n_c[i:j + 1].sum() - (n_c[i] + n_c[j]) / 2.0
                delta[i, j] = delta[j, i] = span ** 2

    d_o = float((coincidence * delta).sum()) / n_total
    d_e = float((np.outer(n_c, n_c) * delta).sum()) / (n_total * (n_total - 1.0))
    if d_e == 0.0:
        raise DegenerateStatisticsError(
            "expected disagreement is zero (all values identical)")
    return 1.0 - d_o / d_e


def krippendorff_alpha(annotations: AnnotationSet, level: str = "ordinal") -> float:
    if len(annotations.annotators) < 2:
        raise ValidationError("agreement needs at least two annotators")
    table = [
        [float(_ORDINAL_VALUE[j]) for j in annotations.annotators[aid]]
        for aid in sorted(annotations.annotators)
    ]
    return krippendorff_alpha_table(table, level)


@dataclass(frozen=True)
class CorrelationResult:
    tau: float
    rho: float
    pairs: int
    skipped: int


def _rank_pair(pred: np.ndarray, curve: np.ndarray) -> Optional[tuple[float, float]]:
    """(tau, rho) for one prediction/annotator pair, or None if either
    side is constant."""
    if float(pred.std()) == 0.0 or float(curve.std()) == 0.0:
        return None
    tau = evaluation.kendall_tau(pred, curve)
    rho = evaluation.spearman_rho(pred, curve)
    return tau, rho


def pairwise_correlation(pred: MetricSeries, annotations: AnnotationSet,
                         mapping: JudgmentMapping = JudgmentMapping()) -> CorrelationResult:
    """Mean rank correlation between a prediction curve and each
    annotator's absolute curve. Degenerate pairs are skipped and counted."""
    if annotations.length != len(pred):
        raise ValidationError(
            f"prediction length {len(pred)} differs from annotation length {annotations.length}")
    pred_values = pred.values
    taus, rhos, skipped = [], [], 0
    for aid in sorted(annotations.annotators):
        curve = absolute_curve(annotations.annotators[aid], mapping).values
        result = _rank_pair(pred_values, curve)
        if result is None:
            skipped += 1
            continue
        taus.append(result[0])
        rhos.append(result[1])
    if not taus:
        raise DegenerateStatisticsError("every prediction/annotator pair was degenerate")
    return CorrelationResult(tau=float(np.mean(taus)), rho=float(np.mean(rhos)),
                             pairs=len(taus), skipped=skipped)


def human_upper_bound(annotations: AnnotationSet,
                      mapping: JudgmentMapping = JudgmentMapping()) -> CorrelationResult:
    """Mean pairwise rank correlation over unordered annotator pairs."""
    ids = sorted(annotations.annotators)
    if len(ids) < 2:
        raise ValidationError("upper bound needs at least two annotators")
    curves = {aid: absolute_curve(annotations.annotators[aid], mapping).values for aid in ids}
    taus, rhos, skipped = [], [], 0
    for a, b in itertools.combinations(ids, 2):
        result = _rank_pair(curves[a], curves[b])
        if result is None:
            skipped += 1
            continue
        taus.append(result[0])
        rhos.append(result[1])
    if not taus:
        raise DegenerateStatisticsError("every annotator pair was degenerate")
    return CorrelationResult(tau=float(np.mean(taus)), rho=float(np.mean(rhos)),
                             pairs=len(taus), skipped=skipped)
