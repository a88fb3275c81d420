"""Deletion-based salience and its variants.

The canonical measure is the coherence drop when a sentence is removed
from the conditioning context: positive salience means deleting the
sentence hurts prediction of the following window. Windows are produced
upstream; this module never re-tokenizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import MetricSeries, SentenceRecord, StoryTrace, ValidationError
from .suspense import cosine_similarity

MEASURES = ("like", "swap", "know_diff", "emb_surp", "emb_sal", "clus",
            "random", "ascending", "descending")

_VARIANT_FOR_MEASURE = {"like": "deleted", "swap": "swapped", "know_diff": "no_knowledge"}


@dataclass(frozen=True)
class SalienceConfig:
    window_tokens: int = 128
    measure: str = "like"
    imp_adjust: bool = False
    combine_like_clus: bool = False
    clus_per: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.window_tokens < 1:
            raise ValidationError("window_tokens must be >= 1")
        if self.clus_per < 1:
            raise ValidationError("clus_per must be >= 1")
        if self.measure not in MEASURES:
            raise ValidationError(f"unknown salience measure {self.measure!r}")


def coherence(token_loglikes) -> float:
    """Length-normalized log-likelihood of a window, nats per token."""
    vals = np.asarray(token_loglikes, float)
    if vals.size == 0:
        raise ValidationError("coherence of an empty window is undefined")
    return float(vals.mean())


def bcf_salience(c_base: float, c_variant: float) -> float:
    """Coherence with the sentence present minus with it manipulated.
    Negative values are allowed (irrelevant asides)."""
    if not (math.isfinite(c_base) and math.isfinite(c_variant)):
        raise ValidationError("coherences must be finite")
    return c_base - c_variant


def _variant_salience(rec: SentenceRecord, variant: str) -> float:
    win = rec.window_token_loglikes
    if win is None or "base" not in win or variant not in win:
        raise ValidationError(
            f"sentence {rec.index}: window log-likelihoods for 'base' and {variant!r} required")
    return bcf_salience(coherence(win["base"]), coherence(win[variant]))


def like_salience(rec: SentenceRecord) -> float:
    return _variant_salience(rec, "deleted")


def swap_salience(rec: SentenceRecord) -> float:
    return _variant_salience(rec, "swapped")


def knowledge_salience(rec: SentenceRecord) -> float:
    return _variant_salience(rec, "no_knowledge")


def emb_surprise(e_t, e_prev) -> float:
    """Cosine distance between consecutive sentence embeddings."""
    return max(0.0, 1.0 - cosine_similarity(e_t, e_prev))


def emb_salience(rec: SentenceRecord) -> float:
    """Cosine distance between the base and deleted window embeddings."""
    win = rec.window_embedding
    if win is None or "base" not in win or "deleted" not in win:
        raise ValidationError(
            f"sentence {rec.index}: window embeddings for 'base' and 'deleted' required")
    return max(0.0, 1.0 - cosine_similarity(win["base"], win["deleted"]))


def imp_adjust(salience: float, sentiment: float) -> float:
    """Magnify salience by sentiment strength: salience * (1 + |sentiment|)."""
    if not (-1.0 <= sentiment <= 1.0):
        raise ValidationError(f"sentiment must lie in [-1, 1], got {sentiment}")
    return salience * (1.0 + abs(sentiment))


def _kmeans_cosine(unit: np.ndarray, k: int, max_iter: int = 100,
                   tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic Lloyd's k-means under cosine distance on unit vectors.

    Init takes k evenly spaced points in sentence order; assignment ties
    break to the lowest cluster index.
    """
    n = unit.shape[0]
    centroids = unit[[(i * n) // k for i in range(k)]].copy()
    assign = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dists = 1.0 - _cosine_to_centroids(unit, centroids)
        assign = np.argmin(dists, axis=1)
        moved = 0.0
        new_centroids = centroids.copy()
        for j in range(k):
            members = unit[assign == j]
            if members.shape[0] == 0:
                continue
            c = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(c - centroids[j])))
            new_centroids[j] = c
        centroids = new_centroids
        if moved <= tol:
            break
    dists = 1.0 - _cosine_to_centroids(unit, centroids)
    assign = np.argmin(dists, axis=1)
    return assign, centroids


def _cosine_to_centroids(unit: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(centroids, axis=1)
    sims = unit @ centroids.T
    # A centroid of exactly cancelling members has no direction; treat as
    # maximally distant rather than failing.
    safe = np.where(norms > 0, norms, 1.0)
    sims = sims / safe
    sims[:, norms == 0] = 0.0
    return sims


def clus_salience(embeddings, cfg: SalienceConfig) -> MetricSeries:
    """Centroid-proximity salience: negated cosine distance to the assigned
    k-means centroid, one cluster per cfg.clus_per sentences."""
    embs = np.stack([np.asarray(e, float) for e in embeddings])
    n = embs.shape[0]
    norms = np.linalg.norm(embs, axis=1)
    if np.any(norms == 0):
        raise ValidationError("clus_salience requires non-zero embeddings")
    unit = embs / norms[:, None]
    k = min(math.ceil(n / cfg.clus_per), n)
    assign, centroids = _kmeans_cosine(unit, k)
    sims = _cosine_to_centroids(unit, centroids)
    scores = -(1.0 - sims[np.arange(n), assign])
    return MetricSeries(name="clus", values=scores)


def _zscore_or_zero(values: np.ndarray) -> np.ndarray:
    std = float(values.std())
    if std == 0.0:
        return np.zeros_like(values)
    return (values - values.mean()) / std


def combine_like_clus(like: MetricSeries, clus: MetricSeries) -> MetricSeries:
    """Weighted 1:2 combination on z-scored inputs (raw scales are
    incompatible). A constant input contributes zero."""
    if len(like) != len(clus):
        raise ValidationError("series length mismatch in combination")
    values = _zscore_or_zero(clus.values) + 2.0 * _zscore_or_zero(like.values)
    return MetricSeries(name="like_clus", values=values)


def positional_baseline(n: int, kind: str, seed: int = 0) -> MetricSeries:
    if n < 1:
        raise ValidationError("series length must be >= 1")
    if kind == "ascending":
        values = np.arange(n, dtype=float)
    elif kind == "descending":
        values = np.arange(n - 1, -1, -1, dtype=float)
    elif kind == "random":
        values = np.random.default_rng(seed).random(n)
    else:
        raise ValidationError(f"unknown positional baseline {kind!r}")
    return MetricSeries(name=kind, values=values)


def salience_series(trace: StoryTrace, cfg: SalienceConfig) -> MetricSeries:
    """Per-sentence salience under cfg.measure, with optional importance
    adjustment and Clus combination."""
    n = len(trace)
    measure = cfg.measure
    if measure in _VARIANT_FOR_MEASURE:
        variant = _VARIANT_FOR_MEASURE[measure]
        values = np.zeros(n)
        available = 0
        for t, rec in enumerate(trace.sentences):
            if rec.window_token_loglikes is None:
                continue  # no following window (e.g. last sentence)
            values[t] = _variant_salience(rec, variant)
            available += 1
        if available == 0:
            raise ValidationError(
                f"measure {measure!r}: no sentence carries the required windows")
        series = MetricSeries(name=measure, values=values)
    elif measure == "emb_surp":
        values = np.zeros(n)
        for t in range(1, n):
            values[t] = emb_surprise(trace.sentences[t].embedding,
                                     trace.sentences[t - 1].embedding)
        series = MetricSeries(name=measure, values=values)
    elif measure == "emb_sal":
        values = np.zeros(n)
        available = 0
        for t, rec in enumerate(trace.sentences):
            if rec.window_embedding is None:
                continue
            values[t] = emb_salience(rec)
            available += 1
        if available == 0:
            raise ValidationError("measure 'emb_sal': no sentence carries window embeddings")
        series = MetricSeries(name=measure, values=values)
    elif measure == "clus":
        series = clus_salience([rec.embedding for rec in trace.sentences], cfg)
    else:
        series = positional_baseline(n, measure, cfg.rng_seed)

    if cfg.imp_adjust:
        adjusted = np.array([
            imp_adjust(v, rec.sentiment if rec.sentiment is not None else 0.0)
            for v, rec in zip(series.values, trace.sentences)
        ])
        series = MetricSeries(name=series.name + "_imp", values=adjusted)
    if cfg.combine_like_clus and measure != "clus":
        clus = clus_salience([rec.embedding for rec in trace.sentences], cfg)
        series = combine_like_clus(series, clus)
    return series
