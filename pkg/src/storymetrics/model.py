"""Shared data model and the line-delimited file formats for traces,
annotations, and gold labels.

A trace file is a JSON header line followed by one JSON record per
sentence. All types are immutable after construction and safe to share
across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """A constructed object violates one of its invariants."""


class ParseError(ValidationError):
    """A serialized file contains an unreadable record."""


class DegenerateStatisticsError(ValueError):
    """A statistic is undefined for this input (zero variance, no pairs)."""


PROB_SUM_TOL = 1e-9
PROB_RENORM_TOL = 1e-6

KNOWN_VARIANTS = ("base", "deleted", "swapped", "no_knowledge")


class Judgment(Enum):
    BIG_DECREASE = "BD"
    DECREASE = "D"
    SAME = "S"
    INCREASE = "I"
    BIG_INCREASE = "BI"


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ContinuationSample:
    embedding: np.ndarray
    raw_score: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "embedding", _as_vector(self.embedding, "sample embedding"))
        if self.raw_score is not None and not math.isfinite(self.raw_score):
            raise ValidationError("sample raw_score must be finite")


@dataclass(frozen=True)
class ContinuationSet:
    """Imagined continuations n sentences ahead, optionally with an
    explicit probability vector over the samples."""

    horizon: int
    samples: tuple[ContinuationSample, ...]
    probabilities: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("continuation horizon must be >= 1")
        samples = tuple(self.samples)
        if not samples:
            raise ValidationError("continuation samples must be non-empty")
        dims = {s.embedding.shape[0] for s in samples}
        if len(dims) > 1:
            raise ValidationError("continuation sample embeddings differ in dimension")
        object.__setattr__(self, "samples", samples)
        if self.probabilities is not None:
            probs = _as_vector(self.probabilities, "continuation probabilities")
            if probs.shape[0] != len(samples):
                raise ValidationError("probability vector length differs from sample count")
            if np.any(probs < 0):
                raise ValidationError("continuation probabilities must be non-negative")
            if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOL:
                raise ValidationError("continuation probabilities must sum to 1")
            object.__setattr__(self, "probabilities", probs)

    @property
    def embedding_dim(self) -> int:
        return self.samples[0].embedding.shape[0]

    def sample_embeddings(self) -> np.ndarray:
        return np.stack([s.embedding for s in self.samples])


@dataclass(frozen=True)
class SentenceRecord:
    index: int
    embedding: np.ndarray
    text: Optional[str] = None
    avg_log_likelihood: Optional[float] = None
    window_token_loglikes: Optional[Mapping[str, tuple[float, ...]]] = None
    window_embedding: Optional[Mapping[str, np.ndarray]] = None
    sentiment: Optional[float] = None
    continuations: Optional[ContinuationSet] = None

    def __post_init__(self):
        if self.index < 0:
            raise ValidationError("sentence index must be >= 0")
        object.__setattr__(self, "embedding", _as_vector(self.embedding, "embedding"))
        if self.avg_log_likelihood is not None and not math.isfinite(self.avg_log_likelihood):
            raise ValidationError("avg_log_likelihood must be finite")
        if self.sentiment is not None and not (-1.0 <= self.sentiment <= 1.0):
            raise ValidationError("sentiment must lie in [-1, 1]")
        if self.window_token_loglikes is not None:
            cleaned = {}
            for variant, seq in self.window_token_loglikes.items():
                vals = tuple(float(v) for v in seq)
                if not vals:
                    raise ValidationError(
                        f"window_token_loglikes[{variant!r}] must be non-empty")
                if not all(math.isfinite(v) for v in vals):
                    raise ValidationError(
                        f"window_token_loglikes[{variant!r}] contains non-finite values")
                cleaned[variant] = vals
            object.__setattr__(self, "window_token_loglikes", cleaned)
        if self.window_embedding is not None:
            cleaned = {
                variant: _as_vector(vec, f"window_embedding[{variant!r}]")
                for variant, vec in self.window_embedding.items()
            }
            object.__setattr__(self, "window_embedding", cleaned)


@dataclass(frozen=True)
class StoryTrace:
    story_id: str
    sentences: tuple[SentenceRecord, ...]
    embedding_dim: int
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        sentences = tuple(self.sentences)
        if not sentences:
            raise ValidationError("a trace needs at least one sentence")
        if self.embedding_dim < 1:
            raise ValidationError("embedding_dim must be positive")
        for pos, rec in enumerate(sentences):
            if rec.index != pos:
                raise ValidationError(
                    f"sentence indices must be contiguous from 0; got {rec.index} at position {pos}")
            if rec.embedding.shape[0] != self.embedding_dim:
                raise ValidationError(
                    f"embedding at index {pos} has length {rec.embedding.shape[0]}, "
                    f"expected embedding_dim={self.embedding_dim}")
        object.__setattr__(self, "sentences", sentences)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class MetricSeries:
    """A named per-sentence curve."""

    name: str
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError(f"series {self.name!r} must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"series {self.name!r} contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class AnnotationSet:
    story_id: str
    annotators: Mapping[str, tuple[Judgment, ...]]

    def __post_init__(self):
        cleaned = {aid: tuple(seq) for aid, seq in self.annotators.items()}
        if not cleaned:
            raise ValidationError("annotation set has no annotators")
        lengths = {len(seq) for seq in cleaned.values()}
        if len(lengths) > 1:
            raise ValidationError("annotator sequences differ in length")
        if 0 in lengths:
            raise ValidationError("annotator sequences must be non-empty")
        object.__setattr__(self, "annotators", cleaned)

    @property
    def length(self) -> int:
        return len(next(iter(self.annotators.values())))


@dataclass(frozen=True)
class GoldLabels:
    kind: str  # "salience" | "turning_points"
    salient_indices: frozenset[int] = frozenset()
    tp_positions: tuple[int, ...] = ()
    tp_windows: Optional[tuple[tuple[int, int], ...]] = None

    def __post_init__(self):
        if self.kind not in ("salience", "turning_points"):
            raise ValidationError(f"unknown gold label kind {self.kind!r}")
        object.__setattr__(self, "salient_indices", frozenset(self.salient_indices))
        object.__setattr__(self, "tp_positions", tuple(self.tp_positions))
        if self.kind == "salience":
            if any(i < 0 for i in self.salient_indices):
                raise ValidationError("salient indices must be >= 0")
        else:
            if len(self.tp_positions) != 5:
                raise ValidationError("turning-point labels need exactly 5 positions")
            if any(p < 0 for p in self.tp_positions):
                raise ValidationError("turning-point positions must be >= 0")
            if self.tp_windows is not None:
                windows = tuple((int(lo), int(hi)) for lo, hi in self.tp_windows)
                if len(windows) != 5:
                    raise ValidationError("turning-point windows need exactly 5 entries")
                for (lo, hi), pos in zip(windows, self.tp_positions):
                    if lo > hi:
                        raise ValidationError(f"window ({lo}, {hi}) has lo > hi")
                    if not (lo <= pos <= hi):
                        raise ValidationError(
                            f"window ({lo}, {hi}) does not contain its position {pos}")
                object.__setattr__(self, "tp_windows", windows)


# ---------------------------------------------------------------------------
# serialization


def _dump_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _vector_list(vec: np.ndarray) -> list[float]:
    return [float(v) for v in vec]


def _record_to_json(rec: SentenceRecord) -> dict:
    out: dict = {"index": rec.index}
    if rec.text is not None:
        out["text"] = rec.text
    out["e"] = _vector_list(rec.embedding)
    if rec.avg_log_likelihood is not None:
        out["avg_ll"] = rec.avg_log_likelihood
    if rec.window_token_loglikes is not None:
        out["win_ll"] = {k: list(v) for k, v in sorted(rec.window_token_loglikes.items())}
    if rec.window_embedding is not None:
        out["win_emb"] = {k: _vector_list(v) for k, v in sorted(rec.window_embedding.items())}
    if rec.sentiment is not None:
        out["sentiment"] = rec.sentiment
    if rec.continuations is not None:
        cont = rec.continuations
        samples = []
        for s in cont.samples:
            entry: dict = {"e": _vector_list(s.embedding)}
            if s.raw_score is not None:
                entry["score"] = s.raw_score
            samples.append(entry)
        cont_json: dict = {"n": cont.horizon, "samples": samples}
        if cont.probabilities is not None:
            cont_json["probs"] = _vector_list(cont.probabilities)
        out["cont"] = cont_json
    return out


def write_trace(trace: StoryTrace, path) -> None:
    lines = [_dump_line({
        "story_id": trace.story_id,
        "embedding_dim": trace.embedding_dim,
        "meta": {k: trace.meta[k] for k in sorted(trace.meta)},
    })]
    lines.extend(_dump_line(_record_to_json(rec)) for rec in trace.sentences)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_continuations(obj, line_no: int) -> ContinuationSet:
    try:
        samples = tuple(
            ContinuationSample(embedding=np.asarray(s["e"], float),
                               raw_score=s.get("score"))
            for s in obj["samples"]
        )
        probs = obj.get("probs")
        if probs is not None:
            probs = np.asarray(probs, float)
            total = float(probs.sum())
            if abs(total - 1.0) > PROB_RENORM_TOL:
                raise ValidationError(
                    f"line {line_no}: continuation probabilities sum to {total}, "
                    f"outside renormalization tolerance")
            if total != 1.0 and total > 0:
                probs = probs / total
        return ContinuationSet(horizon=int(obj["n"]), samples=samples, probabilities=probs)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"line {line_no}: malformed continuation set: {exc}") from exc


def read_trace(path) -> StoryTrace:
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = [ln for ln in (line.rstrip("\n") for line in fh) if ln]
    if not raw_lines:
        raise ParseError(f"{path}: empty trace file")
    try:
        header = json.loads(raw_lines[0])
        story_id = header["story_id"]
        embedding_dim = int(header["embedding_dim"])
        meta = dict(header.get("meta", {}))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line 1: malformed trace header: {exc}") from exc

    records = []
    for line_no, raw in enumerate(raw_lines[1:], start=2):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {line_no}: invalid JSON: {exc}") from exc
        try:
            emb = np.asarray(obj["e"], float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"line {line_no}: missing or malformed embedding: {exc}") from exc
        if emb.ndim != 1 or emb.shape[0] != embedding_dim:
            raise ValidationError(
                f"line {line_no}: embedding length {emb.shape[0] if emb.ndim == 1 else 'n/a'} "
                f"does not match embedding_dim={embedding_dim}")
        cont = obj.get("cont")
        try:
            rec = SentenceRecord(
                index=int(obj["index"]),
                embedding=emb,
                text=obj.get("text"),
                avg_log_likelihood=obj.get("avg_ll"),
                window_token_loglikes=(
                    {k: tuple(v) for k, v in obj["win_ll"].items()}
                    if "win_ll" in obj else None),
                window_embedding=(
                    {k: np.asarray(v, float) for k, v in obj["win_emb"].items()}
                    if "win_emb" in obj else None),
                sentiment=obj.get("sentiment"),
                continuations=_parse_continuations(cont, line_no) if cont is not None else None,
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"line {line_no}: malformed record: {exc}") from exc
        records.append(rec)
    if not records:
        raise ValidationError(f"{path}: trace has no sentences")
    return StoryTrace(story_id=story_id, sentences=tuple(records),
                      embedding_dim=embedding_dim, meta=meta)


_TOKEN_TO_JUDGMENT = {j.value: j for j in Judgment}


def write_annotations(annotations: AnnotationSet, path) -> None:
    lines = [_dump_line({"story_id": annotations.story_id})]
    for aid in sorted(annotations.annotators):
        tokens = " ".join(j.value for j in annotations.annotators[aid])
        lines.append(f"{aid}\t{tokens}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_annotations(path) -> AnnotationSet:
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = [ln for ln in (line.rstrip("\n") for line in fh) if ln]
    if not raw_lines:
        raise ParseError(f"{path}: empty annotation file")
    try:
        story_id = json.loads(raw_lines[0])["story_id"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"line 1: malformed annotation header: {exc}") from exc
    annotators = {}
    for line_no, raw in enumerate(raw_lines[1:], start=2):
        parts = raw.split("\t", 1)
        if len(parts) != 2:
            raise ParseError(f"line {line_no}: expected 'annotator<TAB>tokens'")
        aid, token_str = parts
        judgments = []
        for tok in token_str.split():
            if tok not in _TOKEN_TO_JUDGMENT:
                raise ParseError(f"line {line_no}: unknown judgment token {tok!r}")
            judgments.append(_TOKEN_TO_JUDGMENT[tok])
        annotators[aid] = tuple(judgments)
    return AnnotationSet(story_id=story_id, annotators=annotators)


def write_gold(labels: GoldLabels, path) -> None:
    lines = [_dump_line({"kind": labels.kind})]
    if labels.kind == "salience":
        lines.append(" ".join(str(i) for i in sorted(labels.salient_indices)))
    else:
        for i, pos in enumerate(labels.tp_positions):
            if labels.tp_windows is not None:
                lo, hi = labels.tp_windows[i]
                lines.append(f"{pos} {lo} {hi}")
            else:
                lines.append(str(pos))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_gold(path) -> GoldLabels:
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = [ln for ln in (line.rstrip("\n") for line in fh) if ln.strip()]
    if not raw_lines:
        raise ParseError(f"{path}: empty gold file")
    try:
        kind = json.loads(raw_lines[0])["kind"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"line 1: malformed gold header: {exc}") from exc
    body = raw_lines[1:]
    if kind == "salience":
        indices = set()
        for line_no, raw in enumerate(body, start=2):
            try:
                indices.update(int(tok) for tok in raw.split())
            except ValueError as exc:
                raise ParseError(f"line {line_no}: bad salience index: {exc}") from exc
        return GoldLabels(kind="salience", salient_indices=frozenset(indices))
    positions, windows = [], []
    for line_no, raw in enumerate(body, start=2):
        parts = raw.split()
        try:
            if len(parts) == 1:
                positions.append(int(parts[0]))
            elif len(parts) == 3:
                positions.append(int(parts[0]))
                windows.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"expected 'pos' or 'pos lo hi', got {raw!r}")
        except ValueError as exc:
            raise ParseError(f"line {line_no}: bad turning-point entry: {exc}") from exc
    return GoldLabels(kind="turning_points",
                      tp_positions=tuple(positions),
                      tp_windows=tuple(windows) if windows else None)
