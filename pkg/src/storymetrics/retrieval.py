"""Dense passage retrieval over a knowledgebase plus a bounded episodic
memory cache, with softmax marginalization weights.

Search is an exact dot-product scan; the ordering and tie contracts are
fixed so an approximate index could be swapped in without changing the
exact-mode tests.
"""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import ParseError, ValidationError
from .suspense import softmax


@dataclass(frozen=True)
class Passage:
    id: str
    key: np.ndarray
    payload: str
    source: str  # "kb" | "memory"
    position: Optional[int] = None
    token_dist: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.source not in ("kb", "memory"):
            raise ValidationError(f"unknown passage source {self.source!r}")
        key = np.asarray(self.key, float)
        if key.ndim != 1 or key.size == 0 or not np.all(np.isfinite(key)):
            raise ValidationError(f"passage {self.id!r}: key must be a finite 1-d vector")
        key.setflags(write=False)
        object.__setattr__(self, "key", key)
        if self.token_dist is not None:
            dist = np.asarray(self.token_dist, float)
            if np.any(dist < 0) or abs(float(dist.sum()) - 1.0) > 1e-9:
                raise ValidationError(f"passage {self.id!r}: token_dist is not a distribution")
            dist.setflags(write=False)
            object.__setattr__(self, "token_dist", dist)


class PassageStore:
    """Fixed-dimension collection of passages with exact top-k lookup."""

    def __init__(self, dim: int, passages: Sequence[Passage] = ()):
        if dim < 1:
            raise ValidationError("store dimension must be >= 1")
        self.dim = dim
        self._passages: list[Passage] = []
        for p in passages:
            self.add(p)

    def add(self, passage: Passage) -> None:
        if passage.key.shape[0] != self.dim:
            raise ValidationError(
                f"passage {passage.id!r}: key dimension {passage.key.shape[0]} "
                f"does not match store dimension {self.dim}")
        self._passages.append(passage)

    def __len__(self) -> int:
        return len(self._passages)

    def __iter__(self):
        return iter(self._passages)

    def top_k(self, query, k: int) -> list[tuple[Passage, float]]:
        if k < 1:
            raise ValidationError("k must be >= 1")
        hits = [(p, score(query, p.key)) for p in self._passages]
        hits.sort(key=lambda ps: (-ps[1], ps[0].id))
        return hits[:k]


class MemoryCache:
    """Bounded passage cache with LRU or FIFO eviction. Cleared between
    works via reset()."""

    def __init__(self, capacity: int, policy: str = "LRU", dim: Optional[int] = None):
        if capacity < 1:
            raise ValidationError("cache capacity must be >= 1")
        policy = policy.upper()
        if policy not in ("LRU", "FIFO"):
            raise ValidationError(f"unknown cache policy {policy!r}")
        self.capacity = capacity
        self.policy = policy
        self.dim = dim
        self._entries: OrderedDict[str, Passage] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._entries

    def ids(self) -> list[str]:
        return list(self._entries)

    def passages(self) -> list[Passage]:
        return list(self._entries.values())

    def add(self, passage: Passage) -> None:
        if self.dim is None:
            self.dim = passage.key.shape[0]
        elif passage.key.shape[0] != self.dim:
            raise ValidationError(
                f"passage {passage.id!r}: key dimension {passage.key.shape[0]} "
                f"does not match cache dimension {self.dim}")
        if passage.id in self._entries:
            self._entries[passage.id] = passage
            if self.policy == "LRU":
                self._entries.move_to_end(passage.id)
        else:
            self._entries[passage.id] = passage
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)

    def touch(self, passage_id: str) -> None:
        if passage_id not in self._entries:
            raise ValidationError(f"no cached passage with id {passage_id!r}")
        if self.policy == "LRU":
            self._entries.move_to_end(passage_id)

    def reset(self) -> None:
        self._entries.clear()

    def top_k(self, query, k: int) -> list[tuple[Passage, float]]:
        if k < 1:
            raise ValidationError("k must be >= 1")
        hits = [(p, score(query, p.key)) for p in self._entries.values()]
        hits.sort(key=lambda ps: (-ps[1], ps[0].id))
        return hits[:k]


def score(query, key) -> float:
    """Retrieval score: dot product of query and passage key."""
    q = np.asarray(query, float)
    k = np.asarray(key, float)
    if q.shape != k.shape:
        raise ValidationError("query/key dimension mismatch")
    return float(np.dot(q, k))


_SOURCE_RANK = {"kb": 0, "memory": 1}


def topk_merge(kb_hits: Sequence[tuple[Passage, float]],
               mem_hits: Sequence[tuple[Passage, float]],
               z: int) -> list[tuple[Passage, float]]:
    """Top z scored passages across both sources; ties go kb before
    memory, then id order."""
    if z < 1:
        raise ValidationError("z must be >= 1")
    merged = list(kb_hits) + list(mem_hits)
    if not merged:
        raise ValidationError("nothing to merge: both hit lists are empty")
    merged.sort(key=lambda ps: (-ps[1], _SOURCE_RANK[ps[0].source], ps[0].id))
    return merged[:z]


def marginal_weights(scores) -> np.ndarray:
    """Softmax-normalized retrieval scores."""
    scores = np.asarray(scores, float)
    if scores.ndim != 1 or scores.size == 0:
        raise ValidationError("scores must be a non-empty 1-d sequence")
    return softmax(scores)


def marginalize_token_dists(weights, dists) -> np.ndarray:
    """Convex combination of per-passage token distributions."""
    weights = np.asarray(weights, float)
    mat = np.stack([np.asarray(d, float) for d in dists])
    if weights.shape[0] != mat.shape[0]:
        raise ValidationError("one weight per distribution required")
    for i, row in enumerate(mat):
        if np.any(row < 0) or abs(float(row.sum()) - 1.0) > 1e-9:
            raise ValidationError(f"distribution {i} is not a valid probability vector")
    out = weights @ mat
    return out / out.sum()


def retrieve(query, kb: PassageStore, cache: Optional[MemoryCache],
             k_kb: int, k_mem: int, z: int) -> tuple[list[tuple[Passage, float]], np.ndarray]:
    """Exact top-k lookup in the KB and memory, merged to the top z with
    softmax marginalization weights."""
    kb_hits = kb.top_k(query, k_kb) if len(kb) else []
    mem_hits = cache.top_k(query, k_mem) if cache is not None and len(cache) else []
    if not kb_hits and not mem_hits:
        raise ValidationError("both the KB and memory are empty")
    merged = topk_merge(kb_hits, mem_hits, z)
    weights = marginal_weights([s for _, s in merged])
    return merged, weights


# ---------------------------------------------------------------------------
# passage store files: header with dimension, one passage per line


def write_passages(store: PassageStore, path) -> None:
    lines = [json.dumps({"dim": store.dim}, separators=(",", ":"))]
    for p in store:
        obj: dict = {"id": p.id, "source": p.source,
                     "key": [float(v) for v in p.key], "payload": p.payload}
        if p.position is not None:
            obj["position"] = p.position
        if p.token_dist is not None:
            obj["token_dist"] = [float(v) for v in p.token_dist]
        lines.append(json.dumps(obj, separators=(",", ":"), allow_nan=False))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_passages(path) -> PassageStore:
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = [ln for ln in (line.rstrip("\n") for line in fh) if ln]
    if not raw_lines:
        raise ParseError(f"{path}: empty passage file")
    try:
        dim = int(json.loads(raw_lines[0])["dim"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line 1: malformed passage header: {exc}") from exc
    store = PassageStore(dim=dim)
    for line_no, raw in enumerate(raw_lines[1:], start=2):
        try:
            obj = json.loads(raw)
            passage = Passage(
                id=obj["id"], key=np.asarray(obj["key"], float),
                payload=obj["payload"], source=obj["source"],
                position=obj.get("position"),
                token_dist=(np.asarray(obj["token_dist"], float)
                            if "token_dist" in obj else None),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"line {line_no}: malformed passage: {exc}") from exc
        store.add(passage)
    return store
