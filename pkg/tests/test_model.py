"""Data model validation and trace/annotation/gold file round-trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storymetrics.model import (AnnotationSet, ContinuationSample,
                                ContinuationSet, GoldLabels, Judgment,
                                MetricSeries, ParseError, SentenceRecord,
                                StoryTrace, ValidationError, read_annotations,
                                read_gold, read_trace, write_annotations,
                                write_gold, write_trace)


def _record(index, emb, **kwargs):
    return SentenceRecord(index=index, embedding=np.asarray(emb, float), **kwargs)


def _minimal_trace():
    return StoryTrace(story_id="s", sentences=(_record(0, [1.0, 0.0]),),
                      embedding_dim=2)


def make_random_trace(rng, n_sentences, dim):
    records = []
    for t in range(n_sentences):
        kwargs = {}
        if rng.random() < 0.7:
            kwargs["text"] = "sentence %d" % t
        if rng.random() < 0.7:
            kwargs["avg_log_likelihood"] = float(rng.normal())
        if rng.random() < 0.7:
            kwargs["window_token_loglikes"] = {
                "base": tuple(float(v) for v in -rng.random(3)),
                "deleted": tuple(float(v) for v in -rng.random(3)),
            }
        if rng.random() < 0.7:
            kwargs["window_embedding"] = {
                "base": rng.normal(size=dim),
                "deleted": rng.normal(size=dim),
            }
        if rng.random() < 0.7:
            kwargs["sentiment"] = float(rng.uniform(-1, 1))
        if rng.random() < 0.7:
            k = int(rng.integers(1, 4))
            probs = rng.random(k)
            probs /= probs.sum()
            kwargs["continuations"] = ContinuationSet(
                horizon=1,
                samples=tuple(ContinuationSample(embedding=rng.normal(size=dim),
                                                 raw_score=float(rng.normal()))
                              for _ in range(k)),
                probabilities=probs,
            )
        records.append(_record(t, rng.normal(size=dim), **kwargs))
    return StoryTrace(story_id="rnd", sentences=tuple(records),
                      embedding_dim=dim, meta={"corpus": "unit-test"})


def traces_equal(a, b):
    if (a.story_id, a.embedding_dim, dict(a.meta)) != (b.story_id, b.embedding_dim, dict(b.meta)):
        return False
    if len(a) != len(b):
        return False
    for ra, rb in zip(a.sentences, b.sentences):
        if ra.index != rb.index or ra.text != rb.text:
            return False
        if not np.array_equal(ra.embedding, rb.embedding):
            return False
        if (ra.avg_log_likelihood is None) != (rb.avg_log_likelihood is None):
            return False
        if ra.avg_log_likelihood is not None and ra.avg_log_likelihood != rb.avg_log_likelihood:
            return False
        if (ra.window_token_loglikes is None) != (rb.window_token_loglikes is None):
            return False
        if ra.window_token_loglikes is not None:
            if set(ra.window_token_loglikes) != set(rb.window_token_loglikes):
                return False
            for key in ra.window_token_loglikes:
                if tuple(ra.window_token_loglikes[key]) != tuple(rb.window_token_loglikes[key]):
                    return False
        if (ra.window_embedding is None) != (rb.window_embedding is None):
            return False
        if ra.window_embedding is not None:
            for key in ra.window_embedding:
                if not np.array_equal(ra.window_embedding[key], rb.window_embedding[key]):
                    return False
        if ra.sentiment != rb.sentiment:
            return False
        if (ra.continuations is None) != (rb.continuations is None):
            return False
        if ra.continuations is not None:
            ca, cb = ra.continuations, rb.continuations
            if ca.horizon != cb.horizon or len(ca.samples) != len(cb.samples):
                return False
            for sa, sb in zip(ca.samples, cb.samples):
                if not np.array_equal(sa.embedding, sb.embedding) or sa.raw_score != sb.raw_score:
                    return False
            if (ca.probabilities is None) != (cb.probabilities is None):
                return False
            if ca.probabilities is not None and not np.allclose(
                    ca.probabilities, cb.probabilities, rtol=0.0, atol=1e-12):
                # reading renormalizes the probability vector, which can move
                # each entry by one ulp when the written sum is not exactly 1
                return False
    return True


# --- type invariants ---------------------------------------------------------

def test_minimal_trace_valid():
    trace = _minimal_trace()
    assert len(trace) == 1
    assert trace.embedding_dim == 2


def test_trace_requires_sentences():
    with pytest.raises(ValidationError):
        StoryTrace(story_id="s", sentences=(), embedding_dim=2)


def test_trace_rejects_noncontiguous_indices():
    with pytest.raises(ValidationError):
        StoryTrace(story_id="s",
                   sentences=(_record(0, [1, 0]), _record(2, [0, 1])),
                   embedding_dim=2)


def test_trace_rejects_dim_mismatch():
    with pytest.raises(ValidationError):
        StoryTrace(story_id="s",
                   sentences=(_record(0, [1, 0]), _record(1, [0, 1, 2])),
                   embedding_dim=2)


def test_sentiment_out_of_range_rejected():
    with pytest.raises(ValidationError):
        _record(0, [1, 0], sentiment=1.5)


def test_continuation_probs_must_sum_to_one():
    with pytest.raises(ValidationError):
        ContinuationSet(horizon=1,
                        samples=(ContinuationSample(embedding=np.array([1.0, 0.0])),),
                        probabilities=np.array([0.5]))


def test_metric_series_rejects_nonfinite():
    with pytest.raises(ValidationError):
        MetricSeries(name="x", values=np.array([1.0, np.nan]))


def test_gold_turning_points_needs_five():
    with pytest.raises(ValidationError):
        GoldLabels(kind="turning_points", tp_positions=(1, 2, 3))


def test_gold_windows_must_contain_positions():
    with pytest.raises(ValidationError):
        GoldLabels(kind="turning_points", tp_positions=(1, 2, 3, 4, 5),
                   tp_windows=((0, 2), (1, 3), (2, 4), (3, 5), (7, 9)))


# --- trace files -------------------------------------------------------------

def test_trace_round_trip_minimal(tmp_path):
    trace = _minimal_trace()
    path = tmp_path / "t.trace"
    write_trace(trace, path)
    assert traces_equal(read_trace(path), trace)


def test_trace_round_trip_random(tmp_path):
    rng = np.random.default_rng(11)
    for i in range(10):
        trace = make_random_trace(rng, int(rng.integers(1, 12)), int(rng.integers(2, 6)))
        path = tmp_path / f"r{i}.trace"
        write_trace(trace, path)
        assert traces_equal(read_trace(path), trace)


def test_trace_write_byte_stable(tmp_path):
    trace = make_random_trace(np.random.default_rng(3), 100, 4)
    a, b = tmp_path / "a.trace", tmp_path / "b.trace"
    write_trace(trace, a)
    write_trace(trace, b)
    assert a.read_bytes() == b.read_bytes()


def test_trace_omits_absent_optionals(tmp_path):
    path = tmp_path / "t.trace"
    write_trace(_minimal_trace(), path)
    body = path.read_text().splitlines()[1]
    for key in ("text", "avg_ll", "win_ll", "win_emb", "sentiment", "cont"):
        assert f'"{key}"' not in body


def test_parse_error_names_line(tmp_path):
    path = tmp_path / "bad.trace"
    path.write_text('{"story_id":"s","embedding_dim":2,"meta":{}}\n'
                    '{"index":0,"e":[1.0,0.0]}\n'
                    'not json\n')
    with pytest.raises(ParseError, match="line 3"):
        read_trace(path)


def test_dim_mismatch_error_names_line(tmp_path):
    path = tmp_path / "bad.trace"
    path.write_text('{"story_id":"s","embedding_dim":2,"meta":{}}\n'
                    '{"index":0,"e":[1.0,0.0]}\n'
                    '{"index":1,"e":[1.0,0.0,0.0]}\n')
    with pytest.raises((ParseError, ValidationError), match="(line 3|dimension)"):
        read_trace(path)


def test_probabilities_renormalized_within_tolerance(tmp_path):
    path = tmp_path / "t.trace"
    path.write_text('{"story_id":"s","embedding_dim":2,"meta":{}}\n'
                    '{"index":0,"e":[1.0,0.0],"cont":{"n":1,'
                    '"samples":[{"e":[1.0,0.0]},{"e":[0.0,1.0]}],'
                    '"probs":[0.5000000001,0.4999999998]}}\n')
    trace = read_trace(path)
    probs = trace.sentences[0].continuations.probabilities
    assert abs(float(probs.sum()) - 1.0) < 1e-12


def test_probabilities_rejected_outside_tolerance(tmp_path):
    path = tmp_path / "t.trace"
    path.write_text('{"story_id":"s","embedding_dim":2,"meta":{}}\n'
                    '{"index":0,"e":[1.0,0.0],"cont":{"n":1,'
                    '"samples":[{"e":[1.0,0.0]},{"e":[0.0,1.0]}],'
                    '"probs":[0.6,0.5]}}\n')
    with pytest.raises((ParseError, ValidationError)):
        read_trace(path)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 8), dim=st.integers(2, 5))
def test_trace_round_trip_property(tmp_path_factory, seed, n, dim):
    trace = make_random_trace(np.random.default_rng(seed), n, dim)
    path = tmp_path_factory.mktemp("rt") / "t.trace"
    write_trace(trace, path)
    assert traces_equal(read_trace(path), trace)


# --- annotation and gold files -----------------------------------------------

def test_annotation_round_trip(tmp_path):
    annotations = AnnotationSet(story_id="s", annotators={
        "a1": (Judgment.SAME, Judgment.INCREASE, Judgment.BIG_DECREASE),
        "a2": (Judgment.SAME, Judgment.DECREASE, Judgment.BIG_INCREASE),
    })
    path = tmp_path / "s.ann"
    write_annotations(annotations, path)
    loaded = read_annotations(path)
    assert loaded.story_id == "s"
    assert loaded.annotators == annotations.annotators


def test_annotation_rejects_unknown_token(tmp_path):
    path = tmp_path / "s.ann"
    path.write_text('{"story_id":"s"}\na1\tS I XX\n')
    with pytest.raises((ParseError, ValidationError)):
        read_annotations(path)


def test_annotation_rejects_length_mismatch():
    with pytest.raises(ValidationError):
        AnnotationSet(story_id="s", annotators={
            "a1": (Judgment.SAME, Judgment.INCREASE),
            "a2": (Judgment.SAME,),
        })


def test_gold_salience_round_trip(tmp_path):
    gold = GoldLabels(kind="salience", salient_indices=frozenset({1, 4, 7}))
    path = tmp_path / "g.txt"
    write_gold(gold, path)
    loaded = read_gold(path)
    assert loaded.kind == "salience"
    assert set(loaded.salient_indices) == {1, 4, 7}


def test_gold_turning_points_round_trip(tmp_path):
    gold = GoldLabels(kind="turning_points", tp_positions=(2, 5, 9, 14, 18),
                      tp_windows=((1, 3), (4, 6), (8, 10), (13, 15), (17, 19)))
    path = tmp_path / "g.txt"
    write_gold(gold, path)
    loaded = read_gold(path)
    assert loaded.tp_positions == (2, 5, 9, 14, 18)
    assert loaded.tp_windows == ((1, 3), (4, 6), (8, 10), (13, 15), (17, 19))
