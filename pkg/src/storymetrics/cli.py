"""Command-line front end: analyze traces into metric CSVs, evaluate
predictions against annotations or gold labels, align summaries to full
text, plot curves as SVG, and run a fully synthetic demo pipeline.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 degenerate
statistics.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import alignment, annotation, baseline, evaluation, salience, suspense, svgplot
from .model import (AnnotationSet, DegenerateStatisticsError, GoldLabels,
                    MetricSeries, StoryTrace, ValidationError, read_annotations,
                    read_gold, read_trace, write_annotations, write_gold,
                    write_trace)

DEFAULT_METRICS = ("ely_surprise", "ely_suspense", "alpha_ely_suspense",
                   "hale_surprise", "sample_ely_suspense", "embedding_similarity")
DEFAULT_MEASURES = ("like", "swap", "know_diff", "emb_surp", "emb_sal", "clus")


def _max_workers() -> int:
    raw = os.environ.get("NARR_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return max(1, n) if n > 0 else 4


def _fmt_value(v: float) -> str:
    return repr(float(v))


def _write_series_csv(path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    n = len(next(iter(columns.values())))
    lines = ["sentence," + ",".join(names)]
    for i in range(n):
        lines.append(str(i) + "," + ",".join(_fmt_value(columns[name][i]) for name in names))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_series_csv(path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty series CSV")
    header = lines[0].split(",")
    if header[0] != "sentence" or len(header) < 2:
        raise ValidationError(f"{path}: expected header 'sentence,<series...>'")
    names = header[1:]
    rows = []
    for ln_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValidationError(f"{path} line {ln_no}: wrong column count")
        rows.append([float(p) for p in parts[1:]])
    data = np.asarray(rows, float)
    return {name: data[:, j] for j, name in enumerate(names)}


def _metric_config(args) -> suspense.MetricConfig:
    kind = {"l1": suspense.DistanceKind.L1, "l2": suspense.DistanceKind.L2,
            "sql2": suspense.DistanceKind.SQUARED_L2,
            "cosine": suspense.DistanceKind.COSINE}[args.distance]
    return suspense.MetricConfig(distance=kind, horizon=args.horizon)


def _analyze_one(trace: StoryTrace, metrics, measures, args) -> dict[str, np.ndarray]:
    cfg = _metric_config(args)
    columns: dict[str, np.ndarray] = {}
    for name in metrics:
        columns[name] = suspense.metric_series(trace, name, cfg).values
    for measure in measures:
        scfg = salience.SalienceConfig(window_tokens=args.window_tokens,
                                       measure=measure, rng_seed=args.seed)
        columns[measure] = salience.salience_series(trace, scfg).values
    if args.zscore:
        columns = {name: annotation.zscore(MetricSeries(name, vals)).values
                   for name, vals in columns.items()}
    return columns


def cmd_analyze(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = [m for m in (args.metrics.split(",") if args.metrics else []) if m]
    measures = [m for m in (args.measures.split(",") if args.measures else []) if m]
    if not metrics and not measures:
        metrics = list(DEFAULT_METRICS)
    traces = [read_trace(p) for p in args.trace]
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(lambda tr: _analyze_one(tr, metrics, measures, args), traces))
    for trace, columns in zip(traces, results):
        _write_series_csv(out_dir / f"{trace.story_id}.csv", columns)
    return 0


RESULT_HEADER = ("story_id,measure,tau,rho,tau_lo,tau_hi,rho_lo,rho_hi,"
                 "tp_distance,map,recall_at_k,rouge_l,n")


def _blank_row(story_id: str, measure: str) -> dict:
    return {"story_id": story_id, "measure": measure, "tau": "", "rho": "",
            "tau_lo": "", "tau_hi": "", "rho_lo": "", "rho_hi": "",
            "tp_distance": "", "map": "", "recall_at_k": "", "rouge_l": "", "n": ""}


def _row_line(row: dict) -> str:
    keys = RESULT_HEADER.split(",")
    return ",".join(str(row[k]) for k in keys)


def _fisher_bounds(r: float, n: int) -> tuple[str, str]:
    if n > 3 and -1.0 < r < 1.0:
        lo, hi = evaluation.fisher_ci(r, n, 0.95)
        return _fmt_value(lo), _fmt_value(hi)
    return "", ""


def _eval_suspense(story_id: str, pred: dict[str, np.ndarray],
                   annotations: AnnotationSet) -> list[dict]:
    rows = []
    n = annotations.length
    for name, values in pred.items():
        result = annotation.pairwise_correlation(MetricSeries(name, values), annotations)
        row = _blank_row(story_id, name)
        row["tau"], row["rho"] = _fmt_value(result.tau), _fmt_value(result.rho)
        row["tau_lo"], row["tau_hi"] = _fisher_bounds(result.tau, n)
        row["rho_lo"], row["rho_hi"] = _fisher_bounds(result.rho, n)
        row["n"] = n
        rows.append(row)
    human = annotation.human_upper_bound(annotations)
    row = _blank_row(story_id, "human_upper_bound")
    row["tau"], row["rho"] = _fmt_value(human.tau), _fmt_value(human.rho)
    row["n"] = n
    rows.append(row)
    return rows


def _derive_windows(gold: GoldLabels, n: int) -> list[tuple[int, int]]:
    if gold.tp_windows is not None:
        return list(gold.tp_windows)
    half = max(1, round(0.1 * n))
    return [(max(0, p - half), min(n - 1, p + half)) for p in gold.tp_positions]


def _eval_turning_points(story_id: str, pred: dict[str, np.ndarray],
                         gold: GoldLabels) -> list[dict]:
    rows = []
    for name, values in pred.items():
        n = values.shape[0]
        windows = _derive_windows(gold, n)
        peaks = evaluation.find_peaks(values)
        assigned = evaluation.assign_turning_points(peaks, windows)
        dist = evaluation.tp_distance([a.index for a in assigned], gold.tp_positions, n)
        row = _blank_row(story_id, name)
        row["tp_distance"] = _fmt_value(dist)
        row["n"] = n
        rows.append(row)
    return rows


def _eval_salience(story_id: str, pred: dict[str, np.ndarray], gold: GoldLabels,
                   trace: Optional[StoryTrace], k: Optional[int]) -> list[dict]:
    rows = []
    for name, values in pred.items():
        series = MetricSeries(name, values)
        row = _blank_row(story_id, name)
        row["map"] = _fmt_value(evaluation.average_precision(series, gold))
        row["recall_at_k"] = _fmt_value(evaluation.recall_at_k(series, gold, k))
        if trace is not None and all(rec.text is not None for rec in trace.sentences):
            top_k = k if k is not None else len(gold.salient_indices)
            order = sorted(range(len(values)), key=lambda i: (-values[i], i))[:top_k]
            pred_tokens = [tok for i in sorted(order)
                           for tok in baseline.tokenize(trace.sentences[i].text)]
            gold_tokens = [tok for i in sorted(gold.salient_indices)
                           for tok in baseline.tokenize(trace.sentences[i].text)]
            if pred_tokens and gold_tokens:
                row["rouge_l"] = _fmt_value(evaluation.rouge_l(pred_tokens, gold_tokens))
        row["n"] = values.shape[0]
        rows.append(row)
    return rows


def _aggregate_rows(rows: list[dict]) -> list[dict]:
    by_measure: dict[str, list[dict]] = {}
    for row in rows:
        by_measure.setdefault(row["measure"], []).append(row)
    agg = []
    for measure in sorted(by_measure):
        group = by_measure[measure]
        out = _blank_row("ALL", measure)
        for field in ("tau", "rho", "tp_distance", "map", "recall_at_k", "rouge_l"):
            vals = [float(r[field]) for r in group if r[field] != ""]
            if vals:
                out[field] = _fmt_value(float(np.mean(vals)))
        out["n"] = len(group)
        agg.append(out)
    return agg


def cmd_evaluate(args) -> int:
    preds = [read_series_csv(p) for p in args.pred]
    rows: list[dict] = []
    if args.mode == "suspense":
        if not args.annotations or len(args.annotations) != len(args.pred):
            raise ValidationError("one --annotations file per prediction CSV required")
        jobs = list(zip(args.pred, preds, [read_annotations(p) for p in args.annotations]))
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            per_story = list(pool.map(
                lambda job: _eval_suspense(Path(job[0]).stem, job[1], job[2]), jobs))
    elif args.mode == "turning-points":
        if not args.gold or len(args.gold) != len(args.pred):
            raise ValidationError("one --gold file per prediction CSV required")
        golds = [read_gold(p) for p in args.gold]
        for g in golds:
            if g.kind != "turning_points":
                raise ValidationError("turning-points mode needs turning_points gold labels")
        jobs = list(zip(args.pred, preds, golds))
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            per_story = list(pool.map(
                lambda job: _eval_turning_points(Path(job[0]).stem, job[1], job[2]), jobs))
    else:  # salience
        if not args.gold or len(args.gold) != len(args.pred):
            raise ValidationError("one --gold file per prediction CSV required")
        golds = [read_gold(p) for p in args.gold]
        for g in golds:
            if g.kind != "salience":
                raise ValidationError("salience mode needs salience gold labels")
        traces = ([read_trace(p) for p in args.trace]
                  if args.trace else [None] * len(preds))
        if len(traces) != len(preds):
            raise ValidationError("one --trace per prediction CSV required when given")
        jobs = list(zip(args.pred, preds, golds, traces))
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            per_story = list(pool.map(
                lambda job: _eval_salience(Path(job[0]).stem, job[1], job[2],
                                           job[3], args.k), jobs))
    for story_rows in per_story:
        rows.extend(story_rows)
    rows.extend(_aggregate_rows(rows))
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(RESULT_HEADER + "\n")
        for row in rows:
            fh.write(_row_line(row) + "\n")
    return 0


def cmd_align(args) -> int:
    if len(args.trace) != 2:
        raise ValidationError("align needs exactly two --trace files: summary then full text")
    summary = read_trace(args.trace[0])
    fulltext = read_trace(args.trace[1])
    cfg = alignment.AlignConfig(window_fraction=args.rho, min_sim=args.mu,
                                slack=args.theta, max_matches=args.max_matches)
    result = alignment.align([r.embedding for r in summary.sentences],
                             [r.embedding for r in fulltext.sentences], cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_gold(result.labels, out_dir / f"{fulltext.story_id}_gold.txt")
    report = alignment.alignment_report(result.labels, len(fulltext))
    with open(out_dir / f"{fulltext.story_id}_report.csv", "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write("label_count,fulltext_sentences,coverage,empty_windows\n")
        fh.write(f"{report['label_count']},{report['fulltext_sentences']},"
                 f"{_fmt_value(report['coverage'])},{result.empty_windows}\n")
    return 0


def cmd_plot(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    gold_indices: list[int] = []
    if args.gold:
        gold = read_gold(args.gold[0])
        gold_indices = (sorted(gold.salient_indices) if gold.kind == "salience"
                        else list(gold.tp_positions))
    for path in args.pred:
        columns = read_series_csv(path)
        first = columns[sorted(columns)[0]]
        peaks = [p.index for p in evaluation.find_peaks(first)]
        svg = svgplot.render_svg(columns, gold_indices=gold_indices, peak_indices=peaks)
        out_path = out_dir / (Path(path).stem + ".svg")
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    return 0


# ---------------------------------------------------------------------------
# demo corpus

_VOCAB = ("storm", "harbor", "letter", "garden", "night", "train", "door",
          "river", "fire", "silence", "watched", "waited", "opened", "burned",
          "returned", "slowly", "again", "north", "old", "quiet")


def demo_sentences(seed: int) -> dict[str, list[str]]:
    """Deterministic synthetic corpus. The pivot story embeds a sentence
    that alone introduces the dominant bigrams of its following window."""
    rng = np.random.default_rng(seed)
    stories: dict[str, list[str]] = {}
    pivot = [
        "the harbor was quiet at night",
        "an old letter waited by the door",
        "first spoke zarkon vellum zarkon vellum zarkon",
        "vellum zarkon vellum zarkon vellum answered the call zarkon",
        "vellum zarkon vellum zarkon vellum kept the secret",
        "the garden gate stood open",
        "rain fell on the river slowly",
        "the fire burned low and the silence returned",
    ]
    stories["pivot"] = pivot
    for s in range(2):
        n_sentences = 18 + 2 * s
        sents = []
        for _ in range(n_sentences):
            length = int(rng.integers(4, 9))
            words = [str(_VOCAB[int(rng.integers(0, len(_VOCAB)))]) for _ in range(length)]
            sents.append(" ".join(words))
        stories[f"wp_{s + 1:03d}"] = sents
    return stories


def _synth_annotations(story_id: str, curve: np.ndarray, n_annotators: int,
                       seed: int) -> AnnotationSet:
    from .model import Judgment
    rng = np.random.default_rng(seed)
    scale = float(curve.std()) or 1.0
    annotators = {}
    for a in range(n_annotators):
        noisy = curve + rng.normal(0.0, 0.3 * scale, size=curve.shape[0])
        diffs = np.diff(noisy)
        sigma = float(np.std(diffs)) or 1.0
        judgments = [Judgment.SAME]
        for d in diffs:
            if d >= 0.75 * sigma:
                judgments.append(Judgment.BIG_INCREASE)
            elif d >= 0.25 * sigma:
                judgments.append(Judgment.INCREASE)
            elif d <= -0.75 * sigma:
                judgments.append(Judgment.BIG_DECREASE)
            elif d <= -0.25 * sigma:
                judgments.append(Judgment.DECREASE)
            else:
                judgments.append(Judgment.SAME)
        annotators[f"annotator_{a + 1}"] = tuple(judgments)
    return AnnotationSet(story_id=story_id, annotators=annotators)


def cmd_demo(args) -> int:
    out_dir = Path(args.out)
    seed = args.seed
    traces_dir = out_dir / "traces"
    curves_dir = out_dir / "curves"
    eval_dir = out_dir / "eval"
    plots_dir = out_dir / "plots"
    for d in (traces_dir, curves_dir, eval_dir, plots_dir):
        d.mkdir(parents=True, exist_ok=True)

    embedder = baseline.HashEmbedder(dim=16, seed=seed)
    stories = demo_sentences(seed)
    traces = {}
    for story_id, sentences in stories.items():
        trace = baseline.build_trace(sentences, embedder, window_tokens=32,
                                     seed=seed, story_id=story_id)
        traces[story_id] = trace
        write_trace(trace, traces_dir / f"{story_id}.trace")

    cfg = suspense.MetricConfig()
    metric_columns: dict[str, dict[str, np.ndarray]] = {}
    for story_id, trace in traces.items():
        columns: dict[str, np.ndarray] = {}
        for name in DEFAULT_METRICS:
            columns[name] = suspense.metric_series(trace, name, cfg).values
        for measure in DEFAULT_MEASURES:
            scfg = salience.SalienceConfig(window_tokens=32, measure=measure, rng_seed=seed)
            columns[measure] = salience.salience_series(trace, scfg).values
        metric_columns[story_id] = columns
        _write_series_csv(curves_dir / f"{story_id}.csv", columns)

    # suspense evaluation against synthetic annotators
    ann_paths, pred_paths = [], []
    for story_id, trace in traces.items():
        curve = metric_columns[story_id]["ely_suspense"]
        annotations = _synth_annotations(story_id, curve, 3, seed + 1)
        path = eval_dir / f"{story_id}.ann"
        write_annotations(annotations, path)
        ann_paths.append(str(path))
        pred_paths.append(str(curves_dir / f"{story_id}.csv"))
    eval_args = argparse.Namespace(pred=pred_paths, annotations=ann_paths, gold=None,
                                   trace=None, mode="suspense", k=None,
                                   out=str(eval_dir / "suspense_results.csv"))
    cmd_evaluate(eval_args)

    # salience evaluation with alignment-derived silver labels on the pivot story
    pivot = traces["pivot"]
    # chosen so the summary sentences sit at matching relative positions
    summary_idx = [0, 4]
    summary_embs = [pivot.sentences[i].embedding for i in summary_idx]
    result = alignment.align(summary_embs, [r.embedding for r in pivot.sentences],
                             alignment.AlignConfig())
    gold_path = eval_dir / "pivot_gold.txt"
    write_gold(result.labels, gold_path)
    sal_args = argparse.Namespace(pred=[str(curves_dir / "pivot.csv")],
                                  gold=[str(gold_path)],
                                  trace=[str(traces_dir / "pivot.trace")],
                                  annotations=None, mode="salience", k=None,
                                  out=str(eval_dir / "salience_results.csv"))
    cmd_evaluate(sal_args)

    # turning-point evaluation on the longest story
    tp_story = "wp_002"
    n = len(traces[tp_story])
    positions = [round(f * (n - 1)) for f in (0.1, 0.3, 0.5, 0.75, 0.9)]
    windows = [(max(0, p - 2), min(n - 1, p + 2)) for p in positions]
    tp_gold = GoldLabels(kind="turning_points", tp_positions=tuple(positions),
                         tp_windows=tuple(windows))
    tp_path = eval_dir / f"{tp_story}_tp.txt"
    write_gold(tp_gold, tp_path)
    tp_args = argparse.Namespace(pred=[str(curves_dir / f"{tp_story}.csv")],
                                 gold=[str(tp_path)], trace=None, annotations=None,
                                 mode="turning-points", k=None,
                                 out=str(eval_dir / "tp_results.csv"))
    cmd_evaluate(tp_args)

    # plots
    plot_args = argparse.Namespace(pred=[str(curves_dir / f"{sid}.csv")
                                         for sid in sorted(traces)],
                                   gold=None, out=str(plots_dir))
    cmd_plot(plot_args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="storymetrics")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="compute metric curves from traces")
    analyze.add_argument("--trace", action="append", required=True)
    analyze.add_argument("--metrics", default="")
    analyze.add_argument("--measures", default="")
    analyze.add_argument("--distance", choices=("l1", "l2", "sql2", "cosine"),
                         default="sql2")
    analyze.add_argument("--horizon", type=int, default=1)
    analyze.add_argument("--window-tokens", type=int, default=128)
    analyze.add_argument("--zscore", action="store_true")
    analyze.add_argument("--seed", type=int, default=0)
    analyze.add_argument("--out", required=True)
    analyze.set_defaults(func=cmd_analyze)

    ev = sub.add_parser("evaluate", help="score prediction CSVs against references")
    ev.add_argument("pred", nargs="+")
    ev.add_argument("--mode", choices=("suspense", "turning-points", "salience"),
                    required=True)
    ev.add_argument("--annotations", action="append")
    ev.add_argument("--gold", action="append")
    ev.add_argument("--trace", action="append")
    ev.add_argument("--k", type=int, default=None)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_evaluate)

    al = sub.add_parser("align", help="silver salience labels from a summary trace")
    al.add_argument("--trace", action="append", required=True,
                    help="give twice: summary trace, then full-text trace")
    al.add_argument("--rho", type=float, default=0.10)
    al.add_argument("--mu", type=float, default=0.35)
    al.add_argument("--theta", type=float, default=0.05)
    al.add_argument("--max-matches", type=int, default=3)
    al.add_argument("--out", required=True)
    al.set_defaults(func=cmd_align)

    pl = sub.add_parser("plot", help="render series CSVs as SVG")
    pl.add_argument("pred", nargs="+")
    pl.add_argument("--gold", action="append")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)

    demo = sub.add_parser("demo", help="synthetic end-to-end pipeline")
    demo.add_argument("--seed", type=int, default=7)
    demo.add_argument("--out", required=True)
    demo.set_defaults(func=cmd_demo)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateStatisticsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
