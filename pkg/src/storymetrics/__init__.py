"""Per-sentence suspense, surprise, and salience curves for stories,
computed from serialized language-model traces, with evaluation against
human annotations, turning points, and summary-aligned silver labels."""

from .model import (AnnotationSet, ContinuationSample, ContinuationSet,
                    DegenerateStatisticsError, GoldLabels, Judgment,
                    MetricSeries, ParseError, SentenceRecord, StoryTrace,
                    ValidationError, read_annotations, read_gold, read_trace,
                    write_annotations, write_gold, write_trace)

__all__ = [
    "AnnotationSet", "ContinuationSample", "ContinuationSet",
    "DegenerateStatisticsError", "GoldLabels", "Judgment", "MetricSeries",
    "ParseError", "SentenceRecord", "StoryTrace", "ValidationError",
    "read_annotations", "read_gold", "read_trace",
    "write_annotations", "write_gold", "write_trace",
]

__version__ = "0.1.0"
