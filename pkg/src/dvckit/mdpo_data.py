"""Scores sampled sub-task responses against ground truth and forms
metric-ordered preference pairs, keeping only pairs whose score gap clears
the threshold gamma.

Scoring happens in quantized token space: the ground-truth target is either
parsed from the rendered ground-truth response or derived directly from an
annotation, so a verbatim ground-truth echo recovers the full score.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .core import (
    ParsedResponse,
    TaskKind,
    TimeInterval,
    Turn,
    VideoAnnotation,
    normalize_caption,
    parse_response_text,
)
from .cotasks import MAX_TIME_TOKEN, PathKind, quantize_interval
from .dvceval import Similarity, interval_iou, soda_from_parts
from .textsim import tokenize

DEFAULT_GAMMA = 10.0
DEFAULT_NUM_SAMPLES = 3
GAP_HISTOGRAM_BIN_WIDTH = 5.0


def task_kind_for(path: PathKind, k: int) -> TaskKind:
    """Sub-task identity of turn k (1-based task index) on the given path."""
    if k == 1:
        return TaskKind.COUNT
    if k not in (2, 3):
        raise ValueError(f"task index must be 1, 2 or 3, got {k}")
    if PathKind(path) is PathKind.T_THEN_C:
        return TaskKind.TIMESTAMPS if k == 2 else TaskKind.CAPTIONS
    return TaskKind.CAPTIONS if k == 2 else TaskKind.TIMESTAMPS


# ---------------------------------------------------------------------------
# Scoring targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreTarget:
    """Ground-truth structure a sampled response is scored against.

    Intervals are in quantized token units; captions are in canonical form.
    """

    task_kind: TaskKind
    count: int | None = None
    intervals: tuple[TimeInterval, ...] = ()
    captions: tuple[str, ...] = ()


def target_from_response(gt_response: str, task_kind: TaskKind) -> ScoreTarget:
    """Build a target by parsing a rendered ground-truth response."""
    parsed = parse_response_text(gt_response, task_kind)
    if parsed.unparseable:
        raise ValueError(f"ground-truth response does not parse: {gt_response!r}")
    return ScoreTarget(
        TaskKind(task_kind),
        count=parsed.count,
        intervals=parsed.intervals or (),
        captions=parsed.captions or (),
    )


def target_from_annotation(
    ann: VideoAnnotation,
    task_kind: TaskKind,
    max_token: int = MAX_TIME_TOKEN,
) -> ScoreTarget:
    """Build a target directly from an annotation, quantizing its intervals."""
    intervals = tuple(
        TimeInterval(*map(float, quantize_interval(e.interval, ann.duration, max_token)))
        for e in ann.events
    )
    captions = tuple(normalize_caption(e.caption) for e in ann.events)
    return ScoreTarget(TaskKind(task_kind), ann.event_count, intervals, captions)


# ---------------------------------------------------------------------------
# Response scoring
# ---------------------------------------------------------------------------


def _aligned_mean(values_per_index: list[float], gt_len: int) -> float:
    # missing indices score 0, surplus predictions are ignored
    return sum(values_per_index[:gt_len]) / gt_len


def score_response(
    raw: str,
    task_kind: TaskKind,
    target: ScoreTarget,
    similarity: Similarity,
) -> float:
    """Metric value of one raw response on the 0-100 scale.

    Count responses score all-or-nothing; timestamp responses average
    index-aligned IoU against the target intervals; caption responses average
    index-aligned similarity; the interleaved full response scores the
    alignment F1. Anything unparseable scores 0.
    """
    task_kind = TaskKind(task_kind)
    parsed = parse_response_text(raw, task_kind)
    if parsed.unparseable:
        return 0.0

    if task_kind is TaskKind.COUNT:
        return 100.0 if parsed.count == target.count else 0.0

    if task_kind in (TaskKind.TIMESTAMPS, TaskKind.TVG):
        got = parsed.intervals or ()
        ious = [
            interval_iou(got[i], target.intervals[i]) if i < len(got) else 0.0
            for i in range(len(target.intervals))
        ]
        return 100.0 * _aligned_mean(ious, len(target.intervals))

    if task_kind in (TaskKind.CAPTIONS, TaskKind.CLIP_CAPTION):
        got = parsed.captions or ()
        sims = [
            similarity(tokenize(got[i]), tokenize(target.captions[i])) if i < len(got) else 0.0
            for i in range(len(target.captions))
        ]
        return 100.0 * _aligned_mean(sims, len(target.captions))

    # interleaved full response: order-preserving alignment F1 in token space
    return soda_from_parts(
        list(target.intervals),
        [tokenize(c) for c in target.captions],
        list(parsed.intervals or ()),
        [tokenize(c) for c in parsed.captions or ()],
        similarity,
    ).f1


# ---------------------------------------------------------------------------
# Pair construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledTaskResponses:
    """The sampled responses for one sub-task of one video.

    ``history`` holds the ground-truth conversation prefix for tasks before
    ``k``; ``gt_response`` is the ground-truth answer the samples are scored
    against.
    """

    video_id: str
    path: PathKind
    k: int
    prompt: str
    gt_response: str
    responses: tuple[str, ...]
    history: tuple[Turn, ...] = ()

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"preference sampling starts at task 2, got k={self.k}")
        if len(self.responses) < 2:
            raise ValueError(f"need at least 2 sampled responses, got {len(self.responses)}")

    @property
    def task_kind(self) -> TaskKind:
        return task_kind_for(self.path, self.k)


@dataclass(frozen=True)
class PreferencePair:
    """An oriented response pair: the preferred side carries the higher
    metric value, and the gap m_w - m_l is strictly positive."""

    video_id: str
    path: PathKind
    k: int
    task_kind: TaskKind
    prompt: str
    preferred: str
    dispreferred: str
    preferred_parsed: ParsedResponse
    dispreferred_parsed: ParsedResponse
    m_w: float
    m_l: float
    history: tuple[Turn, ...] = ()

    def __post_init__(self):
        if not self.m_w > self.m_l:
            raise ValueError(f"preferred score {self.m_w} must exceed {self.m_l}")

    @property
    def gap(self) -> float:
        return self.m_w - self.m_l


def score_sample(
    sample: SampledTaskResponses,
    similarity: Similarity,
) -> list[float]:
    target = target_from_response(sample.gt_response, sample.task_kind)
    return [score_response(r, sample.task_kind, target, similarity) for r in sample.responses]


def build_preference_pairs(
    samples: Iterable[SampledTaskResponses],
    gamma: float,
    similarity: Similarity,
) -> list[PreferencePair]:
    """Score every response, enumerate all unordered pairs per sample, orient
    each by metric value, and keep pairs whose gap strictly exceeds gamma.

    Ties are dropped. Output order is deterministic: sample order, then
    response-index order.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    pairs = []
    for sample in samples:
        scores = score_sample(sample, similarity)
        kind = sample.task_kind
        for i in range(len(scores)):
            for j in range(i + 1, len(scores)):
                if scores[i] == scores[j]:
                    continue
                w, l = (i, j) if scores[i] > scores[j] else (j, i)
                if scores[w] - scores[l] <= gamma:
                    continue
                pairs.append(
                    PreferencePair(
                        video_id=sample.video_id,
                        path=PathKind(sample.path),
                        k=sample.k,
                        task_kind=kind,
                        prompt=sample.prompt,
                        preferred=sample.responses[w],
                        dispreferred=sample.responses[l],
                        preferred_parsed=parse_response_text(sample.responses[w], kind),
                        dispreferred_parsed=parse_response_text(sample.responses[l], kind),
                        m_w=scores[w],
                        m_l=scores[l],
                        history=sample.history,
                    )
                )
    return pairs


@dataclass(frozen=True)
class PairStats:
    retained_by_gamma: dict[float, int]
    gap_histogram: dict[float, int]  # bin lower bound -> count, width 5


def summarize_pair_stats(
    pairs: Sequence[PreferencePair],
    gamma_grid: Sequence[float],
) -> PairStats:
    """Retention counts per gamma (strict gate) plus a fixed-width gap histogram."""
    gaps = [p.gap for p in pairs]
    retained = {float(g): sum(1 for gap in gaps if gap > g) for g in gamma_grid}
    histogram: dict[float, int] = {}
    for gap in gaps:
        lo = min(math.floor(gap / GAP_HISTOGRAM_BIN_WIDTH), 19) * GAP_HISTOGRAM_BIN_WIDTH
        histogram[lo] = histogram.get(lo, 0) + 1
    return PairStats(retained, dict(sorted(histogram.items())))
