"""Video-level metrics: temporal IoU, tIoU-gated captioning scores, the
order-preserving alignment F1, grounding recall/mIoU, and segment-count
diagnostics, plus the corpus evaluator that aggregates them.

Per-video scoring is pure and independent; the corpus evaluator may fan the
videos out to a worker pool and reduces in sorted video order so results are
bit-identical for any worker count.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Event, PredictionSet, TimeInterval, VideoAnnotation
from .textsim import (
    DEFAULT_METEOR,
    DocFreqTable,
    MeteorParams,
    build_document_frequencies,
    cider_score,
    meteor_score,
    tokenize,
)

DEFAULT_TAUS = (0.3, 0.5, 0.7)
DEFAULT_RECALL_THRESHOLDS = (0.3, 0.5, 0.7)
KL_EPSILON = 1e-9

Similarity = Callable[[Sequence[str], Sequence[str]], float]


def meteor_similarity(params: MeteorParams = DEFAULT_METEOR) -> Similarity:
    return lambda candidate, reference: meteor_score(candidate, reference, params)


def cider_similarity(df: DocFreqTable) -> Similarity:
    return lambda candidate, reference: cider_score(candidate, reference, df)


# ---------------------------------------------------------------------------
# Interval and alignment primitives
# ---------------------------------------------------------------------------


def interval_iou(a: TimeInterval, b: TimeInterval) -> float:
    """Intersection over union of two intervals.

    Zero-length corner cases: identical point intervals score 1, anything
    else with a zero-length union scores 0.
    """
    inter = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    if union <= 0.0:
        return 1.0 if (a.start, a.end) == (b.start, b.end) else 0.0
    return inter / union


@dataclass(frozen=True)
class SodaResult:
    """Similarity-weighted precision/recall/F1 (0-100 scale) and the
    order-preserving alignment that produced them."""

    precision: float
    recall: float
    f1: float
    alignment: tuple[tuple[int, int], ...] = ()


def soda_alignment(phi) -> tuple[float, tuple[tuple[int, int], ...]]:
    """Maximize the sum of phi over order-preserving partial assignments.

    Args:
        phi: |C*| x |C| matrix of non-negative match values.

    Returns:
        (total, alignment) where alignment is strictly increasing in both
        coordinates. Ties are broken deterministically: diagonal move first,
        then the gt-skip move, then the prediction-skip move.
    """
    mat = np.asarray(phi, dtype=float)
    if mat.size == 0:
        return 0.0, ()
    if mat.ndim != 2:
        raise ValueError(f"phi must be a 2-d matrix, got {mat.ndim} dimensions")
    if (mat < 0).any():
        raise ValueError("phi entries must be non-negative")
    n, m = mat.shape
    dp = np.zeros((n + 1, m + 1))
    # 1 = diagonal (match), 2 = skip gt row, 3 = skip prediction column
    move = np.zeros((n + 1, m + 1), dtype=np.uint8)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag = dp[i - 1, j - 1] + mat[i - 1, j - 1]
            up = dp[i - 1, j]
            left = dp[i, j - 1]
            if diag >= up and diag >= left:
                dp[i, j] = diag
                move[i, j] = 1
            elif up >= left:
                dp[i, j] = up
                move[i, j] = 2
            else:
                dp[i, j] = left
                move[i, j] = 3
    pairs = []
    i, j = n, m
    while i > 0 and j > 0:
        step = move[i, j]
        if step == 1:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif step == 2:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return float(dp[n, m]), tuple(pairs)


def soda_from_parts(
    gt_intervals: Sequence[TimeInterval],
    gt_token_lists: Sequence[Sequence[str]],
    pred_intervals: Sequence[TimeInterval],
    pred_token_lists: Sequence[Sequence[str]],
    similarity: Similarity,
) -> SodaResult:
    """Alignment F1 on pre-tokenized events; the workhorse behind soda_c."""
    n_gt = len(gt_intervals)
    n_pred = len(pred_intervals)
    if n_pred == 0:
        return SodaResult(0.0, 0.0, 0.0, ())
    phi = [
        [
            interval_iou(gt_intervals[i], pred_intervals[j])
            * similarity(pred_token_lists[j], gt_token_lists[i])
            for j in range(n_pred)
        ]
        for i in range(n_gt)
    ]
    total, alignment = soda_alignment(phi)
    precision = 100.0 * total / n_pred
    recall = 100.0 * total / n_gt
    f1 = _harmonic(precision, recall)
    return SodaResult(precision, recall, f1, alignment)


def soda_c(
    gt: VideoAnnotation,
    pred_events: Sequence[Event],
    similarity: Similarity,
) -> SodaResult:
    """Story-level F1 for one video against one reference set.

    The match matrix couples temporal overlap with caption similarity
    (phi = IoU * similarity); the optimal order-preserving assignment's total
    yields precision over |C| and recall over |C*|.
    """
    return soda_from_parts(
        [e.interval for e in gt.events],
        [tokenize(e.caption) for e in gt.events],
        [e.interval for e in pred_events],
        [tokenize(e.caption) for e in pred_events],
        similarity,
    )


def _harmonic(precision: float, recall: float) -> float:
    if precision <= 0.0 or recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# tIoU-gated captioning metric
# ---------------------------------------------------------------------------


def dvc_tiou_metric(
    gt: VideoAnnotation,
    pred_events: Sequence[Event],
    similarity: Similarity,
    taus: Sequence[float] = DEFAULT_TAUS,
) -> tuple[dict[float, float], float]:
    """Average pairwise caption similarity over tIoU-qualifying pairs.

    For each threshold tau, a predicted event qualifies against a reference
    event when their intervals reach IoU >= tau; the per-tau score is the sum
    of similarities over all qualifying pairs divided by the number of such
    pairs (0 when none qualify).

    Returns:
        (per_tau, mean) both on the 0-100 scale.
    """
    if not taus:
        raise ValueError("taus must be non-empty")
    gt_tokens = [tokenize(e.caption) for e in gt.events]
    pred_tokens = [tokenize(e.caption) for e in pred_events]
    ious = [
        [interval_iou(ge.interval, pe.interval) for pe in pred_events] for ge in gt.events
    ]
    sims: dict[tuple[int, int], float] = {}
    per_tau = {}
    for tau in taus:
        total = 0.0
        pairs = 0
        for i in range(len(gt.events)):
            for j in range(len(pred_events)):
                if ious[i][j] >= tau:
                    if (i, j) not in sims:
                        sims[(i, j)] = similarity(pred_tokens[j], gt_tokens[i])
                    total += sims[(i, j)]
                    pairs += 1
        per_tau[tau] = 100.0 * total / pairs if pairs else 0.0
    mean = sum(per_tau.values()) / len(per_tau)
    return per_tau, mean


# ---------------------------------------------------------------------------
# Grounding metrics
# ---------------------------------------------------------------------------


def recall_at_k(
    gt_intervals: Sequence[TimeInterval],
    pred_intervals: Sequence[TimeInterval],
    k: float,
) -> float:
    """Fraction of index-aligned query pairs reaching IoU >= k."""
    if len(gt_intervals) != len(pred_intervals):
        raise ValueError(
            f"{len(gt_intervals)} ground-truth vs {len(pred_intervals)} predicted intervals"
        )
    if not gt_intervals:
        raise ValueError("recall@k needs at least one query")
    hits = sum(1 for g, p in zip(gt_intervals, pred_intervals) if interval_iou(g, p) >= k)
    return hits / len(gt_intervals)


def mean_iou(
    gt_intervals: Sequence[TimeInterval],
    pred_intervals: Sequence[TimeInterval],
) -> float:
    """100 x mean pairwise IoU over index-aligned queries."""
    if len(gt_intervals) != len(pred_intervals):
        raise ValueError(
            f"{len(gt_intervals)} ground-truth vs {len(pred_intervals)} predicted intervals"
        )
    if not gt_intervals:
        raise ValueError("mean IoU needs at least one query")
    return 100.0 * sum(
        interval_iou(g, p) for g, p in zip(gt_intervals, pred_intervals)
    ) / len(gt_intervals)


# ---------------------------------------------------------------------------
# Segment-count diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountDiagnostics:
    accuracy: float
    kl: float
    gt_variance: float


def count_diagnostics(
    pred_counts: Mapping[str, int],
    gt_counts: Mapping[str, int],
) -> CountDiagnostics:
    """Exact-match accuracy and KL(gt || pred) of segment-count histograms.

    The histograms live on the union of observed counts. Zero predicted bins
    are floored at 1e-9 so the divergence stays finite; ground-truth zeros
    annihilate their terms by the 0 * log(0/q) = 0 convention, which keeps
    KL exactly 0 for identical count multisets.
    """
    if not gt_counts:
        raise ValueError("count diagnostics need at least one video")
    if set(pred_counts) != set(gt_counts):
        raise ValueError("prediction and ground-truth video sets differ")
    videos = sorted(gt_counts)
    matches = sum(1 for v in videos if pred_counts[v] == gt_counts[v])
    accuracy = matches / len(videos)

    support = sorted(set(gt_counts.values()) | set(pred_counts.values()))
    n = len(videos)
    gt_hist = {c: 0 for c in support}
    pred_hist = {c: 0 for c in support}
    for v in videos:
        gt_hist[gt_counts[v]] += 1
        pred_hist[pred_counts[v]] += 1
    kl = 0.0
    for c in support:
        p = gt_hist[c] / n
        if p == 0.0:
            continue
        q = pred_hist[c] / n
        q = q if q > 0.0 else KL_EPSILON
        kl += p * math.log(p / q)

    mean = sum(gt_counts.values()) / n
    variance = sum((gt_counts[v] - mean) ** 2 for v in videos) / n
    return CountDiagnostics(accuracy, kl, variance)


# ---------------------------------------------------------------------------
# Corpus evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    taus: tuple[float, ...] = DEFAULT_TAUS
    recall_thresholds: tuple[float, ...] = DEFAULT_RECALL_THRESHOLDS
    meteor_params: MeteorParams = field(default_factory=MeteorParams)
    cider_max_n: int = 4
    jobs: int = 1

    def __post_init__(self):
        if not self.taus or any(not 0.0 < t <= 1.0 for t in self.taus):
            raise ValueError(f"taus must be within (0, 1], got {self.taus}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass(frozen=True)
class _VideoScore:
    soda_precision: float
    soda_recall: float
    soda_f1: float
    meteor_per_tau: tuple[float, ...]
    cider_per_tau: tuple[float, ...]
    recall_hits: tuple[int, ...]
    iou_sum: float
    query_count: int
    gt_count: int
    pred_count: int


def _group_by_video(
    annotations: Iterable[VideoAnnotation],
) -> dict[str, list[VideoAnnotation]]:
    grouped: dict[str, list[VideoAnnotation]] = {}
    for ann in annotations:
        grouped.setdefault(ann.video_id, []).append(ann)
    return grouped


def _aligned_ious(gt: VideoAnnotation, pred_events: Sequence[Event]) -> list[float]:
    # one query per reference event; missing predictions count as IoU 0,
    # surplus predictions are ignored
    return [
        interval_iou(gt.events[i].interval, pred_events[i].interval)
        if i < len(pred_events)
        else 0.0
        for i in range(len(gt.events))
    ]


def _score_video(
    refs: Sequence[VideoAnnotation],
    pred_events: Sequence[Event],
    meteor_sim: Similarity,
    cider_sim: Similarity,
    config: EvalConfig,
) -> _VideoScore:
    soda_parts = []
    meteor_parts = []
    cider_parts = []
    recall_hits = [0] * len(config.recall_thresholds)
    iou_sum = 0.0
    query_count = 0
    for ref in refs:
        soda_parts.append(soda_c(ref, pred_events, meteor_sim))
        m_tau, _ = dvc_tiou_metric(ref, pred_events, meteor_sim, config.taus)
        c_tau, _ = dvc_tiou_metric(ref, pred_events, cider_sim, config.taus)
        meteor_parts.append([m_tau[t] for t in config.taus])
        cider_parts.append([c_tau[t] for t in config.taus])
        ious = _aligned_ious(ref, pred_events)
        for idx, threshold in enumerate(config.recall_thresholds):
            recall_hits[idx] += sum(1 for x in ious if x >= threshold)
        iou_sum += sum(ious)
        query_count += len(ious)
    n_refs = len(refs)
    return _VideoScore(
        soda_precision=sum(s.precision for s in soda_parts) / n_refs,
        soda_recall=sum(s.recall for s in soda_parts) / n_refs,
        soda_f1=sum(s.f1 for s in soda_parts) / n_refs,
        meteor_per_tau=tuple(
            sum(part[i] for part in meteor_parts) / n_refs for i in range(len(config.taus))
        ),
        cider_per_tau=tuple(
            sum(part[i] for part in cider_parts) / n_refs for i in range(len(config.taus))
        ),
        recall_hits=tuple(recall_hits),
        iou_sum=iou_sum,
        query_count=query_count,
        gt_count=refs[0].event_count,
        pred_count=len(pred_events),
    )


def evaluate_dvc_corpus(
    annotations: Sequence[VideoAnnotation],
    predictions: PredictionSet,
    config: EvalConfig = EvalConfig(),
) -> dict:
    """Score a prediction set against a reference corpus.

    Per-video scores average over that video's reference sets; corpus scores
    average over videos (grounding metrics pool over all queries). The video
    set is fixed by the ground truth: videos without predictions score with
    empty event lists.

    Returns:
        Scorecard dict matching the CLI's JSON layout.
    """
    if not annotations:
        raise ValueError("annotation corpus is empty")
    grouped = _group_by_video(annotations)
    video_ids = sorted(grouped)

    meteor_sim = meteor_similarity(config.meteor_params)
    df = build_document_frequencies(
        [tokenize(e.caption) for ann in annotations for e in ann.events],
        config.cider_max_n,
    )
    cider_sim = cider_similarity(df)

    def worker(video_id: str) -> _VideoScore:
        return _score_video(
            grouped[video_id], predictions.events_for(video_id), meteor_sim, cider_sim, config
        )

    if config.jobs == 1:
        scores = [worker(v) for v in video_ids]
    else:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            scores = list(pool.map(worker, video_ids))

    n = len(scores)
    per_tau = {}
    for idx, tau in enumerate(config.taus):
        per_tau[tau] = {
            "meteor": sum(s.meteor_per_tau[idx] for s in scores) / n,
            "cider": sum(s.cider_per_tau[idx] for s in scores) / n,
        }
    total_queries = sum(s.query_count for s in scores)
    recall = {
        threshold: sum(s.recall_hits[idx] for s in scores) / total_queries
        for idx, threshold in enumerate(config.recall_thresholds)
    }
    diagnostics = count_diagnostics(
        {v: s.pred_count for v, s in zip(video_ids, scores)},
        {v: s.gt_count for v, s in zip(video_ids, scores)},
    )
    return {
        "soda_c": {
            "precision": sum(s.soda_precision for s in scores) / n,
            "recall": sum(s.soda_recall for s in scores) / n,
            "f1": sum(s.soda_f1 for s in scores) / n,
        },
        "meteor": sum(v["meteor"] for v in per_tau.values()) / len(per_tau),
        "cider": sum(v["cider"] for v in per_tau.values()) / len(per_tau),
        "per_tau": {f"{tau:g}": dict(v) for tau, v in per_tau.items()},
        "tvg": {
            **{f"r@{t:g}": recall[t] for t in config.recall_thresholds},
            "miou": 100.0 * sum(s.iou_sum for s in scores) / total_queries,
        },
        "count": {
            "accuracy": diagnostics.accuracy,
            "kl": diagnostics.kl,
            "gt_variance": diagnostics.gt_variance,
        },
        "video_count": n,
        "config": {
            "taus": list(config.taus),
            "recall_thresholds": list(config.recall_thresholds),
            "meteor_alpha": config.meteor_params.alpha,
            "meteor_beta": config.meteor_params.beta_frag,
            "meteor_gamma": config.meteor_params.gamma_frag,
            "meteor_stemming": config.meteor_params.use_stemming,
            "cider_max_n": config.cider_max_n,
            "multi_reference": "mean over reference sets per video",
        },
    }


def evaluate_tvg_corpus(
    annotations: Sequence[VideoAnnotation],
    predictions: PredictionSet,
    thresholds: Sequence[float] = DEFAULT_RECALL_THRESHOLDS,
) -> dict:
    """Grounding scorecard: one prediction per reference query, index-aligned.

    Every video must carry exactly as many predicted intervals as reference
    events; queries pool across the whole corpus.
    """
    if not annotations:
        raise ValueError("annotation corpus is empty")
    gt_intervals = []
    pred_intervals = []
    for ann in sorted(annotations, key=lambda a: (a.video_id, a.reference_set_id)):
        events = predictions.events_for(ann.video_id)
        if len(events) != ann.event_count:
            raise ValueError(
                f"video {ann.video_id!r} has {ann.event_count} queries "
                f"but {len(events)} predictions"
            )
        gt_intervals.extend(e.interval for e in ann.events)
        pred_intervals.extend(e.interval for e in events)
    return {
        "recall_at": {
            f"{k:g}": recall_at_k(gt_intervals, pred_intervals, k) for k in thresholds
        },
        "miou": mean_iou(gt_intervals, pred_intervals),
        "query_count": len(gt_intervals),
    }
