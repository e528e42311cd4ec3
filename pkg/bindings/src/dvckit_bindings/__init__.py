"""In-process wrapper around dvckit for ML training pipelines.

Every function returns plain records (dicts and lists) that match the
dvckit CLI's JSON output field for field, so values can be logged or
compared against CLI artifacts directly. No math lives here; everything
delegates to the dvckit package.

Documents are passed either as literal JSON/JSONL text or as file paths;
strings that start with ``{`` or ``[`` are treated as text, anything else
as a path. Errors surface as the underlying dvckit exceptions
(``dvckit.CorpusParseError`` for malformed documents, ``ValueError`` for
invalid values), carrying the native messages including byte offsets.
"""

from __future__ import annotations

import os
from collections.abc import Sequence
from pathlib import Path

from dvckit import cotasks, dvceval, formats, mdpo_data, mdpo_objective
from dvckit.core import parse_annotations, parse_predictions
from dvckit.textsim import MeteorParams

__all__ = [
    "evaluate_dvc",
    "evaluate_tvg",
    "build_cotasks",
    "build_pairs",
    "mdpo_loss",
]

__version__ = "0.1.0"


def _document(source) -> str:
    """Literal document text, reading it from disk when given a path."""
    if isinstance(source, os.PathLike):
        return Path(source).read_text(encoding="utf-8")
    if isinstance(source, str):
        if source.lstrip()[:1] in ("{", "["):
            return source
        return Path(source).read_text(encoding="utf-8")
    raise TypeError(f"expected document text or path, got {type(source).__name__}")


def _rows(source) -> list[dict]:
    """JSONL rows from text, a path, or an already-parsed list of dicts."""
    if isinstance(source, (list, tuple)):
        return list(source)
    return formats.load_jsonl(_document(source))


def _annotations(gt, strict: bool):
    sources = gt if isinstance(gt, (list, tuple)) else [gt]
    annotations = []
    for idx, source in enumerate(sources):
        annotations.extend(
            parse_annotations(_document(source), reference_set_id=str(idx), strict=strict)
        )
    return annotations


def _meteor_params(alpha, beta, gamma, stemming) -> MeteorParams:
    return MeteorParams(alpha=alpha, beta_frag=beta, gamma_frag=gamma, use_stemming=stemming)


def evaluate_dvc(
    gt,
    pred,
    *,
    taus: Sequence[float] = dvceval.DEFAULT_TAUS,
    recall_thresholds: Sequence[float] = dvceval.DEFAULT_RECALL_THRESHOLDS,
    meteor_alpha: float = 0.9,
    meteor_beta: float = 3.0,
    meteor_gamma: float = 0.5,
    meteor_stemming: bool = False,
    cider_max_n: int = 4,
    jobs: int = 1,
    strict: bool = False,
) -> dict:
    """Captioning scorecard for a prediction document against ground truth.

    ``gt`` may be a single document or a sequence of documents, one per
    reference set. Returns the same record the CLI writes as JSON.
    """
    config = dvceval.EvalConfig(
        taus=tuple(taus),
        recall_thresholds=tuple(recall_thresholds),
        meteor_params=_meteor_params(meteor_alpha, meteor_beta, meteor_gamma, meteor_stemming),
        cider_max_n=cider_max_n,
        jobs=jobs,
    )
    scorecard = dvceval.evaluate_dvc_corpus(
        _annotations(gt, strict),
        parse_predictions(_document(pred), strict=strict),
        config,
    )
    return formats.round_floats(scorecard)


def evaluate_tvg(
    gt,
    pred,
    *,
    thresholds: Sequence[float] = dvceval.DEFAULT_RECALL_THRESHOLDS,
    strict: bool = False,
) -> dict:
    """Grounding scorecard (recall@k, mIoU) with one prediction per query."""
    scorecard = dvceval.evaluate_tvg_corpus(
        _annotations(gt, strict),
        parse_predictions(_document(pred), strict=strict),
        tuple(thresholds),
    )
    return formats.round_floats(scorecard)


def build_cotasks(
    gt,
    *,
    paths: Sequence[str] = ("t_then_c", "c_then_t"),
    single_turn: bool = True,
    tvg: bool = True,
    clip_caption: bool = True,
    quantization_max: int = cotasks.MAX_TIME_TOKEN,
    seed: int = 0,
    strict: bool = False,
) -> list[dict]:
    """Multi-turn training conversations in the CLI's JSONL row layout."""
    config = cotasks.CtDatasetConfig(
        include_single_turn=single_turn,
        include_tvg=tvg,
        include_clip_caption=clip_caption,
        paths=tuple(cotasks.PathKind(p) for p in paths),
        quantization_max=quantization_max,
        seed=seed,
    )
    result = cotasks.build_ct_dataset(_annotations(gt, strict), config)
    return [
        formats.round_floats(formats.conversation_to_dict(c)) for c in result.conversations
    ]


def build_pairs(
    responses,
    *,
    gamma: float = mdpo_data.DEFAULT_GAMMA,
    num_samples: int | None = mdpo_data.DEFAULT_NUM_SAMPLES,
    gamma_grid: Sequence[float] = (0.0, 5.0, 10.0, 15.0),
    meteor_alpha: float = 0.9,
    meteor_beta: float = 3.0,
    meteor_gamma: float = 0.5,
    meteor_stemming: bool = False,
) -> dict:
    """Score sampled responses and gate preference pairs.

    Returns ``{"pairs": [...], "summary": {...}}`` mirroring the CLI's pairs
    JSONL rows and summary JSON.
    """
    samples = [
        formats.sampled_responses_from_dict(row, num_samples) for row in _rows(responses)
    ]
    similarity = dvceval.meteor_similarity(
        _meteor_params(meteor_alpha, meteor_beta, meteor_gamma, meteor_stemming)
    )
    all_pairs = mdpo_data.build_preference_pairs(samples, 0.0, similarity)
    kept = [p for p in all_pairs if p.gap > gamma]
    stats = mdpo_data.summarize_pair_stats(all_pairs, tuple(gamma_grid))
    return formats.round_floats(
        {
            "pairs": [formats.preference_pair_to_dict(p) for p in kept],
            "summary": {
                "gamma": gamma,
                "pairs_scored": len(all_pairs),
                "pairs_kept": len(kept),
                **formats.pair_stats_to_dict(stats),
            },
        }
    )


def mdpo_loss(
    pairs,
    *,
    mode: str = "mdpo",
    beta: float = mdpo_objective.DEFAULT_BETA,
    gamma: float = mdpo_objective.DEFAULT_GAMMA,
) -> dict:
    """Batch objective value and margin statistics for pair likelihoods."""
    batch = [formats.pair_likelihoods_from_dict(row) for row in _rows(pairs)]
    objective = (
        mdpo_objective.ObjectiveMode.mdpo(gamma)
        if mode == "mdpo"
        else mdpo_objective.ObjectiveMode(mode)
    )
    result = mdpo_objective.batch_loss(batch, objective, beta)
    return formats.round_floats(formats.loss_result_to_dict(result))
