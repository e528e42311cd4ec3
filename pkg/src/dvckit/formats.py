"""File formats: canonical JSON/JSONL/CSV serialization for every artifact
the toolkit reads or writes.

Floats are rounded to 6 decimal places before serialization so reruns on
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence

from .core import ParsedResponse, Speaker, TaskKind, Turn, Conversation
from .cotasks import PathKind
from .mdpo_data import PairStats, PreferencePair, SampledTaskResponses
from .mdpo_objective import LossBatchResult, PairLikelihoods
from .toylab import MarginCurve

FLOAT_DECIMALS = 6

_SPEAKER_TO_WIRE = {Speaker.PROMPTER: "human", Speaker.RESPONDER: "gpt"}
_WIRE_TO_SPEAKER = {v: k for k, v in _SPEAKER_TO_WIRE.items()}


def round_floats(value, decimals: int = FLOAT_DECIMALS):
    """Recursively round floats in a JSON-shaped structure."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return round(value, decimals)
    if isinstance(value, dict):
        return {k: round_floats(v, decimals) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, decimals) for v in value]
    return value


def dump_json(value) -> str:
    return json.dumps(round_floats(value), indent=2) + "\n"


def dump_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(round_floats(row)) + "\n" for row in rows)


def load_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# Conversations
# ---------------------------------------------------------------------------


def turn_to_dict(turn: Turn) -> dict:
    return {
        "from": _SPEAKER_TO_WIRE[turn.speaker],
        "value": turn.text,
        "task": turn.task_kind.value,
    }


def turn_from_dict(row: dict) -> Turn:
    return Turn(_WIRE_TO_SPEAKER[row["from"]], row["value"], TaskKind(row["task"]))


def conversation_to_dict(conv: Conversation) -> dict:
    return {
        "video_id": conv.video_id,
        "path": conv.path,
        "turns": [turn_to_dict(t) for t in conv.turns],
    }


def conversation_from_dict(row: dict) -> Conversation:
    return Conversation(
        row["video_id"], row["path"], tuple(turn_from_dict(t) for t in row["turns"])
    )


# ---------------------------------------------------------------------------
# Sampled responses and preference pairs
# ---------------------------------------------------------------------------


def sampled_responses_from_dict(row: dict, num_samples: int | None = None) -> SampledTaskResponses:
    """One sampled-responses record; ``num_samples`` caps how many responses
    are used (the first n). Records always need at least 2."""
    responses = list(row["responses"])
    if num_samples is not None:
        responses = responses[:num_samples]
    return SampledTaskResponses(
        video_id=row["video_id"],
        path=PathKind(row["path"]),
        k=int(row["k"]),
        prompt=row.get("prompt", ""),
        gt_response=row["gt"],
        responses=tuple(responses),
        history=tuple(turn_from_dict(t) for t in row.get("history", ())),
    )


def parsed_response_to_dict(parsed: ParsedResponse) -> dict:
    out: dict = {"task": parsed.task_kind.value}
    if parsed.count is not None:
        out["count"] = parsed.count
    if parsed.intervals is not None:
        out["intervals"] = [[iv.start, iv.end] for iv in parsed.intervals]
    if parsed.captions is not None:
        out["captions"] = list(parsed.captions)
    if parsed.unparseable:
        out["unparseable"] = True
    if parsed.flags:
        out["flags"] = list(parsed.flags)
    return out


def preference_pair_to_dict(pair: PreferencePair) -> dict:
    return {
        "video_id": pair.video_id,
        "path": pair.path.value,
        "k": pair.k,
        "task": pair.task_kind.value,
        "prompt": pair.prompt,
        "preferred": pair.preferred,
        "dispreferred": pair.dispreferred,
        "preferred_parsed": parsed_response_to_dict(pair.preferred_parsed),
        "dispreferred_parsed": parsed_response_to_dict(pair.dispreferred_parsed),
        "m_w": pair.m_w,
        "m_l": pair.m_l,
        "history": [turn_to_dict(t) for t in pair.history],
    }


def pair_stats_to_dict(stats: PairStats) -> dict:
    return {
        "retained_by_gamma": {f"{g:g}": n for g, n in sorted(stats.retained_by_gamma.items())},
        "gap_histogram": {f"{lo:g}": n for lo, n in stats.gap_histogram.items()},
    }


# ---------------------------------------------------------------------------
# Objective batches
# ---------------------------------------------------------------------------


def pair_likelihoods_from_dict(row: dict) -> PairLikelihoods:
    return PairLikelihoods(
        logp_theta_w=float(row["logp_theta_w"]),
        logp_theta_l=float(row["logp_theta_l"]),
        logp_ref_w=float(row["logp_ref_w"]),
        logp_ref_l=float(row["logp_ref_l"]),
        m_w=float(row["m_w"]),
        m_l=float(row["m_l"]),
    )


def loss_result_to_dict(result: LossBatchResult) -> dict:
    stats = result.margin_stats()
    return {
        "loss": result.loss,
        "active_count": result.active_count,
        "pair_count": len(result.per_pair_margin),
        "margin_mean": stats["mean"],
        "margin_min": stats["min"],
        "margin_max": stats["max"],
        "mode": result.mode,
    }


# ---------------------------------------------------------------------------
# Margin curves
# ---------------------------------------------------------------------------


def margin_curves_to_csv(curves: Sequence[MarginCurve]) -> str:
    lines = ["epoch,mode,mean_margin"]
    for curve in curves:
        for epoch, margin in enumerate(curve.mean_margins):
            lines.append(f"{epoch},{curve.mode},{margin:.6f}")
    return "\n".join(lines) + "\n"
