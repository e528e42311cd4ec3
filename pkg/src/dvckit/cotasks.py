"""Multi-turn task-chain sample construction for dense video captioning.

An annotation is unrolled into a three-task conversation along one of two
reasoning paths: count -> timestamps -> captions (``t_then_c``) or
count -> captions -> timestamps (``c_then_t``). Auxiliary single-turn DVC,
grounding, and clip-captioning samples reuse the same quantized-token
rendering, so every ground-truth responder turn round-trips exactly through
the response grammar in :mod:`dvckit.core`.

Time boundaries are quantized to integer tokens 00-99 relative to the video
duration and rendered two-digit zero-padded.
"""

from __future__ import annotations

import random
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

from .core import (
    MAX_TIME_TOKEN,
    Conversation,
    Speaker,
    TaskKind,
    TimeInterval,
    Turn,
    VideoAnnotation,
    normalize_caption,
)


class PathKind(str, Enum):
    T_THEN_C = "t_then_c"
    C_THEN_T = "c_then_t"


SINGLE_TURN = "single_turn"
TVG = "tvg"
CLIP_CAPTION = "clip_caption"

# One fixed instruction per task; kept in one table so variants can be added.
PROMPTS = {
    "count": "How many of time segments can this video breakdown into?",
    "segments": "Can you breakdown the video into different time segments?",
    "captions_given_times": "Can you describe what happened in each time segment?",
    "captions": "Can you explain what happened in the video?",
    "times_given_captions": "What are the time segments for each event?",
    "single_turn": "Can you outline the incidents that occurred at various timestamps in the video?",
    "tvg": "During which frames can we see '{caption}' in the video?",
    "clip_caption": "Can you describe what occurred from {start} to {end} in the video?",
}


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------


def quantize_time(
    t: float,
    duration: float,
    max_token: int = MAX_TIME_TOKEN,
    *,
    strict: bool = False,
) -> int:
    """Map a second offset to an integer token 0..max_token, round half up."""
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if t < 0 or t > duration:
        if strict:
            raise ValueError(f"time {t} outside [0, {duration}]")
        t = min(max(t, 0.0), duration)
    token = int(max_token * t / duration + 0.5)
    return min(max(token, 0), max_token)


def format_token(token: int) -> str:
    return f"{token:02d}"


def token_to_seconds(token: float, duration: float, max_token: int = MAX_TIME_TOKEN) -> float:
    return token / max_token * duration


def quantize_interval(
    interval: TimeInterval, duration: float, max_token: int = MAX_TIME_TOKEN
) -> tuple[int, int]:
    return (
        quantize_time(interval.start, duration, max_token),
        quantize_time(interval.end, duration, max_token),
    )


def token_interval_to_seconds(
    interval: TimeInterval, duration: float, max_token: int = MAX_TIME_TOKEN
) -> TimeInterval:
    """Convert a parsed token-unit interval back to seconds."""
    return TimeInterval(
        token_to_seconds(interval.start, duration, max_token),
        token_to_seconds(interval.end, duration, max_token),
    )


# ---------------------------------------------------------------------------
# Response rendering
# ---------------------------------------------------------------------------


def _interval_clause(ann: VideoAnnotation, index: int, max_token: int) -> str:
    start, end = quantize_interval(ann.events[index].interval, ann.duration, max_token)
    return f"From {format_token(start)} to {format_token(end)}"


def render_count_response(ann: VideoAnnotation) -> str:
    return str(ann.event_count)


def render_timestamps_response(ann: VideoAnnotation, max_token: int = MAX_TIME_TOKEN) -> str:
    return " ".join(f"{_interval_clause(ann, i, max_token)}." for i in range(ann.event_count))


def render_captions_response(ann: VideoAnnotation) -> str:
    return " ".join(f"{normalize_caption(e.caption)}." for e in ann.events)


def render_interleaved_response(ann: VideoAnnotation, max_token: int = MAX_TIME_TOKEN) -> str:
    return " ".join(
        f"{_interval_clause(ann, i, max_token)}, {normalize_caption(ann.events[i].caption)}."
        for i in range(ann.event_count)
    )


# ---------------------------------------------------------------------------
# Sample construction
# ---------------------------------------------------------------------------


def _qa(prompt: str, response: str, task_kind: TaskKind) -> tuple[Turn, Turn]:
    return (
        Turn(Speaker.PROMPTER, prompt, task_kind),
        Turn(Speaker.RESPONDER, response, task_kind),
    )


def render_cotasks_sample(
    ann: VideoAnnotation,
    path: PathKind,
    max_token: int = MAX_TIME_TOKEN,
) -> Conversation:
    """Unroll an annotation into the three-task conversation for one path.

    Both paths share the opening count task. ``t_then_c`` then asks for the
    segment list and finally the captions given those times (interleaved
    answer); ``c_then_t`` asks for the captions first and closes with the
    segment list.
    """
    path = PathKind(path)
    turns = [*_qa(PROMPTS["count"], render_count_response(ann), TaskKind.COUNT)]
    if path is PathKind.T_THEN_C:
        turns += _qa(
            PROMPTS["segments"], render_timestamps_response(ann, max_token), TaskKind.TIMESTAMPS
        )
        turns += _qa(
            PROMPTS["captions_given_times"],
            render_interleaved_response(ann, max_token),
            TaskKind.CAPTIONS,
        )
    else:
        turns += _qa(PROMPTS["captions"], render_captions_response(ann), TaskKind.CAPTIONS)
        turns += _qa(
            PROMPTS["times_given_captions"],
            render_timestamps_response(ann, max_token),
            TaskKind.TIMESTAMPS,
        )
    return Conversation(ann.video_id, path.value, tuple(turns))


def render_auxiliary_sample(
    ann: VideoAnnotation,
    kind: str,
    event_index: int | None = None,
    max_token: int = MAX_TIME_TOKEN,
) -> Conversation:
    """One single-objective QA sample: full single-turn DVC, grounding of one
    event, or captioning of one clip."""
    if kind == SINGLE_TURN:
        turns = _qa(
            PROMPTS["single_turn"],
            render_interleaved_response(ann, max_token),
            TaskKind.INTERLEAVED_FULL,
        )
        return Conversation(ann.video_id, SINGLE_TURN, turns)
    if event_index is None or not 0 <= event_index < ann.event_count:
        raise IndexError(f"event index {event_index} out of range for {ann.video_id!r}")
    event = ann.events[event_index]
    if kind == TVG:
        prompt = PROMPTS["tvg"].format(caption=normalize_caption(event.caption))
        turns = _qa(prompt, f"{_interval_clause(ann, event_index, max_token)}.", TaskKind.TVG)
        return Conversation(ann.video_id, TVG, turns)
    if kind == CLIP_CAPTION:
        start, end = quantize_interval(event.interval, ann.duration, max_token)
        prompt = PROMPTS["clip_caption"].format(
            start=format_token(start), end=format_token(end)
        )
        turns = _qa(prompt, f"{normalize_caption(event.caption)}.", TaskKind.CLIP_CAPTION)
        return Conversation(ann.video_id, CLIP_CAPTION, turns)
    raise ValueError(f"unknown auxiliary sample kind: {kind!r}")


def inference_prompts(path: PathKind) -> tuple[str, str, str]:
    """The three prompts steering a model down one reasoning path; both paths
    open with the shared count question."""
    path = PathKind(path)
    if path is PathKind.T_THEN_C:
        return (PROMPTS["count"], PROMPTS["segments"], PROMPTS["captions_given_times"])
    return (PROMPTS["count"], PROMPTS["captions"], PROMPTS["times_given_captions"])


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

_PATH_ORDER = (PathKind.T_THEN_C, PathKind.C_THEN_T)


@dataclass(frozen=True)
class CtDatasetConfig:
    include_single_turn: bool = True
    include_tvg: bool = True
    include_clip_caption: bool = True
    paths: tuple[PathKind, ...] = _PATH_ORDER
    quantization_max: int = MAX_TIME_TOKEN
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "paths", tuple(p for p in _PATH_ORDER if p in {PathKind(x) for x in self.paths})
        )
        if not (
            self.paths
            or self.include_single_turn
            or self.include_tvg
            or self.include_clip_caption
        ):
            raise ValueError("at least one sample family must be enabled")
        if self.quantization_max < 1:
            raise ValueError("quantization_max must be >= 1")


@dataclass(frozen=True)
class CtBuildResult:
    conversations: tuple[Conversation, ...]
    family_counts: dict[str, int]


def build_ct_dataset(
    annotations: Sequence[VideoAnnotation],
    config: CtDatasetConfig = CtDatasetConfig(),
) -> CtBuildResult:
    """Emit every enabled sample family for every annotation.

    Per annotation: one conversation per enabled path, one single-turn sample,
    and one grounding plus one clip-captioning sample per event. The emission
    order (annotation, then family) is fixed, then shuffled deterministically
    by the config seed.
    """
    if not annotations:
        raise ValueError("annotation corpus is empty")
    conversations: list[Conversation] = []
    counts: dict[str, int] = {}

    def emit(conv: Conversation):
        conversations.append(conv)
        counts[conv.path] = counts.get(conv.path, 0) + 1

    max_token = config.quantization_max
    for ann in annotations:
        for path in config.paths:
            emit(render_cotasks_sample(ann, path, max_token))
        if config.include_single_turn:
            emit(render_auxiliary_sample(ann, SINGLE_TURN, max_token=max_token))
        if config.include_tvg:
            for i in range(ann.event_count):
                emit(render_auxiliary_sample(ann, TVG, i, max_token))
        if config.include_clip_caption:
            for i in range(ann.event_count):
                emit(render_auxiliary_sample(ann, CLIP_CAPTION, i, max_token))

    random.Random(config.seed).shuffle(conversations)
    return CtBuildResult(tuple(conversations), counts)
