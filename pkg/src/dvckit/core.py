"""Domain model, corpus file parsing, and the response-text grammar.

Ground-truth documents are UTF-8 JSON of the form::

    { "<video_id>": { "duration": <seconds>,
                      "timestamps": [[s, e], ...],
                      "sentences": ["...", ...] } }

Prediction documents::

    { "<video_id>": [ { "timestamp": [s, e], "sentence": "..." }, ... ] }

Model answers for the individual sub-tasks are free text; a fixed,
case-insensitive grammar recovers structure from them:

* count: the whole string is an integer (optional trailing period), or the
  first integer appearing in the text;
* interval: ``From DD to DD`` with decimal-digit tokens, clamped to the
  0-99 quantized range;
* captions: sentences split on ``". "`` after interval clauses are removed.

All values are immutable after construction and safe to share across
threads or worker processes.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum

from .textsim import tokenize

MAX_TIME_TOKEN = 99

LENIENT = "lenient"
STRICT = "strict"


class CorpusParseError(ValueError):
    """A ground-truth or prediction document failed to parse.

    ``offset`` is the byte offset of the syntax error when the document is
    not valid JSON; ``video_id`` names the offending video for semantic
    errors.
    """

    def __init__(self, message, *, offset=None, video_id=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if video_id is not None:
            message = f"{message} (video {video_id!r})"
        super().__init__(message)
        self.offset = offset
        self.video_id = video_id


class ResponseGrammarError(ValueError):
    """Strict-mode failure while parsing a model response."""


class TaskKind(str, Enum):
    """Sub-task identity of a prompt/response turn."""

    COUNT = "count"
    TIMESTAMPS = "timestamps"
    CAPTIONS = "captions"
    INTERLEAVED_FULL = "interleaved_full"
    TVG = "tvg"
    CLIP_CAPTION = "clip_caption"


class Speaker(str, Enum):
    PROMPTER = "prompter"
    RESPONDER = "responder"


@dataclass(frozen=True)
class TimeInterval:
    """A ``[start, end]`` span in seconds (or quantized 0-99 token units)."""

    start: float
    end: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError(f"interval endpoints must be finite: ({self.start}, {self.end})")
        if self.start < 0 or self.end < 0:
            raise ValueError(f"interval endpoints must be non-negative: ({self.start}, {self.end})")
        if self.start > self.end:
            raise ValueError(f"interval start exceeds end: ({self.start}, {self.end})")

    @property
    def length(self) -> float:
        return self.end - self.start

    def clamped(self, lo: float, hi: float) -> "TimeInterval":
        return TimeInterval(min(max(self.start, lo), hi), min(max(self.end, lo), hi))


def normalize_caption(text: str) -> str:
    """Canonical caption form: collapsed whitespace, no trailing sentence periods."""
    collapsed = " ".join(text.split())
    return collapsed.rstrip(".").rstrip()


@dataclass(frozen=True)
class Event:
    """A caption with its time interval."""

    interval: TimeInterval
    caption: str

    def __post_init__(self):
        if not self.caption.strip() or not tokenize(self.caption):
            raise ValueError("event caption must contain at least one token")


@dataclass(frozen=True)
class VideoAnnotation:
    """Reference events for one video under one reference set."""

    video_id: str
    duration: float
    events: tuple[Event, ...]
    reference_set_id: str = "0"

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"duration must be positive and finite: {self.duration}")
        if not self.events:
            raise ValueError(f"annotation for {self.video_id!r} has no events")
        for event in self.events:
            if event.interval.end > self.duration or event.interval.start < 0:
                raise ValueError(
                    f"event interval ({event.interval.start}, {event.interval.end}) "
                    f"outside [0, {self.duration}] for video {self.video_id!r}"
                )

    @property
    def event_count(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class PredictionSet:
    """Predicted events keyed by video id; missing videos mean empty predictions."""

    events_by_video: dict[str, tuple[Event, ...]]

    def events_for(self, video_id: str) -> tuple[Event, ...]:
        return self.events_by_video.get(video_id, ())

    @property
    def video_count(self) -> int:
        return len(self.events_by_video)


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str
    task_kind: TaskKind


@dataclass(frozen=True)
class Conversation:
    """An alternating prompter/responder exchange for one video.

    ``path`` is one of ``t_then_c``, ``c_then_t``, ``single_turn``,
    ``tvg``, ``clip_caption``.
    """

    video_id: str
    path: str
    turns: tuple[Turn, ...]

    def __post_init__(self):
        if not self.turns:
            raise ValueError("conversation has no turns")
        if self.turns[0].speaker is not Speaker.PROMPTER:
            raise ValueError("first turn must be a prompter turn")
        for prev, cur in zip(self.turns, self.turns[1:]):
            if prev.speaker is cur.speaker:
                raise ValueError("turns must alternate prompter/responder")

    def responder_turns(self) -> tuple[Turn, ...]:
        return tuple(t for t in self.turns if t.speaker is Speaker.RESPONDER)


@dataclass(frozen=True)
class ParsedResponse:
    """Structure extracted from one model response.

    Which fields are populated depends on ``task_kind``: a count task fills
    ``count``, timestamp-like tasks fill ``intervals`` (in quantized token
    units), caption-like tasks fill ``captions``, and the interleaved full
    task fills both ``intervals`` and ``captions`` at equal lengths.
    An unparseable response has all three unset and scores 0 downstream.
    """

    task_kind: TaskKind
    count: int | None = None
    intervals: tuple[TimeInterval, ...] | None = None
    captions: tuple[str, ...] | None = None
    unparseable: bool = False
    flags: tuple[str, ...] = field(default=())


# ---------------------------------------------------------------------------
# Corpus document parsing
# ---------------------------------------------------------------------------


def _load_json_mapping(document: str) -> dict:
    def reject_duplicates(pairs):
        seen = {}
        for key, value in pairs:
            if key in seen:
                raise CorpusParseError("duplicate video_id", video_id=key)
            seen[key] = value
        return seen

    try:
        data = json.loads(document, object_pairs_hook=reject_duplicates)
    except json.JSONDecodeError as exc:
        byte_offset = len(document[: exc.pos].encode("utf-8"))
        raise CorpusParseError(f"invalid JSON: {exc.msg}", offset=byte_offset) from exc
    if not isinstance(data, dict):
        raise CorpusParseError("document root must be a JSON object")
    return data


def _as_number(value, what: str, video_id: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CorpusParseError(f"{what} must be a number, got {value!r}", video_id=video_id)
    return float(value)


def _interval_from_pair(pair, video_id: str, duration: float | None, strict: bool) -> TimeInterval:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise CorpusParseError(f"timestamp must be a [start, end] pair, got {pair!r}", video_id=video_id)
    start = _as_number(pair[0], "timestamp start", video_id)
    end = _as_number(pair[1], "timestamp end", video_id)
    if start > end:
        if strict:
            raise CorpusParseError(f"timestamp start {start} exceeds end {end}", video_id=video_id)
        start, end = end, start
    if duration is not None:
        if strict and (start < 0 or end > duration):
            raise CorpusParseError(
                f"timestamp ({start}, {end}) outside [0, {duration}]", video_id=video_id
            )
        start = min(max(start, 0.0), duration)
        end = min(max(end, 0.0), duration)
    else:
        if strict and start < 0:
            raise CorpusParseError(f"negative timestamp ({start}, {end})", video_id=video_id)
        start = max(start, 0.0)
        end = max(end, 0.0)
    return TimeInterval(start, end)


def parse_annotations(
    document: str,
    *,
    reference_set_id: str = "0",
    strict: bool = False,
) -> list[VideoAnnotation]:
    """Parse a ground-truth document into one annotation per video.

    Args:
        document: UTF-8 JSON text in the ground-truth schema.
        reference_set_id: label attached to every returned annotation; parse
            each reference-set file of a multi-reference corpus with its own id.
        strict: raise on swapped or out-of-range timestamps instead of
            silently repairing them.

    Returns:
        Annotations in document order, event order preserved as given.

    Raises:
        CorpusParseError: malformed JSON (with byte offset), duration <= 0,
            mismatched timestamp/sentence lists, or invariant violations in
            strict mode.
    """
    data = _load_json_mapping(document)
    annotations = []
    for video_id, entry in data.items():
        if not isinstance(entry, dict):
            raise CorpusParseError("video entry must be an object", video_id=video_id)
        try:
            duration = _as_number(entry["duration"], "duration", video_id)
            timestamps = entry["timestamps"]
            sentences = entry["sentences"]
        except KeyError as exc:
            raise CorpusParseError(f"missing field {exc.args[0]!r}", video_id=video_id) from exc
        if duration <= 0 or not math.isfinite(duration):
            raise CorpusParseError(f"duration must be > 0, got {duration}", video_id=video_id)
        if not isinstance(timestamps, list) or not isinstance(sentences, list):
            raise CorpusParseError("timestamps and sentences must be lists", video_id=video_id)
        if len(timestamps) != len(sentences):
            raise CorpusParseError(
                f"{len(timestamps)} timestamps but {len(sentences)} sentences", video_id=video_id
            )
        if not timestamps:
            raise CorpusParseError("annotation has no events", video_id=video_id)
        events = []
        for pair, sentence in zip(timestamps, sentences):
            interval = _interval_from_pair(pair, video_id, duration, strict)
            if not isinstance(sentence, str) or not tokenize(sentence):
                raise CorpusParseError(f"empty or non-text sentence {sentence!r}", video_id=video_id)
            events.append(Event(interval, sentence))
        annotations.append(
            VideoAnnotation(video_id, duration, tuple(events), reference_set_id)
        )
    return annotations


def parse_predictions(document: str, *, strict: bool = False) -> PredictionSet:
    """Parse a prediction document.

    Videos absent from the document are treated as empty prediction lists by
    downstream evaluators; a present video with an empty list stays empty.
    In lenient mode prediction events whose sentence carries no tokens are
    dropped; strict mode rejects them.
    """
    data = _load_json_mapping(document)
    events_by_video: dict[str, tuple[Event, ...]] = {}
    for video_id, entries in data.items():
        if not isinstance(entries, list):
            raise CorpusParseError("prediction entry must be a list", video_id=video_id)
        events = []
        for item in entries:
            if not isinstance(item, dict) or "timestamp" not in item or "sentence" not in item:
                raise CorpusParseError(
                    f"prediction item must have timestamp and sentence: {item!r}",
                    video_id=video_id,
                )
            interval = _interval_from_pair(item["timestamp"], video_id, None, strict)
            sentence = item["sentence"]
            if not isinstance(sentence, str):
                raise CorpusParseError(f"sentence must be text, got {sentence!r}", video_id=video_id)
            if not tokenize(sentence):
                if strict:
                    raise CorpusParseError("prediction sentence has no tokens", video_id=video_id)
                continue
            events.append(Event(interval, sentence))
        events_by_video[video_id] = tuple(events)
    return PredictionSet(events_by_video)


# ---------------------------------------------------------------------------
# Response-text grammar
# ---------------------------------------------------------------------------

_COUNT_RE = re.compile(r"^\s*(\d+)\s*\.?\s*$")
_INT_RE = re.compile(r"\d+")
_INTERVAL_RE = re.compile(r"\bfrom\s+(\d+)\s+to\s+(\d+)\b", re.IGNORECASE)


def _clean_caption_fragment(fragment: str) -> str:
    return normalize_caption(fragment.strip().lstrip(",").strip())


def _token_interval(a: int, b: int, flags: set[str], strict: bool) -> TimeInterval:
    if a > MAX_TIME_TOKEN or b > MAX_TIME_TOKEN:
        if strict:
            raise ResponseGrammarError(f"interval token outside 0-{MAX_TIME_TOKEN}: ({a}, {b})")
        a, b = min(a, MAX_TIME_TOKEN), min(b, MAX_TIME_TOKEN)
        flags.add("clamped")
    if a > b:
        if strict:
            raise ResponseGrammarError(f"interval start token {a} exceeds end token {b}")
        a, b = b, a
        flags.add("swapped")
    return TimeInterval(float(a), float(b))


def _unparseable(task_kind: TaskKind) -> ParsedResponse:
    return ParsedResponse(task_kind, unparseable=True, flags=("unparseable",))


def parse_response_text(text: str, task_kind: TaskKind, *, strict: bool = False) -> ParsedResponse:
    """Extract structure from a raw model response via the fixed grammar.

    Never raises in lenient mode: a response that matches nothing comes back
    flagged ``unparseable`` and scores 0 downstream.
    """
    task_kind = TaskKind(task_kind)
    flags: set[str] = set()

    if task_kind is TaskKind.COUNT:
        match = _COUNT_RE.match(text)
        if match is None:
            match = _INT_RE.search(text)
        if match is None:
            return _unparseable(task_kind)
        return ParsedResponse(task_kind, count=int(match.group(1) if match.lastindex else match.group(0)))

    if task_kind in (TaskKind.TIMESTAMPS, TaskKind.TVG):
        hits = list(_INTERVAL_RE.finditer(text))
        if not hits:
            return _unparseable(task_kind)
        intervals = tuple(
            _token_interval(int(m.group(1)), int(m.group(2)), flags, strict) for m in hits
        )
        return ParsedResponse(task_kind, intervals=intervals, flags=tuple(sorted(flags)))

    if task_kind in (TaskKind.CAPTIONS, TaskKind.CLIP_CAPTION):
        remainder = _INTERVAL_RE.sub("", text)
        captions = tuple(
            cleaned
            for part in remainder.split(". ")
            if (cleaned := _clean_caption_fragment(part))
        )
        if not captions:
            return _unparseable(task_kind)
        return ParsedResponse(task_kind, captions=captions)

    if task_kind is TaskKind.INTERLEAVED_FULL:
        hits = list(_INTERVAL_RE.finditer(text))
        if not hits:
            return _unparseable(task_kind)
        intervals = []
        captions = []
        for idx, m in enumerate(hits):
            intervals.append(_token_interval(int(m.group(1)), int(m.group(2)), flags, strict))
            tail_end = hits[idx + 1].start() if idx + 1 < len(hits) else len(text)
            captions.append(_clean_caption_fragment(text[m.end() : tail_end]))
        return ParsedResponse(
            task_kind,
            intervals=tuple(intervals),
            captions=tuple(captions),
            flags=tuple(sorted(flags)),
        )

    raise ValueError(f"unhandled task kind: {task_kind}")
