"""Desk-scale margin-dynamics experiment.

A tabular position/vocabulary policy stands in for the language model: the
log-likelihood of a response is the sum of per-position log-softmax terms.
Preference pairs are synthesized end-to-end by rendering a small synthetic
corpus through the task-chain templates, corrupting responses with scripted
interval shifts and caption rewrites so metric gaps span 0-100, and scoring
them with the standard pair builder.

Training runs plain full-batch gradient descent on the batch objective, one
policy per objective mode, all starting from the same frozen reference.
The per-epoch mean margin is recorded over every pair regardless of which
subset a mode trains on, so the resulting curves are directly comparable.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .core import Event, TimeInterval, VideoAnnotation
from .cotasks import (
    PathKind,
    inference_prompts,
    render_captions_response,
    render_interleaved_response,
    render_timestamps_response,
)
from .dvceval import meteor_similarity
from .mdpo_data import SampledTaskResponses, build_preference_pairs, task_kind_for
from .mdpo_objective import LossBatchResult, ObjectiveMode, PairLikelihoods, batch_loss
from .textsim import DEFAULT_METEOR, tokenize

DEFAULT_MODES = ("dpo", "mdpo_minus", "mdpo")
DEFAULT_EPOCHS = 200
DEFAULT_LR = 0.1
MAX_SEQUENCE_LEN = 64

_CAPTION_VOCAB = (
    "a man runs across the field".split()
    + "a woman plays the guitar on stage".split()
    + "the chef slices onions in the kitchen".split()
    + "a dog jumps over the fence outside".split()
    + "people dance near the river at night".split()
    + "kids paint pictures inside the classroom".split()
)
_NOISE_VOCAB = ("zyx", "qob", "vrk", "plu", "dmt", "fwa", "gep", "hix", "jul", "kam")


# ---------------------------------------------------------------------------
# Synthetic corpus and scripted corruptions
# ---------------------------------------------------------------------------


def synthetic_corpus(n_videos: int, seed: int) -> list[VideoAnnotation]:
    """Random annotations whose events partition the video, so cross-event
    temporal overlap is zero."""
    rng = random.Random(seed)
    corpus = []
    for idx in range(n_videos):
        duration = rng.uniform(60.0, 180.0)
        n_events = rng.randint(2, 5)
        weights = [rng.uniform(0.5, 1.5) for _ in range(n_events)]
        scale = duration / sum(weights)
        events = []
        cursor = 0.0
        for w in weights:
            end = min(cursor + w * scale, duration)
            words = rng.choices(_CAPTION_VOCAB, k=rng.randint(4, 8))
            events.append(Event(TimeInterval(cursor, end), " ".join(words)))
            cursor = end
        corpus.append(VideoAnnotation(f"synth{idx:04d}", duration, tuple(events)))
    return corpus


def _shift_intervals(ann: VideoAnnotation, severity: float, rng: random.Random) -> VideoAnnotation:
    events = []
    for event in ann.events:
        shift = severity * 0.45 * ann.duration * rng.choice((-1.0, 1.0))
        start = min(max(event.interval.start + shift, 0.0), ann.duration)
        end = min(max(event.interval.end + shift, 0.0), ann.duration)
        events.append(Event(TimeInterval(start, end), event.caption))
    return VideoAnnotation(ann.video_id, ann.duration, tuple(events), ann.reference_set_id)


def _rewrite_captions(ann: VideoAnnotation, severity: float, rng: random.Random) -> VideoAnnotation:
    events = []
    for event in ann.events:
        words = event.caption.split()
        n_replace = min(len(words), math.ceil(severity * len(words)))
        for pos in rng.sample(range(len(words)), n_replace):
            words[pos] = rng.choice(_NOISE_VOCAB)
        events.append(Event(event.interval, " ".join(words)))
    return VideoAnnotation(ann.video_id, ann.duration, tuple(events), ann.reference_set_id)


def _render_task_response(ann: VideoAnnotation, path: PathKind, k: int) -> str:
    kind = task_kind_for(path, k)
    if kind.value == "timestamps":
        return render_timestamps_response(ann)
    if PathKind(path) is PathKind.T_THEN_C:
        return render_interleaved_response(ann)
    return render_captions_response(ann)


def _corrupt_for_task(
    ann: VideoAnnotation, path: PathKind, k: int, severity: float, rng: random.Random
) -> VideoAnnotation:
    if task_kind_for(path, k).value == "timestamps":
        return _shift_intervals(ann, severity, rng)
    return _rewrite_captions(ann, severity, rng)


def build_toy_samples(
    corpus: Sequence[VideoAnnotation],
    num_samples: int = 3,
    seed: int = 0,
) -> list[SampledTaskResponses]:
    """Sampled-response records for both paths and both post-count tasks.

    The first response of each record echoes the ground truth; the rest are
    corruptions of increasing scripted severity, jittered by the seed.
    """
    if num_samples < 2:
        raise ValueError("need at least 2 responses per task")
    rng = random.Random(seed)
    samples = []
    for ann in corpus:
        for path in (PathKind.T_THEN_C, PathKind.C_THEN_T):
            prompts = inference_prompts(path)
            for k in (2, 3):
                gt_text = _render_task_response(ann, path, k)
                responses = [gt_text]
                for level in range(1, num_samples):
                    severity = level / (num_samples - 1) * rng.uniform(0.1, 1.0)
                    corrupted = _corrupt_for_task(ann, path, k, severity, rng)
                    responses.append(_render_task_response(corrupted, path, k))
                samples.append(
                    SampledTaskResponses(
                        video_id=ann.video_id,
                        path=path,
                        k=k,
                        prompt=prompts[k - 1],
                        gt_response=gt_text,
                        responses=tuple(responses),
                    )
                )
    return samples


# ---------------------------------------------------------------------------
# Tokenized pairs and the tabular policy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToyPair:
    preferred: tuple[int, ...]
    dispreferred: tuple[int, ...]
    m_w: float
    m_l: float
    final_task: bool


@dataclass(frozen=True)
class ToyPairSet:
    pairs: tuple[ToyPair, ...]
    vocab_size: int
    max_len: int


def build_toy_pairs(
    n_videos: int = 20,
    num_samples: int = 3,
    seed: int = 7,
) -> ToyPairSet:
    """The full pipeline: synthetic corpus -> corrupted samples -> scored,
    oriented pairs -> policy token sequences."""
    corpus = synthetic_corpus(n_videos, seed)
    samples = build_toy_samples(corpus, num_samples, seed + 1)
    pairs = build_preference_pairs(samples, 0.0, meteor_similarity(DEFAULT_METEOR))
    vocab: dict[str, int] = {}

    def encode(text: str) -> tuple[int, ...]:
        ids = []
        for word in tokenize(text)[:MAX_SEQUENCE_LEN]:
            if word not in vocab:
                vocab[word] = len(vocab)
            ids.append(vocab[word])
        return tuple(ids)

    toy_pairs = tuple(
        ToyPair(
            preferred=encode(p.preferred),
            dispreferred=encode(p.dispreferred),
            m_w=p.m_w,
            m_l=p.m_l,
            final_task=p.k == 3,
        )
        for p in pairs
    )
    max_len = max((len(s) for p in toy_pairs for s in (p.preferred, p.dispreferred)), default=1)
    return ToyPairSet(toy_pairs, max(len(vocab), 1), max(max_len, 1))


@dataclass
class ToyPolicy:
    """Position-by-vocabulary logit table; rows normalize via softmax."""

    vocab_size: int
    max_len: int
    logits: np.ndarray
    seed: int

    @classmethod
    def random(cls, vocab_size: int, max_len: int, seed: int, scale: float = 0.1) -> "ToyPolicy":
        rng = np.random.default_rng(seed)
        logits = rng.normal(0.0, scale, size=(max_len, vocab_size))
        return cls(vocab_size, max_len, logits, seed)

    def log_softmax(self) -> np.ndarray:
        shifted = self.logits - self.logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def toy_loglik(policy: ToyPolicy, sequence: Sequence[int]) -> float:
    """Sum of per-position log-softmax probabilities of the tokens."""
    if len(sequence) > policy.max_len:
        raise ValueError(f"sequence length {len(sequence)} exceeds max_len {policy.max_len}")
    if any(not 0 <= tok < policy.vocab_size for tok in sequence):
        raise ValueError("token id outside vocabulary")
    if not sequence:
        return 0.0
    ls = policy.log_softmax()
    positions = np.arange(len(sequence))
    return float(ls[positions, np.asarray(sequence)].sum())


# ---------------------------------------------------------------------------
# Margin experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginCurve:
    """Mean margin over all pairs, indexed by completed epoch (entry 0 is
    the initialized policy, always exactly 0)."""

    mode: str
    mean_margins: tuple[float, ...]


def _sequence_logliks(log_softmax: np.ndarray, sequences) -> dict[tuple[int, ...], float]:
    return {
        seq: float(log_softmax[np.arange(len(seq)), np.asarray(seq)].sum()) if seq else 0.0
        for seq in sequences
    }


def loss_and_logit_gradient(
    logits: np.ndarray,
    pairs: Sequence[ToyPair],
    ref_logliks: dict[tuple[int, ...], float],
    mode: ObjectiveMode,
    beta: float,
) -> tuple[LossBatchResult, np.ndarray]:
    """Batch loss and its gradient with respect to the policy logit table.

    Chain rule through the softmax: d loglik / d logits[t, v] is the token
    one-hot minus the row softmax, summed per pair with the loss gradients
    from the objective module.
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    softmax = exp / exp.sum(axis=1, keepdims=True)
    log_softmax = shifted - np.log(exp.sum(axis=1, keepdims=True))
    sequences = {s for p in pairs for s in (p.preferred, p.dispreferred)}
    loglik = _sequence_logliks(log_softmax, sequences)
    batch = [
        PairLikelihoods(
            logp_theta_w=loglik[p.preferred],
            logp_theta_l=loglik[p.dispreferred],
            logp_ref_w=ref_logliks[p.preferred],
            logp_ref_l=ref_logliks[p.dispreferred],
            m_w=p.m_w,
            m_l=p.m_l,
        )
        for p in pairs
    ]
    result = batch_loss(batch, mode, beta)
    coeff: dict[tuple[int, ...], float] = defaultdict(float)
    for pair, (grad_w, grad_l) in zip(pairs, result.gradients):
        coeff[pair.preferred] += grad_w
        coeff[pair.dispreferred] += grad_l
    grad = np.zeros_like(logits)
    for seq, c in coeff.items():
        if c == 0.0 or not seq:
            continue
        positions = np.arange(len(seq))
        grad[positions, np.asarray(seq)] += c
        grad[: len(seq)] -= c * softmax[: len(seq)]
    return result, grad


def run_margin_experiment(
    pair_set: ToyPairSet,
    modes: Sequence[str] = DEFAULT_MODES,
    beta: float = 0.5,
    gamma: float = 10.0,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    seed: int = 0,
) -> list[MarginCurve]:
    """Train one policy per mode from a shared frozen reference and record
    the mean margin over all pairs after every epoch.

    The dpo mode trains on final-task pairs only; mdpo_minus on every pair;
    mdpo on every pair behind the gap gate.
    """
    if not pair_set.pairs:
        raise ValueError("pair set is empty")
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")

    reference = ToyPolicy.random(pair_set.vocab_size, pair_set.max_len, seed)
    all_pairs = pair_set.pairs
    sequences = {s for p in all_pairs for s in (p.preferred, p.dispreferred)}
    ref_logliks = _sequence_logliks(reference.log_softmax(), sequences)

    curves = []
    for mode_name in modes:
        mode = (
            ObjectiveMode.mdpo(gamma) if mode_name == "mdpo" else ObjectiveMode(mode_name)
        )
        training_pairs = (
            [p for p in all_pairs if p.final_task] if mode_name == "dpo" else list(all_pairs)
        )
        theta = reference.logits.copy()
        margins = []
        for epoch in range(epochs + 1):
            policy = ToyPolicy(pair_set.vocab_size, pair_set.max_len, theta, seed)
            loglik = _sequence_logliks(policy.log_softmax(), sequences)
            margins.append(
                sum(
                    beta
                    * (
                        (loglik[p.preferred] - ref_logliks[p.preferred])
                        - (loglik[p.dispreferred] - ref_logliks[p.dispreferred])
                    )
                    for p in all_pairs
                )
                / len(all_pairs)
            )
            if epoch == epochs:
                break
            _, grad = loss_and_logit_gradient(theta, training_pairs, ref_logliks, mode, beta)
            theta = theta - lr * grad
        curves.append(MarginCurve(mode_name, tuple(margins)))
    return curves
