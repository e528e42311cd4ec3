"""Preference-objective calculator: per-pair logistic loss on the likelihood
ratio margin, its analytic gradients with respect to the policy
log-likelihoods, and gap-gated batch reductions.

For one pair the loss is -log sigmoid(margin) with
margin = beta * ((logp_theta_w - logp_ref_w) - (logp_theta_l - logp_ref_l)),
computed in a branch-stable softplus formulation so extreme margins neither
overflow nor lose the linear tail.

Three batch modes share this pair loss. ``dpo`` and ``mdpo_minus`` average
over every supplied pair; they differ only in which pairs the caller feeds
(final-task-only versus all sub-tasks), a dataset convention this module
records per batch. ``mdpo`` additionally gates each pair on its metric gap
m_w - m_l > gamma and averages over the gate-passing pairs only.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

DEFAULT_BETA = 0.5
DEFAULT_GAMMA = 10.0


def likelihood_ratio(logp_theta: float, logp_ref: float) -> float:
    """Log ratio of policy to reference likelihood for one response."""
    return logp_theta - logp_ref


def response_loglik(token_logprobs: Iterable[float]) -> float:
    """Sequence log-likelihood: the sum of its token log-probabilities."""
    return sum(token_logprobs)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _softplus(x: float) -> float:
    # log(1 + e^x) without overflow; exact ln 2 at x == 0
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


@dataclass(frozen=True)
class PairLikelihoods:
    """Log-likelihoods of one preference pair under policy and reference,
    with the metric values that oriented it."""

    logp_theta_w: float
    logp_theta_l: float
    logp_ref_w: float
    logp_ref_l: float
    m_w: float
    m_l: float

    def __post_init__(self):
        values = (self.logp_theta_w, self.logp_theta_l, self.logp_ref_w, self.logp_ref_l)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"log-likelihoods must be finite: {values}")
        if not self.m_w > self.m_l:
            raise ValueError(f"m_w must exceed m_l, got {self.m_w} <= {self.m_l}")

    @property
    def gap(self) -> float:
        return self.m_w - self.m_l


@dataclass(frozen=True)
class ObjectiveMode:
    """One of the three batch objectives; gamma applies to ``mdpo`` only."""

    kind: str
    gamma: float = 0.0

    _KINDS = ("dpo", "mdpo_minus", "mdpo")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"mode must be one of {self._KINDS}, got {self.kind!r}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    @classmethod
    def dpo(cls) -> "ObjectiveMode":
        return cls("dpo")

    @classmethod
    def mdpo_minus(cls) -> "ObjectiveMode":
        return cls("mdpo_minus")

    @classmethod
    def mdpo(cls, gamma: float = DEFAULT_GAMMA) -> "ObjectiveMode":
        return cls("mdpo", gamma)

    def describe(self) -> str:
        return f"mdpo(gamma={self.gamma:g})" if self.kind == "mdpo" else self.kind


def pair_loss(pl: PairLikelihoods, beta: float) -> tuple[float, float, float, float]:
    """Loss, gradients, and margin for a single pair.

    Returns:
        (loss, grad_w, grad_l, margin) where grad_w and grad_l are the
        derivatives of the loss with respect to logp_theta_w and logp_theta_l.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    r_w = likelihood_ratio(pl.logp_theta_w, pl.logp_ref_w)
    r_l = likelihood_ratio(pl.logp_theta_l, pl.logp_ref_l)
    margin = beta * (r_w - r_l)
    loss = _softplus(-margin)
    slope = _sigmoid(-margin)
    return loss, -beta * slope, beta * slope, margin


@dataclass(frozen=True)
class LossBatchResult:
    """Batch reduction of pair losses.

    ``loss`` is the mean over gate-passing pairs (0 when none pass);
    ``gradients`` are the derivatives of that mean with respect to each
    pair's (logp_theta_w, logp_theta_l), zero for gated-out pairs; margins
    are reported for every pair regardless of gating.
    """

    loss: float
    per_pair_margin: tuple[float, ...]
    active_count: int
    gradients: tuple[tuple[float, float], ...]
    mode: str

    def margin_stats(self) -> dict[str, float]:
        if not self.per_pair_margin:
            return {"mean": 0.0, "min": 0.0, "max": 0.0}
        return {
            "mean": sum(self.per_pair_margin) / len(self.per_pair_margin),
            "min": min(self.per_pair_margin),
            "max": max(self.per_pair_margin),
        }


def batch_loss(
    pairs: Sequence[PairLikelihoods],
    mode: ObjectiveMode,
    beta: float = DEFAULT_BETA,
) -> LossBatchResult:
    """Reduce a batch of pairs under the chosen objective."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    active = [
        mode.kind != "mdpo" or pl.gap > mode.gamma
        for pl in pairs
    ]
    n_active = sum(active)
    losses = []
    grads = []
    margins = []
    for pl, is_active in zip(pairs, active):
        loss, grad_w, grad_l, margin = pair_loss(pl, beta)
        margins.append(margin)
        if is_active:
            losses.append(loss)
            grads.append((grad_w / n_active, grad_l / n_active))
        else:
            grads.append((0.0, 0.0))
    total = sum(losses) / n_active if n_active else 0.0
    return LossBatchResult(
        loss=total,
        per_pair_margin=tuple(margins),
        active_count=n_active,
        gradients=tuple(grads),
        mode=mode.describe(),
    )
