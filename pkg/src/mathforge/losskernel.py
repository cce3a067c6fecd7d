"""Hybrid preference loss: a preference (DPO-style) term on policy-vs-
reference log-ratios plus a length-normalized NLL term on the chosen
sequence, evaluated over abstract log-probabilities.

A tiny tabular softmax policy lives here too, purely as a verification
vehicle: it turns token sequences into log-probabilities with known
analytic gradients so finite differences can certify the loss end to end.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NonFiniteInput, UnknownToken


@dataclass(frozen=True)
class LossConfig:
    alpha_nll: float = 1.0
    beta: float = 0.1

    def __post_init__(self) -> None:
        if self.alpha_nll < 0:
            raise ValueError("alpha_nll must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")


@dataclass(frozen=True)
class LossInputs:
    """Sequence log-probabilities (natural log) and the chosen length.

    Log-probs above 0 are tolerated (intermediate models may be improper);
    they are worth a lint upstream but never an error here.
    """

    policy_logp_chosen: float
    policy_logp_rejected: float
    ref_logp_chosen: float
    ref_logp_rejected: float
    chosen_token_count: int

    def __post_init__(self) -> None:
        if self.chosen_token_count < 1:
            raise ValueError("chosen_token_count must be >= 1")

    def _values(self) -> tuple[float, ...]:
        return (
            self.policy_logp_chosen,
            self.policy_logp_rejected,
            self.ref_logp_chosen,
            self.ref_logp_rejected,
        )


def _require_finite(inputs: LossInputs) -> None:
    if not all(math.isfinite(v) for v in inputs._values()):
        raise NonFiniteInput(f"non-finite loss inputs: {inputs._values()}")


def softplus(x: float) -> float:
    """log(1 + e^x), stable for |x| up to at least 1e6."""
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    t = math.exp(x)
    return t / (1.0 + t)


def preference_margin(inputs: LossInputs, cfg: LossConfig) -> float:
    """beta-scaled difference of chosen vs rejected log-ratios."""
    chosen_ratio = inputs.policy_logp_chosen - inputs.ref_logp_chosen
    rejected_ratio = inputs.policy_logp_rejected - inputs.ref_logp_rejected
    return cfg.beta * (chosen_ratio - rejected_ratio)


def dpo_loss(inputs: LossInputs, cfg: LossConfig) -> float:
    """-log sigmoid(margin), computed as softplus(-margin)."""
    _require_finite(inputs)
    return softplus(-preference_margin(inputs, cfg))


def nll_loss(inputs: LossInputs) -> float:
    """Chosen-sequence NLL normalized by its token count."""
    _require_finite(inputs)
    return -inputs.policy_logp_chosen / inputs.chosen_token_count


def total_loss(inputs: LossInputs, cfg: LossConfig) -> float:
    return dpo_loss(inputs, cfg) + cfg.alpha_nll * nll_loss(inputs)


def batch_mean_loss(batch: Sequence[LossInputs], cfg: LossConfig) -> float:
    """Arithmetic mean of per-pair totals."""
    if not batch:
        raise ValueError("batch must be non-empty")
    return sum(total_loss(inputs, cfg) for inputs in batch) / len(batch)


# --- toy tabular policy -------------------------------------------------------


@dataclass
class ToyPolicy:
    """Context -> logits table over a small vocabulary.

    Sequence log-probability is the sum of per-token log-softmax terms for
    the sequence's context; there is no positional conditioning, which is
    all the loss verification needs.
    """

    vocab: tuple[str, ...]
    logits: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._index = {token: i for i, token in enumerate(self.vocab)}
        self.contexts = tuple(sorted(self.logits))
        for ctx in self.contexts:
            self.logits[ctx] = np.asarray(self.logits[ctx], dtype=np.float64)
            if self.logits[ctx].shape != (len(self.vocab),):
                raise ValueError(f"logits for {ctx!r} must have shape ({len(self.vocab)},)")

    @classmethod
    def random(
        cls, contexts: Sequence[str], vocab: Sequence[str], rng: random.Random, scale: float = 1.0
    ) -> "ToyPolicy":
        logits = {
            ctx: np.array([rng.gauss(0.0, scale) for _ in vocab]) for ctx in contexts
        }
        return cls(vocab=tuple(vocab), logits=logits)

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(
            vocab=self.vocab, logits={c: v.copy() for c, v in self.logits.items()}
        )

    def log_probs(self, context: str) -> np.ndarray:
        if context not in self.logits:
            raise UnknownToken(f"unknown context {context!r}")
        row = self.logits[context]
        shifted = row - row.max()
        return shifted - math.log(np.exp(shifted).sum())

    def probs(self, context: str) -> np.ndarray:
        return np.exp(self.log_probs(context))

    def get_params(self) -> np.ndarray:
        if not self.contexts:
            return np.zeros(0)
        return np.concatenate([self.logits[c] for c in self.contexts])

    def set_params(self, theta: np.ndarray) -> None:
        v = len(self.vocab)
        for i, ctx in enumerate(self.contexts):
            self.logits[ctx] = np.asarray(theta[i * v: (i + 1) * v], dtype=np.float64)


def toy_logprob(policy: ToyPolicy, context: str, token_sequence: Sequence[str]) -> float:
    """Sum of log-softmax terms along the sequence; empty sequences score 0."""
    if not token_sequence:
        return 0.0
    log_probs = policy.log_probs(context)
    total = 0.0
    for token in token_sequence:
        if token not in policy._index:
            raise UnknownToken(f"token {token!r} not in vocabulary")
        total += float(log_probs[policy._index[token]])
    return total


@dataclass(frozen=True)
class ToyPairExample:
    """One preference pair expressed in toy-policy tokens.

    Reference log-probs are frozen numbers, matching how the loss consumes
    a snapshot of the previous model rather than recomputing it.
    """

    chosen_context: str
    chosen_tokens: tuple[str, ...]
    rejected_context: str
    rejected_tokens: tuple[str, ...]
    ref_logp_chosen: float
    ref_logp_rejected: float


def toy_loss_inputs(policy: ToyPolicy, example: ToyPairExample) -> LossInputs:
    return LossInputs(
        policy_logp_chosen=toy_logprob(policy, example.chosen_context, example.chosen_tokens),
        policy_logp_rejected=toy_logprob(
            policy, example.rejected_context, example.rejected_tokens
        ),
        ref_logp_chosen=example.ref_logp_chosen,
        ref_logp_rejected=example.ref_logp_rejected,
        chosen_token_count=max(1, len(example.chosen_tokens)),
    )


def toy_batch_loss(
    policy: ToyPolicy, batch: Sequence[ToyPairExample], cfg: LossConfig
) -> float:
    return batch_mean_loss([toy_loss_inputs(policy, ex) for ex in batch], cfg)


def _token_counts(policy: ToyPolicy, tokens: Sequence[str]) -> np.ndarray:
    counts = np.zeros(len(policy.vocab))
    for token in tokens:
        if token not in policy._index:
            raise UnknownToken(f"token {token!r} not in vocabulary")
        counts[policy._index[token]] += 1
    return counts


def toy_batch_gradient(
    policy: ToyPolicy, batch: Sequence[ToyPairExample], cfg: LossConfig
) -> np.ndarray:
    """Analytic gradient of the mean total loss w.r.t. the logit table.

    Chain rule through log-softmax: d logp(tokens | ctx) / d logits[ctx]
    equals counts(tokens) - len(tokens) * softmax(logits[ctx]).
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    v = len(policy.vocab)
    ctx_offset = {ctx: i * v for i, ctx in enumerate(policy.contexts)}
    grad = np.zeros(len(policy.contexts) * v)
    for example in batch:
        inputs = toy_loss_inputs(policy, example)
        margin = preference_margin(inputs, cfg)
        # d softplus(-z) / dz = -sigmoid(-z)
        d_dpo_d_chosen = -sigmoid(-margin) * cfg.beta
        d_dpo_d_rejected = sigmoid(-margin) * cfg.beta
        d_total_d_chosen = d_dpo_d_chosen - cfg.alpha_nll / inputs.chosen_token_count
        d_total_d_rejected = d_dpo_d_rejected

        for context, tokens, weight in (
            (example.chosen_context, example.chosen_tokens, d_total_d_chosen),
            (example.rejected_context, example.rejected_tokens, d_total_d_rejected),
        ):
            if not tokens:
                continue
            counts = _token_counts(policy, tokens)
            probs = policy.probs(context)
            d_logp_d_logits = counts - len(tokens) * probs
            off = ctx_offset[context]
            grad[off: off + v] += weight * d_logp_d_logits
    return grad / len(batch)


def grad_check(
    policy: ToyPolicy,
    batch: Sequence[ToyPairExample],
    cfg: LossConfig,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon outside [1e-6, 1e-3]")
    analytic = toy_batch_gradient(policy, batch, cfg)
    theta = policy.get_params()
    probe = policy.copy()
    worst = 0.0
    for i in range(len(theta)):
        bumped = theta.copy()
        bumped[i] = theta[i] + epsilon
        probe.set_params(bumped)
        plus = toy_batch_loss(probe, batch, cfg)
        bumped[i] = theta[i] - epsilon
        probe.set_params(bumped)
        minus = toy_batch_loss(probe, batch, cfg)
        numeric = (plus - minus) / (2 * epsilon)
        denom = max(1e-8, abs(analytic[i]) + abs(numeric))
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
