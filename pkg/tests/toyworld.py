"""A tiny closed world for exercising the alignment loop end to end.

A tabular softmax policy answers each problem by sampling one token from a
small answer vocabulary; pairs built from its failures train that same
policy by gradient descent on the hybrid loss. Because the world is
closed, failure counts and evaluation losses are exact and reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from mathforge.backends import Backend, BackendProfile
from mathforge.backends.profiles import GenerationConfig
from mathforge.losskernel import (
    LossConfig,
    ToyPairExample,
    ToyPolicy,
    toy_batch_gradient,
    toy_batch_loss,
    toy_logprob,
)
from mathforge.pairbuilder import IterationConfig, PairDataset, build_iteration_dataset
from mathforge.rating import GoldAnswer
from mathforge.synthesis import Problem
from mathforge.textutil import content_hash, derive_seed, normalize_text

ANSWER_VOCAB = ("11", "22", "33", "44")


def make_world(n_problems: int = 6) -> tuple[list[Problem], dict[str, GoldAnswer]]:
    problems = []
    golds = {}
    for i in range(n_problems):
        text = f"toy problem number {i}: pick the right tag."
        gold_answer = ANSWER_VOCAB[i % len(ANSWER_VOCAB)]
        problem = Problem(
            problem_id=content_hash(text),
            text=text,
            source_member="expert",
            round_index=0,
            gen_config=GenerationConfig(),
            reference_answer=gold_answer,
        )
        problems.append(problem)
        golds[problem.problem_id] = GoldAnswer(
            problem_id=problem.problem_id,
            author="expert",
            reasoning=f"expert derivation for problem {i}",
            final_answer=gold_answer,
            final_score=1.0,
        )
    return problems, golds


class PolicyBackend(Backend):
    """Answers by sampling a token from the policy's softmax for the problem."""

    def __init__(self, policy: ToyPolicy, text_to_context: dict[str, str], seed: int):
        super().__init__(BackendProfile(member_id="toy", max_in_flight=8))
        self.policy = policy
        self.text_to_context = text_to_context
        self.seed = seed

    def _complete(self, messages, config):
        prompt = messages[-1]["content"]
        marker = "Problem:\n"
        body = prompt[prompt.rfind(marker) + len(marker):].strip()
        context = self.text_to_context[normalize_text(body)]
        rng = random.Random(derive_seed(self.seed, prompt, config.seed))
        draw = rng.random()
        cumulative = 0.0
        token = self.policy.vocab[-1]
        for candidate, p in zip(self.policy.vocab, self.policy.probs(context)):
            cumulative += float(p)
            if draw <= cumulative:
                token = candidate
                break
        return f"toy attempt. \\boxed{{{token}}}"

    def _embed(self, texts):  # pragma: no cover - unused
        raise NotImplementedError


@dataclass
class IterationMetrics:
    failures: int
    pairs: int
    eval_loss: float
    dataset: PairDataset


def uniform_policy(problems: list[Problem]) -> ToyPolicy:
    import numpy as np

    return ToyPolicy(
        vocab=ANSWER_VOCAB,
        logits={p.problem_id: np.zeros(len(ANSWER_VOCAB)) for p in problems},
    )


def eval_batch(
    problems: list[Problem], golds: dict[str, GoldAnswer], reference: ToyPolicy
) -> list[ToyPairExample]:
    """Fixed probe pairs: gold vs the 'next' wrong token, per problem."""
    batch = []
    for problem in problems:
        gold = golds[problem.problem_id].final_answer
        wrong = ANSWER_VOCAB[(ANSWER_VOCAB.index(gold) + 1) % len(ANSWER_VOCAB)]
        batch.append(
            ToyPairExample(
                chosen_context=problem.problem_id,
                chosen_tokens=(gold,),
                rejected_context=problem.problem_id,
                rejected_tokens=(wrong,),
                ref_logp_chosen=toy_logprob(reference, problem.problem_id, [gold]),
                ref_logp_rejected=toy_logprob(reference, problem.problem_id, [wrong]),
            )
        )
    return batch


def run_iteration(
    policy: ToyPolicy,
    problems: list[Problem],
    golds: dict[str, GoldAnswer],
    *,
    iteration_index: int,
    initial_reference: ToyPolicy,
    loss_cfg: LossConfig = LossConfig(),
    n_samples: int = 8,
    lr: float = 0.8,
    steps: int = 40,
    seed: int = 0,
) -> IterationMetrics:
    """One alignment round: sample, pair failures with gold, descend."""
    text_to_context = {normalize_text(p.text): p.problem_id for p in problems}
    sampler = PolicyBackend(policy.copy(), text_to_context, seed=seed)
    cfg = IterationConfig(
        iteration_index=iteration_index,
        n_samples=n_samples,
        max_pairs_per_problem=n_samples,  # uncapped: pairs_total == failures
    )
    dataset = build_iteration_dataset(
        problems, golds, sampler, cfg, base_seed=derive_seed(seed, iteration_index)
    )

    reference = policy.copy()  # the previous model, frozen for this round
    batch = [
        ToyPairExample(
            chosen_context=pair.problem_id,
            chosen_tokens=(pair.chosen_answer,),
            rejected_context=pair.problem_id,
            rejected_tokens=(pair.rejected_answer,),
            ref_logp_chosen=toy_logprob(reference, pair.problem_id, [pair.chosen_answer]),
            ref_logp_rejected=toy_logprob(
                reference, pair.problem_id, [pair.rejected_answer]
            ),
        )
        for pair in dataset.pairs
    ]
    if batch:
        for _ in range(steps):
            grad = toy_batch_gradient(policy, batch, loss_cfg)
            policy.set_params(policy.get_params() - lr * grad)

    probe = eval_batch(problems, golds, initial_reference)
    return IterationMetrics(
        failures=dataset.stats["pairs_total"],
        pairs=dataset.stats["pairs_total"],
        eval_loss=toy_batch_loss(policy, probe, loss_cfg),
        dataset=dataset,
    )
