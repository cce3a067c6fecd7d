"""Preference-pair dataset construction for one alignment iteration.

Per instruction: sample solutions from the current model, label each by
exact-match reward against the gold answer, keep the failures, and pair
each failure with the gold reasoning and answer. Problems the model never
fails contribute nothing this iteration but stay in the corpus for the
next one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .backends import Backend, GenerationConfig
from .errors import ForgeError, GoldMismatch, UnlabeledRollout
from .filtering import RolloutSet, Response, collect_rollouts, reward
from .rating import GoldAnswer
from .synthesis import Problem

PAIR_SCHEMA = "pairs.v1"


@dataclass(frozen=True)
class IterationConfig:
    iteration_index: int = 0
    n_samples: int = 32
    temperature: float = 0.7
    top_p: float = 0.8
    max_pairs_per_problem: int = 10
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.iteration_index < 0:
            raise ValueError("iteration_index must be non-negative")
        if self.n_samples < 1 or self.max_pairs_per_problem < 1:
            raise ValueError("n_samples and max_pairs_per_problem must be positive")

    def generation_config(self) -> GenerationConfig:
        return GenerationConfig(
            temperature=self.temperature,
            top_p=self.top_p,
            max_tokens=self.max_tokens,
        )


@dataclass(frozen=True)
class PreferencePair:
    problem_id: str
    prompt: str
    chosen_reasoning: str
    chosen_answer: str
    rejected_reasoning: str
    rejected_answer: Optional[str]
    iteration: int
    rejected_sample_index: int

    def to_record(self) -> dict:
        """The cross-component pair contract; exactly these fields."""
        return {
            "problem_id": self.problem_id,
            "prompt": self.prompt,
            "chosen": {"reasoning": self.chosen_reasoning, "answer": self.chosen_answer},
            "rejected": {
                "reasoning": self.rejected_reasoning,
                "answer": self.rejected_answer or "",
            },
            "iteration": self.iteration,
        }


@dataclass
class PairDataset:
    iteration: int
    pairs: list[PreferencePair] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def sample_responses(
    problem: Problem,
    model: Backend,
    cfg: IterationConfig,
    *,
    base_seed: int = 0,
    template_dir: str | None = None,
) -> RolloutSet:
    """Draw cfg.n_samples solutions from the current model."""
    if problem.reference_answer is None:
        raise ValueError(f"{problem.problem_id}: reference_answer required")
    return collect_rollouts(
        problem,
        model,
        cfg.n_samples,
        cfg.generation_config(),
        base_seed=base_seed,
        seed_tag=f"iter{cfg.iteration_index}",
        template_dir=template_dir,
    )


def label_rollouts(rollouts: RolloutSet, ground_truth: str) -> RolloutSet:
    """Assign the 0/1 exact-match reward to every response in place."""
    for response in rollouts.responses:
        response.reward = reward(response.final_answer, ground_truth)
    return rollouts


def collect_negatives(rollouts: RolloutSet) -> list[Response]:
    """The incorrect responses, in sample order."""
    for response in rollouts.responses:
        if response.reward is None:
            raise UnlabeledRollout(
                f"{rollouts.problem_id}: sample {response.sample_index} unlabeled"
            )
    negatives = [r for r in rollouts.responses if r.reward == 0]
    return sorted(negatives, key=lambda r: r.sample_index)


def build_pairs(
    problem: Problem,
    gold: GoldAnswer,
    negatives: Sequence[Response],
    cfg: IterationConfig,
) -> list[PreferencePair]:
    """Pair the gold answer with the first min(K, failures) negatives."""
    if gold.problem_id != problem.problem_id:
        raise GoldMismatch(
            f"gold for {gold.problem_id} paired with problem {problem.problem_id}"
        )
    pairs = []
    for response in negatives[: cfg.max_pairs_per_problem]:
        pairs.append(
            PreferencePair(
                problem_id=problem.problem_id,
                prompt=problem.text,
                chosen_reasoning=gold.reasoning,
                chosen_answer=gold.final_answer,
                rejected_reasoning=response.reasoning,
                rejected_answer=response.final_answer,
                iteration=cfg.iteration_index,
                rejected_sample_index=response.sample_index,
            )
        )
    return pairs


def build_iteration_dataset(
    problems: Sequence[Problem],
    golds: Mapping[str, GoldAnswer],
    model: Backend,
    cfg: IterationConfig,
    *,
    base_seed: int = 0,
    template_dir: str | None = None,
) -> PairDataset:
    """sample -> label -> collect -> pair, per problem, in problem_id order."""
    missing = [p.problem_id for p in problems if p.problem_id not in golds]
    if missing:
        raise GoldMismatch(f"problems without gold answers: {missing[:5]}")

    dataset = PairDataset(iteration=cfg.iteration_index)
    skipped: list[dict] = []
    failure_rates: list[float] = []
    problems_with_pairs = 0

    for problem in sorted(problems, key=lambda p: p.problem_id):
        gold = golds[problem.problem_id]
        try:
            rollouts = sample_responses(
                problem, model, cfg, base_seed=base_seed, template_dir=template_dir
            )
            label_rollouts(rollouts, gold.final_answer)
            negatives = collect_negatives(rollouts)
            pairs = build_pairs(problem, gold, negatives, cfg)
        except ForgeError as exc:
            skipped.append({"problem_id": problem.problem_id, "error": str(exc)})
            continue
        failure_rates.append(len(negatives) / cfg.n_samples)
        if pairs:
            problems_with_pairs += 1
            dataset.pairs.extend(pairs)

    dataset.stats = {
        "problems_in": len(problems),
        "problems_with_pairs": problems_with_pairs,
        "pairs_total": len(dataset.pairs),
        "mean_failure_rate": (
            sum(failure_rates) / len(failure_rates) if failure_rates else 0.0
        ),
        "skipped": skipped,
    }
    return dataset
