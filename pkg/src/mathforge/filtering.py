"""Problem filtering: ROUGE-L dedup, judged quality gating, and the
defect-aware rollout screen, plus the exact-match answer verifier shared
with pair construction."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .backends import Backend, GenerationConfig
from .errors import (
    ForgeError,
    InsufficientRollouts,
    VerdictParseError,
)
from .prompts import PROBLEM_ANSWER, QUALITY_REVIEW, load_template
from .synthesis import Problem, STATUS_DEDUPED, STATUS_DEFECT_RETAINED, STATUS_JUDGED
from .textutil import derive_seed, extract_boxed, split_reasoning_answer

__all__ = [
    "RougeScore",
    "QualityVerdict",
    "Response",
    "RolloutSet",
    "rouge_l",
    "dedup",
    "judge_quality",
    "quality_gate",
    "extract_boxed",
    "split_reasoning_answer",
    "normalize_answer",
    "reward",
    "defect_filter",
    "defect_retained",
    "collect_rollouts",
]


# --- ROUGE-L ------------------------------------------------------------


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


_PUNCT_RE = re.compile(r"[^\w\s]")


def rouge_tokenize(text: str) -> list[str]:
    """Whitespace tokens after lowercasing and punctuation stripping."""
    return _PUNCT_RE.sub(" ", text.lower()).split()


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token in a:
        cur = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS-based ROUGE-L; empty input on either side scores all zeros."""
    cand = rouge_tokenize(candidate)
    ref = rouge_tokenize(reference)
    if not cand or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    if precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return RougeScore(precision, recall, f1)


def dedup(
    problems: Iterable[Problem],
    threshold: float,
    accepted: Sequence[Problem] = (),
) -> tuple[list[Problem], list[Problem]]:
    """Greedy near-duplicate filter.

    Candidates are scanned in (round_index, problem_id) order; one is
    dropped when its best ROUGE-L f1 against everything accepted so far
    reaches the threshold. The observed maximum is recorded in metadata
    either way.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    ordered = sorted(problems, key=lambda p: (p.round_index, p.problem_id))
    kept: list[Problem] = []
    discarded: list[Problem] = []
    pool: list[Problem] = list(accepted)
    for problem in ordered:
        max_f1 = 0.0
        for prior in pool:
            score = rouge_l(problem.text, prior.text).f1
            if score > max_f1:
                max_f1 = score
                if max_f1 >= threshold:
                    break
        problem.metadata["max_rouge"] = max_f1
        if pool and max_f1 >= threshold:
            problem.discard("duplicate")
            discarded.append(problem)
        else:
            problem.status = STATUS_DEDUPED
            kept.append(problem)
            pool.append(problem)
    return kept, discarded


# --- quality judging ------------------------------------------------------


@dataclass(frozen=True)
class QualityVerdict:
    problem_id: str
    judge: str
    score: int
    reason: str = ""

    def __post_init__(self) -> None:
        if not 1 <= self.score <= 10:
            raise ValueError(f"score {self.score} outside [1, 10]")


_JUDGE_CONFIG = GenerationConfig(temperature=0.0, top_p=1.0, max_tokens=512)
_JSON_BLOB_RE = re.compile(r"[\[{].*[\]}]", re.DOTALL)


def parse_quality_verdict(problem: Problem, judge: str, text: str) -> QualityVerdict:
    """Parse one judge reply into a verdict; raises VerdictParseError."""
    blob = _JSON_BLOB_RE.search(text)
    if not blob:
        raise VerdictParseError(f"{judge}: no JSON in verdict")
    try:
        data = json.loads(blob.group(0))
    except json.JSONDecodeError as exc:
        raise VerdictParseError(f"{judge}: {exc}") from exc
    if isinstance(data, list):
        if not data:
            raise VerdictParseError(f"{judge}: empty verdict list")
        data = data[0]
    if not isinstance(data, dict) or "score" not in data:
        raise VerdictParseError(f"{judge}: verdict missing score")
    score = data["score"]
    if isinstance(score, float) and score.is_integer():
        score = int(score)
    if not isinstance(score, int) or not 1 <= score <= 10:
        raise VerdictParseError(f"{judge}: score {score!r} outside 1..10")
    return QualityVerdict(
        problem_id=problem.problem_id,
        judge=judge,
        score=score,
        reason=str(data.get("reason", "")),
    )


def lower_median(scores: Sequence[int]) -> int:
    """Median with ties resolved downward (even counts take the lower middle)."""
    ordered = sorted(scores)
    return ordered[(len(ordered) - 1) // 2]


def judge_quality(
    problem: Problem,
    judges: Sequence[str],
    backends: dict[str, Backend],
    *,
    base_seed: int = 0,
    config: GenerationConfig = _JUDGE_CONFIG,
    template_dir: str | None = None,
) -> tuple[list[QualityVerdict], Optional[int]]:
    """Collect one rubric verdict per judge and aggregate by lower median.

    Judges whose replies do not parse are dropped; when every judge drops,
    the problem is discarded as unjudgeable and the aggregate is None.
    """
    if not judges:
        raise ValueError("at least one judge required")
    template = load_template(QUALITY_REVIEW, template_dir)
    prompt = [{"role": "user", "content": template.format(problem=problem.text)}]

    def ask(judge: str) -> QualityVerdict | None:
        judge_cfg = replace(
            config, seed=derive_seed(base_seed, "quality", problem.problem_id, judge)
        )
        exchange = backends[judge].chat(prompt, judge_cfg)
        try:
            return parse_quality_verdict(problem, judge, exchange.response_text)
        except VerdictParseError:
            return None

    with ThreadPoolExecutor(max_workers=max(1, len(judges))) as pool:
        results = list(pool.map(ask, judges))

    verdicts = [v for v in results if v is not None]
    if not verdicts:
        problem.discard("unjudgeable")
        return [], None
    aggregate = lower_median([v.score for v in verdicts])
    problem.quality_score = aggregate
    problem.status = STATUS_JUDGED
    return verdicts, aggregate


def quality_gate(
    problems: Iterable[Problem], min_score: int = 6
) -> tuple[list[Problem], list[Problem]]:
    """Keep problems whose aggregated quality score reaches min_score."""
    kept: list[Problem] = []
    discarded: list[Problem] = []
    for problem in problems:
        if problem.quality_score is not None and problem.quality_score >= min_score:
            kept.append(problem)
        else:
            problem.discard("low_quality")
            discarded.append(problem)
    return kept, discarded


# --- answer verification ---------------------------------------------------


_NUMERIC_RE = re.compile(r"^[+-]?\d+(\.\d+)?$")
_WS_RE = re.compile(r"\s+")


def normalize_answer(answer: str) -> str:
    """Trim, collapse whitespace, drop a trailing period, canonicalize
    plain numerics ("007" -> "7", "0.50" -> "0.5")."""
    text = _WS_RE.sub(" ", answer).strip()
    if text.endswith("."):
        text = text[:-1].rstrip()
    if not _NUMERIC_RE.match(text):
        return text
    sign = ""
    if text[0] in "+-":
        sign = "-" if text[0] == "-" else ""
        text = text[1:]
    if "." in text:
        whole, frac = text.split(".", 1)
        frac = frac.rstrip("0")
    else:
        whole, frac = text, ""
    whole = whole.lstrip("0") or "0"
    value = f"{whole}.{frac}" if frac else whole
    if value == "0":
        return "0"
    return sign + value


def reward(answer: Optional[str], ground_truth: str) -> int:
    """1 iff the answer matches the ground truth after normalization.

    Total: a missing answer scores 0, never an error.
    """
    if not ground_truth:
        raise ValueError("ground_truth must be non-empty")
    if answer is None:
        return 0
    return 1 if normalize_answer(answer) == normalize_answer(ground_truth) else 0


# --- defect-aware rollout screen --------------------------------------------


@dataclass
class Response:
    """One sampled solution: reasoning trace plus extracted final answer."""

    raw_text: str
    sample_index: int
    reasoning: str = ""
    final_answer: Optional[str] = None
    reward: Optional[int] = None

    @classmethod
    def from_raw(cls, raw_text: str, sample_index: int) -> "Response":
        reasoning, answer = split_reasoning_answer(raw_text)
        return cls(
            raw_text=raw_text,
            sample_index=sample_index,
            reasoning=reasoning,
            final_answer=answer,
        )

    def to_dict(self) -> dict:
        return {
            "raw_text": self.raw_text,
            "sample_index": self.sample_index,
            "reasoning": self.reasoning,
            "final_answer": self.final_answer,
            "reward": self.reward,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Response":
        return cls(
            raw_text=data["raw_text"],
            sample_index=data["sample_index"],
            reasoning=data.get("reasoning", ""),
            final_answer=data.get("final_answer"),
            reward=data.get("reward"),
        )


@dataclass
class RolloutSet:
    problem_id: str
    responses: list[Response] = field(default_factory=list)
    n_requested: int = 0

    @property
    def failures(self) -> int:
        return sum(1 for r in self.responses if r.reward == 0)


def defect_retained(rollouts: RolloutSet) -> bool:
    """A labeled rollout set keeps its problem iff some solution failed."""
    return rollouts.failures > 0


def collect_rollouts(
    problem: Problem,
    model: Backend,
    n: int,
    config: GenerationConfig,
    *,
    base_seed: int = 0,
    seed_tag: str = "rollout",
    template_dir: str | None = None,
) -> RolloutSet:
    """Sample n solutions concurrently, ordered by sample index.

    Per-sample failures are tolerated while at least n responses arrive;
    otherwise InsufficientRollouts reports how many made it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    template = load_template(PROBLEM_ANSWER, template_dir)
    prompt = [{"role": "user", "content": template.format(problem=problem.text)}]

    def sample(index: int) -> Response | None:
        sample_cfg = replace(
            config, seed=derive_seed(base_seed, seed_tag, problem.problem_id, index)
        )
        try:
            exchange = model.chat(prompt, sample_cfg)
        except ForgeError:
            return None
        return Response.from_raw(exchange.response_text, index)

    with ThreadPoolExecutor(max_workers=min(n, model.profile.max_in_flight * 2)) as pool:
        results = list(pool.map(sample, range(n)))

    responses = [r for r in results if r is not None]
    if len(responses) < n:
        raise InsufficientRollouts(
            f"{problem.problem_id}: got {len(responses)} of {n} rollouts"
        )
    return RolloutSet(problem_id=problem.problem_id, responses=responses, n_requested=n)


def defect_filter(
    problem: Problem,
    model: Backend,
    n: int,
    config: GenerationConfig,
    *,
    base_seed: int = 0,
    template_dir: str | None = None,
) -> tuple[RolloutSet, bool]:
    """Retain a problem iff at least one of n sampled solutions is wrong.

    Problems the model already solves in every rollout carry no learning
    signal and are discarded. The observed failure rate is recorded as a
    difficulty tag; all-failure problems are retained, not special-cased.
    """
    if problem.reference_answer is None:
        raise ValueError(f"{problem.problem_id}: reference_answer required")
    rollouts = collect_rollouts(
        problem,
        model,
        n,
        config,
        base_seed=base_seed,
        seed_tag="defect",
        template_dir=template_dir,
    )
    for response in rollouts.responses:
        response.reward = reward(response.final_answer, problem.reference_answer)
    retained = defect_retained(rollouts)
    problem.metadata["difficulty"] = rollouts.failures / n
    if retained:
        problem.status = STATUS_DEFECT_RETAINED
    else:
        problem.discard("already_solved")
    return rollouts, retained
