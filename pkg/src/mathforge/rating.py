"""Answer battles and scoring.

Judges compare two members' answers pairwise; each ballot is cast twice
with the assistant/reference positions swapped, which cancels position
bias without changing the vote-share semantics. Vote shares give the local
score, persistent per-member ratings give the global expectation, and a
configurable mixture of the two ranks answers so the best one can be
promoted to the problem's gold standard.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .backends import Backend, GenerationConfig
from .errors import (
    NoAnswers,
    NoBoxedAnswer,
    NoValidBallots,
    NoVotes,
    OpponentMismatch,
    UnknownMember,
    VoteParseError,
)
from .filtering import Response
from .prompts import ANSWER_BATTLE, load_template
from .synthesis import Problem
from .textutil import derive_seed

DEFAULT_K_FACTOR = 32.0
DEFAULT_INITIAL_RATING = 1000.0
DEFAULT_ALPHA_SCORE = 0.5


@dataclass(frozen=True)
class Ballot:
    """One judge's verdict for one orientation of a battle."""

    judge: str
    assistant_side: str  # member whose answer sat in the assistant slot
    score: int
    vote_a: float
    vote_b: float

    def to_dict(self) -> dict:
        return {
            "judge": self.judge,
            "assistant_side": self.assistant_side,
            "score": self.score,
            "vote_a": self.vote_a,
            "vote_b": self.vote_b,
        }


@dataclass(frozen=True)
class BattleOutcome:
    problem_id: str
    side_a: str
    side_b: str
    votes_a: float
    votes_b: float
    ballots: tuple[Ballot, ...] = ()

    def __post_init__(self) -> None:
        if self.votes_a < 0 or self.votes_b < 0:
            raise ValueError("vote tallies must be non-negative")

    @property
    def result_a(self) -> float:
        """1 for a win, 0.5 for a draw, 0 for a loss (side A's view)."""
        if self.votes_a > self.votes_b:
            return 1.0
        if self.votes_a < self.votes_b:
            return 0.0
        return 0.5

    @property
    def result_b(self) -> float:
        return 1.0 - self.result_a


_SCORE_RE = re.compile(r"\[\[\s*(\d{1,2})\s*\]\]")


def parse_ballot_score(text: str) -> int:
    """Last [[n]] in a judge reply, validated to the 1..10 band."""
    matches = _SCORE_RE.findall(text)
    if not matches:
        raise VoteParseError("no [[n]] score in ballot")
    score = int(matches[-1])
    if not 1 <= score <= 10:
        raise VoteParseError(f"score {score} outside 1..10")
    return score


def _votes_for(score: int, assistant_is_a: bool) -> tuple[float, float]:
    """Map a rubric score to (vote_a, vote_b) for one orientation."""
    if score >= 7:  # assistant side wins
        return (1.0, 0.0) if assistant_is_a else (0.0, 1.0)
    if score >= 5:  # draw
        return 0.5, 0.5
    return (0.0, 1.0) if assistant_is_a else (1.0, 0.0)  # reference side wins


_BATTLE_CONFIG = GenerationConfig(temperature=0.0, top_p=1.0, max_tokens=512)


def run_battle(
    problem: Problem,
    side_a: str,
    answer_a: Response,
    side_b: str,
    answer_b: Response,
    judges: Sequence[str],
    backends: dict[str, Backend],
    *,
    base_seed: int = 0,
    config: GenerationConfig = _BATTLE_CONFIG,
    template_dir: str | None = None,
) -> BattleOutcome:
    """Tally judge votes over both orientations of one answer pair.

    Each judge sees the pair twice with assistant/reference swapped; each
    parseable ballot contributes one vote (split on draws). Ballots that
    fail to parse are dropped; a battle where every ballot drops raises
    NoValidBallots.
    """
    if not judges:
        raise ValueError("at least one judge required")
    if side_a in judges or side_b in judges:
        raise ValueError("a judge cannot have authored either answer")
    template = load_template(ANSWER_BATTLE, template_dir)

    def ask(judge: str, assistant_is_a: bool) -> Ballot | None:
        assistant = answer_a if assistant_is_a else answer_b
        reference = answer_b if assistant_is_a else answer_a
        prompt = template.format(
            instruction=problem.text,
            reference=reference.raw_text,
            response=assistant.raw_text,
        )
        judge_cfg = replace(
            config,
            seed=derive_seed(
                base_seed, "battle", problem.problem_id, side_a, side_b, judge, assistant_is_a
            ),
        )
        exchange = backends[judge].chat([{"role": "user", "content": prompt}], judge_cfg)
        try:
            score = parse_ballot_score(exchange.response_text)
        except VoteParseError:
            return None
        vote_a, vote_b = _votes_for(score, assistant_is_a)
        return Ballot(
            judge=judge,
            assistant_side=side_a if assistant_is_a else side_b,
            score=score,
            vote_a=vote_a,
            vote_b=vote_b,
        )

    tasks = [(judge, orientation) for judge in judges for orientation in (True, False)]
    with ThreadPoolExecutor(max_workers=max(1, len(tasks))) as pool:
        results = list(pool.map(lambda t: ask(*t), tasks))

    ballots = tuple(b for b in results if b is not None)
    if not ballots:
        raise NoValidBallots(
            f"{problem.problem_id}: every ballot dropped for {side_a} vs {side_b}"
        )
    return BattleOutcome(
        problem_id=problem.problem_id,
        side_a=side_a,
        side_b=side_b,
        votes_a=sum(b.vote_a for b in ballots),
        votes_b=sum(b.vote_b for b in ballots),
        ballots=ballots,
    )


def local_score(outcome: BattleOutcome) -> tuple[float, float]:
    """Vote shares (share_a, share_b); they sum to 1 exactly."""
    total = outcome.votes_a + outcome.votes_b
    if total == 0:
        raise NoVotes(f"{outcome.problem_id}: zero total votes")
    share_a = outcome.votes_a / total
    return share_a, 1.0 - share_a


# --- Elo ratings -------------------------------------------------------------


@dataclass(frozen=True)
class EloState:
    ratings: dict[str, float]
    k_factor: float = DEFAULT_K_FACTOR
    battles_applied: int = 0

    def __post_init__(self) -> None:
        if self.k_factor <= 0:
            raise ValueError("k_factor must be positive")

    @classmethod
    def initial(
        cls,
        members: Sequence[str],
        rating: float = DEFAULT_INITIAL_RATING,
        k_factor: float = DEFAULT_K_FACTOR,
    ) -> "EloState":
        return cls(ratings={m: rating for m in members}, k_factor=k_factor)


def elo_expectation(rating_a: float, rating_b: float) -> tuple[float, float]:
    """Expected win probabilities for both sides; sums to 1."""
    expected_a = 1.0 / (1.0 + 10.0 ** ((rating_b - rating_a) / 400.0))
    return expected_a, 1.0 - expected_a


def update_ratings(state: EloState, outcome: BattleOutcome) -> EloState:
    """Apply one battle: each side moves by K * (actual - expected)."""
    for member in (outcome.side_a, outcome.side_b):
        if member not in state.ratings:
            raise UnknownMember(member)
    rating_a = state.ratings[outcome.side_a]
    rating_b = state.ratings[outcome.side_b]
    expected_a, expected_b = elo_expectation(rating_a, rating_b)
    ratings = dict(state.ratings)
    ratings[outcome.side_a] = rating_a + state.k_factor * (outcome.result_a - expected_a)
    ratings[outcome.side_b] = rating_b + state.k_factor * (outcome.result_b - expected_b)
    return EloState(
        ratings=ratings,
        k_factor=state.k_factor,
        battles_applied=state.battles_applied + 1,
    )


# --- combined scoring and gold selection -------------------------------------


@dataclass
class ScoredAnswer:
    problem_id: str
    author: str
    response: Response
    local_scores: dict[str, float] = field(default_factory=dict)
    elo_expectations: dict[str, float] = field(default_factory=dict)
    final_score: Optional[float] = None


def final_score(answer: ScoredAnswer, state: EloState, alpha_score: float) -> float:
    """Mixture of rating expectation and vote share, summed over opponents.

    Each opponent contributes alpha * expected-win + (1 - alpha) * vote
    share, so the total lives in [0, opponents]. The expectation side is
    filled from the rating state; a pre-populated expectation map must
    cover exactly the same opponents as the vote shares.
    """
    if not 0.0 <= alpha_score <= 1.0:
        raise ValueError(f"alpha_score {alpha_score} outside [0, 1]")
    opponents = sorted(answer.local_scores)
    if answer.elo_expectations and set(answer.elo_expectations) != set(opponents):
        raise OpponentMismatch(
            f"{answer.problem_id}/{answer.author}: expectation opponents "
            f"{sorted(answer.elo_expectations)} != vote opponents {opponents}"
        )
    if answer.author not in state.ratings:
        raise UnknownMember(answer.author)
    total = 0.0
    for opponent in opponents:
        if opponent not in state.ratings:
            raise UnknownMember(opponent)
        if opponent not in answer.elo_expectations:
            expected, _ = elo_expectation(state.ratings[answer.author], state.ratings[opponent])
            answer.elo_expectations[opponent] = expected
        total += alpha_score * answer.elo_expectations[opponent]
        total += (1.0 - alpha_score) * answer.local_scores[opponent]
    answer.final_score = total
    return total


@dataclass(frozen=True)
class GoldAnswer:
    problem_id: str
    author: str
    reasoning: str
    final_answer: str
    final_score: float

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "author": self.author,
            "reasoning": self.reasoning,
            "final_answer": self.final_answer,
            "final_score": self.final_score,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GoldAnswer":
        return cls(
            problem_id=data["problem_id"],
            author=data["author"],
            reasoning=data["reasoning"],
            final_answer=data["final_answer"],
            final_score=data["final_score"],
        )


def select_gold(
    problem: Problem,
    answers: Sequence[ScoredAnswer],
    committee_order: Sequence[str],
) -> GoldAnswer:
    """Promote the highest-scoring answer with a parseable boxed value.

    Ties break toward the earliest member in committee order. Scored
    answers without a boxed final value are skipped; if none qualify the
    problem has no gold standard and NoBoxedAnswer is raised.
    """
    if not answers:
        raise NoAnswers(problem.problem_id)
    for answer in answers:
        if answer.final_score is None:
            raise ValueError(f"{answer.author}: final_score not computed")
    position = {member: i for i, member in enumerate(committee_order)}
    ranked = sorted(
        answers,
        key=lambda a: (-a.final_score, position.get(a.author, len(position))),
    )
    for candidate in ranked:
        if candidate.response.final_answer is not None:
            gold = GoldAnswer(
                problem_id=problem.problem_id,
                author=candidate.author,
                reasoning=candidate.response.reasoning,
                final_answer=candidate.response.final_answer,
                final_score=candidate.final_score,
            )
            problem.reference_answer = gold.final_answer
            return gold
    raise NoBoxedAnswer(problem.problem_id)
