"""The nine pipeline stages, each a pure function of prior artifacts.

Every stage reads only committed JSONL artifacts from earlier stages plus
the config, and returns records for its own artifact, so reruns from any
checkpoint reproduce identical bytes. Stage RNG streams derive from
(run seed, stage name) and never leak across stages.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

from ..backends import Backend, GenerationConfig
from ..committee import RoundPlan, schedule_rounds, generation_grid
from ..errors import ForgeError, NoProblemsFound, StageFailed
from ..filtering import (
    Response,
    defect_filter,
    dedup,
    judge_quality,
    quality_gate,
)
from ..losskernel import LossConfig, LossInputs, ToyPolicy, dpo_loss, nll_loss, toy_logprob, total_loss
from ..pairbuilder import PAIR_SCHEMA, build_iteration_dataset
from ..prompts import PROBLEM_ANSWER, load_template
from ..rating import (
    EloState,
    GoldAnswer,
    ScoredAnswer,
    final_score,
    run_battle,
    select_gold,
    update_ratings,
)
from ..selection import EmbeddedProblem, kcenter_select
from ..synthesis import Problem, STATUS_SELECTED, parse_problems, render_generation_prompt
from ..textutil import derive_seed
from .artifacts import read_jsonl
from .config import PipelineConfig
from .overlap import corpus_overlap

# Committee answering and defect rollouts mirror the alignment sampling
# temperature/top-p rather than the synthesis grid.
ROLLOUT_TEMPERATURE = 0.7
ROLLOUT_TOP_P = 0.8


@dataclass
class StageOutput:
    schema: str
    records: list[dict]
    stats: dict = field(default_factory=dict)
    aux: dict[str, tuple[str, list[dict]]] = field(default_factory=dict)


@dataclass
class StageContext:
    config: PipelineConfig
    run_dir: Path
    backends: dict[str, Backend]
    base_seed: int

    def artifact(self, stage: str) -> tuple[str, list[dict]]:
        return read_jsonl(self.run_dir / f"{stage}.jsonl")

    def load_problems(self, stage: str) -> list[Problem]:
        _, records = self.artifact(stage)
        return [Problem.from_dict(r) for r in records]

    def rollout_config(self) -> GenerationConfig:
        return GenerationConfig(
            temperature=ROLLOUT_TEMPERATURE,
            top_p=ROLLOUT_TOP_P,
            max_tokens=self.config.synthesis.max_tokens,
        )


def _discard_record(problem: Problem, stage: str) -> dict:
    return {
        "problem_id": problem.problem_id,
        "stage": stage,
        "reason": problem.discard_reason,
        "score": problem.quality_score,
        "max_rouge": problem.metadata.get("max_rouge"),
    }


# --- synthesize ---------------------------------------------------------------


def stage_synthesize(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    plans = schedule_rounds(cfg.committee)
    grid = generation_grid(cfg.committee, max_tokens=cfg.synthesis.max_tokens)
    calls_per_round = cfg.synthesis.calls_per_round or len(grid)
    prompt = render_generation_prompt(cfg.synthesis.problems_per_call, cfg.prompts_dir)

    jobs: list[tuple[RoundPlan, int, GenerationConfig]] = []
    for plan in plans:
        for call in range(calls_per_round):
            gen_cfg = replace(
                grid[call % len(grid)],
                seed=derive_seed(ctx.base_seed, "generate", plan.round_index, call),
            )
            jobs.append((plan, call, gen_cfg))

    def run_job(job: tuple[RoundPlan, int, GenerationConfig]):
        plan, _, gen_cfg = job
        exchange = ctx.backends[plan.examiner].chat(prompt, gen_cfg)
        try:
            return parse_problems(exchange.response_text, plan, gen_cfg)
        except NoProblemsFound:
            return None

    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(run_job, jobs))

    problems: list[Problem] = []
    parse_losses = 0
    empty_calls = 0
    for result in results:
        if result is None:
            empty_calls += 1
            continue
        parse_losses += result.skipped
        problems.extend(result.problems)

    if not problems:
        raise StageFailed("synthesize: no problems parsed from any generation call")
    return StageOutput(
        schema="problems.v1",
        records=[p.to_dict() for p in problems],
        stats={
            "problems": len(problems),
            "calls": len(jobs),
            "parse_losses": parse_losses,
            "empty_calls": empty_calls,
        },
    )


# --- filter -------------------------------------------------------------------


def stage_filter(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    problems = ctx.load_problems("synthesize")
    plans = {plan.round_index: plan for plan in schedule_rounds(cfg.committee)}
    discards: list[dict] = []

    kept, duplicates = dedup(problems, cfg.thresholds.dedup_rouge)
    discards.extend(_discard_record(p, "filter") for p in duplicates)

    judged: list[Problem] = []
    for problem in kept:
        judges = plans[problem.round_index].judges
        _, aggregate = judge_quality(
            problem,
            judges,
            ctx.backends,
            base_seed=ctx.base_seed,
            template_dir=cfg.prompts_dir,
        )
        if aggregate is None:
            discards.append(_discard_record(problem, "filter"))
        else:
            judged.append(problem)

    gated, low_quality = quality_gate(judged, cfg.thresholds.quality_min)
    discards.extend(_discard_record(p, "filter") for p in low_quality)

    screened: list[Problem] = []
    already_solved = 0
    no_reference = 0
    base_model = ctx.backends[cfg.base_model]
    for problem in gated:
        if problem.reference_answer is None:
            problem.discard("no_reference")
            discards.append(_discard_record(problem, "filter"))
            no_reference += 1
            continue
        _, retained = defect_filter(
            problem,
            base_model,
            cfg.thresholds.defect_n,
            ctx.rollout_config(),
            base_seed=ctx.base_seed,
            template_dir=cfg.prompts_dir,
        )
        if retained:
            screened.append(problem)
        else:
            discards.append(_discard_record(problem, "filter"))
            already_solved += 1

    if not screened:
        raise StageFailed("filter: every problem was discarded")
    return StageOutput(
        schema="problems.v1",
        records=[p.to_dict() for p in screened],
        stats={
            "in": len(problems),
            "kept": len(screened),
            "duplicates": len(duplicates),
            "unjudgeable": len(kept) - len(judged),
            "low_quality": len(low_quality),
            "no_reference": no_reference,
            "already_solved": already_solved,
        },
        aux={"discards": ("discards.v1", discards)},
    )


# --- select -------------------------------------------------------------------


def stage_select(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    problems = ctx.load_problems("filter")
    embedder = ctx.backends[cfg.embedding_backend]
    vectors = embedder.embed([p.text for p in problems])
    points = [
        EmbeddedProblem(problem_id=p.problem_id, vector=tuple(v))
        for p, v in zip(problems, vectors)
    ]
    result = kcenter_select(points, cfg.selection_budget)
    records = []
    for rank, (problem_id, dist) in enumerate(
        zip(result.selected_ids, result.min_dists_at_selection)
    ):
        records.append(
            {
                "problem_id": problem_id,
                "selection_rank": rank,
                "min_dist_at_selection": None if dist != dist else dist,
            }
        )
    return StageOutput(
        schema="selected.v1",
        records=records,
        stats={
            "corpus": len(points),
            "selected": len(result.selected_ids),
            "coverage_radius": result.coverage_radius,
            "embedding_dim": len(points[0].vector) if points else 0,
        },
    )


def _selected_problems(ctx: StageContext) -> list[Problem]:
    problems = {p.problem_id: p for p in ctx.load_problems("filter")}
    _, selected = ctx.artifact("select")
    out = []
    for record in sorted(selected, key=lambda r: r["problem_id"]):
        problem = problems[record["problem_id"]]
        problem.status = STATUS_SELECTED
        out.append(problem)
    return out


# --- answer -------------------------------------------------------------------


def stage_answer(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    problems = _selected_problems(ctx)
    members = cfg.committee.members
    template = load_template(PROBLEM_ANSWER, cfg.prompts_dir)
    jobs = [(problem, member) for problem in problems for member in members]

    def answer_one(job: tuple[Problem, str]) -> dict:
        problem, member = job
        gen_cfg = replace(
            ctx.rollout_config(),
            seed=derive_seed(ctx.base_seed, "answer", problem.problem_id, member),
        )
        prompt = [{"role": "user", "content": template.format(problem=problem.text)}]
        exchange = ctx.backends[member].chat(prompt, gen_cfg)
        response = Response.from_raw(exchange.response_text, 0)
        return {
            "problem_id": problem.problem_id,
            "author": member,
            "raw_text": response.raw_text,
            "reasoning": response.reasoning,
            "final_answer": response.final_answer,
        }

    with ThreadPoolExecutor(max_workers=8) as pool:
        records = list(pool.map(answer_one, jobs))

    boxed = sum(1 for r in records if r["final_answer"] is not None)
    return StageOutput(
        schema="answers.v1",
        records=records,
        stats={"answers": len(records), "with_boxed": boxed, "problems": len(problems)},
    )


# --- battle -------------------------------------------------------------------


def _answers_by_problem(ctx: StageContext) -> dict[str, dict[str, Response]]:
    _, records = ctx.artifact("answer")
    table: dict[str, dict[str, Response]] = {}
    for record in records:
        response = Response(
            raw_text=record["raw_text"],
            sample_index=0,
            reasoning=record["reasoning"],
            final_answer=record["final_answer"],
        )
        table.setdefault(record["problem_id"], {})[record["author"]] = response
    return table


def stage_battle(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    members = cfg.committee.members
    if len(members) < 3:
        raise StageFailed(
            "battle: committees of 2 leave no eligible judges for any pair"
        )
    problems = {p.problem_id: p for p in _selected_problems(ctx)}
    answers = _answers_by_problem(ctx)

    # Canonical order: (round_index, problem_id, member pair in config order).
    battles = []
    for problem_id in sorted(
        problems, key=lambda pid: (problems[pid].round_index, pid)
    ):
        for side_a, side_b in combinations(members, 2):
            battles.append((problems[problem_id], side_a, side_b))

    def fight(job: tuple[Problem, str, str]):
        problem, side_a, side_b = job
        judges = [m for m in members if m not in (side_a, side_b)]
        try:
            return run_battle(
                problem,
                side_a,
                answers[problem.problem_id][side_a],
                side_b,
                answers[problem.problem_id][side_b],
                judges,
                ctx.backends,
                base_seed=ctx.base_seed,
                template_dir=cfg.prompts_dir,
            )
        except ForgeError:
            return None

    with ThreadPoolExecutor(max_workers=8) as pool:
        outcomes = list(pool.map(fight, battles))

    state = EloState.initial(
        members, rating=cfg.rating.initial_rating, k_factor=cfg.rating.k_factor
    )
    records = []
    snapshots = []
    skipped = 0
    current_round = None
    for job, outcome in zip(battles, outcomes):
        problem = job[0]
        if outcome is None:
            skipped += 1
            continue
        if current_round is None:
            current_round = problem.round_index
        elif problem.round_index != current_round:
            snapshots.append(
                {
                    "after_round": current_round,
                    "ratings": dict(state.ratings),
                    "battles_applied": state.battles_applied,
                }
            )
            current_round = problem.round_index
        before = {
            outcome.side_a: state.ratings[outcome.side_a],
            outcome.side_b: state.ratings[outcome.side_b],
        }
        state = update_ratings(state, outcome)
        records.append(
            {
                "problem_id": outcome.problem_id,
                "round_index": problem.round_index,
                "side_a": outcome.side_a,
                "side_b": outcome.side_b,
                "ballots": [b.to_dict() for b in outcome.ballots],
                "votes_a": outcome.votes_a,
                "votes_b": outcome.votes_b,
                "result_a": outcome.result_a,
                "ratings_before": before,
                "ratings_after": {
                    outcome.side_a: state.ratings[outcome.side_a],
                    outcome.side_b: state.ratings[outcome.side_b],
                },
            }
        )
    snapshots.append(
        {
            "after_round": current_round,
            "ratings": dict(state.ratings),
            "battles_applied": state.battles_applied,
        }
    )
    if not records:
        raise StageFailed("battle: no battle produced a valid ballot")
    return StageOutput(
        schema="battles.v1",
        records=records,
        stats={
            "battles": len(records),
            "skipped": skipped,
            "final_ratings": dict(state.ratings),
            "battles_applied": state.battles_applied,
        },
        aux={"ratings": ("ratings.v1", snapshots)},
    )


# --- gold ---------------------------------------------------------------------


def stage_gold(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    members = cfg.committee.members
    problems = {p.problem_id: p for p in _selected_problems(ctx)}
    answers = _answers_by_problem(ctx)
    _, battles = ctx.artifact("battle")
    _, snapshots = read_jsonl(ctx.run_dir / "battle_ratings.jsonl")
    state = EloState(
        ratings=dict(snapshots[-1]["ratings"]),
        k_factor=cfg.rating.k_factor,
        battles_applied=snapshots[-1]["battles_applied"],
    )

    shares: dict[str, dict[str, dict[str, float]]] = {}
    for record in battles:
        outcome_votes = record["votes_a"] + record["votes_b"]
        if outcome_votes == 0:
            continue
        share_a = record["votes_a"] / outcome_votes
        pid = record["problem_id"]
        shares.setdefault(pid, {}).setdefault(record["side_a"], {})[record["side_b"]] = share_a
        shares.setdefault(pid, {}).setdefault(record["side_b"], {})[record["side_a"]] = 1.0 - share_a

    records = []
    discards = []
    no_gold = 0
    for problem_id in sorted(problems):
        problem = problems[problem_id]
        scored = []
        for member in members:
            if member not in answers.get(problem_id, {}):
                continue
            answer = ScoredAnswer(
                problem_id=problem_id,
                author=member,
                response=answers[problem_id][member],
                local_scores=shares.get(problem_id, {}).get(member, {}),
            )
            final_score(answer, state, cfg.rating.alpha_score)
            scored.append(answer)
        try:
            gold = select_gold(problem, scored, members)
        except ForgeError:
            problem.discard("no_gold")
            discards.append(_discard_record(problem, "gold"))
            no_gold += 1
            continue
        records.append(gold.to_dict())

    if not records:
        raise StageFailed("gold: no problem produced a gold answer")
    scores = [r["final_score"] for r in records]
    return StageOutput(
        schema="gold.v1",
        records=records,
        stats={
            "golds": len(records),
            "no_gold": no_gold,
            "mean_final_score": sum(scores) / len(scores),
        },
        aux={"discards": ("discards.v1", discards)},
    )


# --- pairs --------------------------------------------------------------------


def stage_pairs(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    problems = {p.problem_id: p for p in _selected_problems(ctx)}
    _, gold_records = ctx.artifact("gold")
    golds = {r["problem_id"]: GoldAnswer.from_dict(r) for r in gold_records}

    with_gold = []
    for problem_id, gold in sorted(golds.items()):
        problem = problems[problem_id]
        problem.reference_answer = gold.final_answer
        with_gold.append(problem)

    dataset = build_iteration_dataset(
        with_gold,
        golds,
        ctx.backends[cfg.base_model],
        cfg.iteration,
        base_seed=ctx.base_seed,
        template_dir=cfg.prompts_dir,
    )
    return StageOutput(
        schema=PAIR_SCHEMA,
        records=[pair.to_record() for pair in dataset.pairs],
        stats=dataset.stats,
    )


# --- losscheck ----------------------------------------------------------------

LOSS_FIXTURE_SCHEMA = "loss_fixtures.v1"
_TOY_VOCAB = tuple(f"t{i:02d}" for i in range(32))
_TOY_CONTEXT = "seq"


def _toy_tokens(text: str) -> tuple[str, ...]:
    words = text.split()
    if not words:
        return (_TOY_VOCAB[0],)
    return tuple(_TOY_VOCAB[derive_seed("tok", w) % len(_TOY_VOCAB)] for w in words)


def _fixture_record(index: int, source: str, inputs: LossInputs, loss_cfg: LossConfig) -> dict:
    return {
        "record_id": index,
        "source": source,
        "policy_logp_chosen": inputs.policy_logp_chosen,
        "policy_logp_rejected": inputs.policy_logp_rejected,
        "ref_logp_chosen": inputs.ref_logp_chosen,
        "ref_logp_rejected": inputs.ref_logp_rejected,
        "chosen_token_count": inputs.chosen_token_count,
        "alpha_nll": loss_cfg.alpha_nll,
        "beta": loss_cfg.beta,
        "expected_dpo": dpo_loss(inputs, loss_cfg),
        "expected_nll": nll_loss(inputs),
        "expected_total": total_loss(inputs, loss_cfg),
    }


def build_loss_fixtures(
    pair_records: list[dict],
    loss_cfg: LossConfig,
    *,
    base_seed: int = 0,
    min_records: int = 128,
) -> list[dict]:
    """Fixture records from pairs via the toy policy, padded with synthetic
    probe records so downstream parity checks always have enough data.

    Log-probabilities score completion tokens only; prompt tokens are
    excluded by construction. Token counts ride along as data.
    """
    policy = ToyPolicy.random(
        [_TOY_CONTEXT], _TOY_VOCAB, random.Random(derive_seed(base_seed, "policy")), scale=2.0
    )
    reference = ToyPolicy.random(
        [_TOY_CONTEXT], _TOY_VOCAB, random.Random(derive_seed(base_seed, "reference")), scale=2.0
    )
    records = []
    for record in pair_records:
        chosen = _toy_tokens(
            record["chosen"]["reasoning"] + " " + record["chosen"]["answer"]
        )
        rejected = _toy_tokens(
            record["rejected"]["reasoning"] + " " + record["rejected"]["answer"]
        )
        inputs = LossInputs(
            policy_logp_chosen=toy_logprob(policy, _TOY_CONTEXT, chosen),
            policy_logp_rejected=toy_logprob(policy, _TOY_CONTEXT, rejected),
            ref_logp_chosen=toy_logprob(reference, _TOY_CONTEXT, chosen),
            ref_logp_rejected=toy_logprob(reference, _TOY_CONTEXT, rejected),
            chosen_token_count=len(chosen),
        )
        records.append(_fixture_record(len(records), "pair", inputs, loss_cfg))

    rng = random.Random(derive_seed(base_seed, "probe"))
    while len(records) < min_records:
        inputs = LossInputs(
            policy_logp_chosen=rng.uniform(-400.0, 0.0),
            policy_logp_rejected=rng.uniform(-400.0, 0.0),
            ref_logp_chosen=rng.uniform(-400.0, 0.0),
            ref_logp_rejected=rng.uniform(-400.0, 0.0),
            chosen_token_count=rng.randint(1, 512),
        )
        records.append(_fixture_record(len(records), "probe", inputs, loss_cfg))
    return records


def stage_losscheck(ctx: StageContext) -> StageOutput:
    cfg = ctx.config
    _, pair_records = ctx.artifact("pairs")
    records = build_loss_fixtures(
        pair_records,
        cfg.loss,
        base_seed=ctx.base_seed,
        min_records=cfg.losscheck_min_records,
    )
    totals = [r["expected_total"] for r in records]
    return StageOutput(
        schema=LOSS_FIXTURE_SCHEMA,
        records=records,
        stats={
            "records": len(records),
            "pair_records": len(pair_records),
            "mean_total": sum(totals) / len(totals) if totals else 0.0,
        },
    )


def verify_loss_fixtures(path: str | Path, tolerance: float = 1e-9) -> dict:
    """Recompute every fixture's losses and report the worst deviation."""
    schema, records = read_jsonl(Path(path))
    if schema != LOSS_FIXTURE_SCHEMA:
        raise StageFailed(f"unexpected fixture schema {schema!r}")
    worst = 0.0
    for record in records:
        inputs = LossInputs(
            policy_logp_chosen=record["policy_logp_chosen"],
            policy_logp_rejected=record["policy_logp_rejected"],
            ref_logp_chosen=record["ref_logp_chosen"],
            ref_logp_rejected=record["ref_logp_rejected"],
            chosen_token_count=record["chosen_token_count"],
        )
        loss_cfg = LossConfig(alpha_nll=record["alpha_nll"], beta=record["beta"])
        worst = max(worst, abs(total_loss(inputs, loss_cfg) - record["expected_total"]))
    return {
        "n_records": len(records),
        "max_abs_diff": worst,
        "passed": worst <= tolerance,
        "tolerance": tolerance,
    }


# --- overlap ------------------------------------------------------------------


def stage_overlap(ctx: StageContext, corpus_path: str | Path | None = None) -> StageOutput:
    corpus = corpus_path or ctx.config.overlap_corpus
    if not corpus:
        raise StageFailed("overlap: no corpus configured; pass one explicitly")
    problems = _selected_problems(ctx)
    report = corpus_overlap(problems, corpus)
    flagged = set(report.flagged)
    records = [
        {
            "problem_id": problem_id,
            "max_rouge": score,
            "bucket": min(9, int(score * 10)),
            "flagged": problem_id in flagged,
        }
        for problem_id, score in report.per_problem
    ]
    return StageOutput(
        schema="overlap.v1",
        records=records,
        stats={
            "problems": len(records),
            "histogram": list(report.histogram),
            "flagged": len(flagged),
            "corpus_path": str(corpus),
        },
    )


STAGE_FUNCTIONS = {
    "synthesize": stage_synthesize,
    "filter": stage_filter,
    "select": stage_select,
    "answer": stage_answer,
    "battle": stage_battle,
    "gold": stage_gold,
    "pairs": stage_pairs,
    "losscheck": stage_losscheck,
    "overlap": stage_overlap,
}
