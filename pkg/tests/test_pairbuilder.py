import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mathforge.backends import GenerationConfig, mock_backend
from mathforge.errors import GoldMismatch, UnlabeledRollout
from mathforge.filtering import Response, RolloutSet, reward
from mathforge.pairbuilder import (
    IterationConfig,
    build_iteration_dataset,
    build_pairs,
    collect_negatives,
    label_rollouts,
    sample_responses,
)
from mathforge.prompts import PROBLEM_ANSWER, load_template
from mathforge.rating import GoldAnswer
from mathforge.synthesis import Problem
from mathforge.textutil import content_hash
from toyworld import make_world, run_iteration, uniform_policy


def make_problem(text="build pairs for this", reference="42"):
    return Problem(
        problem_id=content_hash(text),
        text=text,
        source_member="alpha",
        round_index=0,
        gen_config=GenerationConfig(),
        reference_answer=reference,
    )


def make_gold(problem, answer="42"):
    return GoldAnswer(
        problem_id=problem.problem_id,
        author="beta",
        reasoning="careful derivation",
        final_answer=answer,
        final_score=1.5,
    )


def rollouts_from_answers(problem, answers):
    responses = [
        Response(
            raw_text=f"r{i} \\boxed{{{a}}}" if a is not None else f"r{i} no box",
            sample_index=i,
            reasoning=f"r{i}",
            final_answer=a,
        )
        for i, a in enumerate(answers)
    ]
    return RolloutSet(problem_id=problem.problem_id, responses=responses, n_requested=len(answers))


class TestSampleResponses:
    def test_scripted_constant_answer(self):
        problem = make_problem()
        prompt = load_template(PROBLEM_ANSWER).format(problem=problem.text)
        backend = mock_backend(1, script={prompt: "easy. \\boxed{42}"})
        cfg = IterationConfig(n_samples=4)
        rollouts = sample_responses(problem, backend, cfg)
        assert len(rollouts.responses) == 4
        assert all(r.final_answer == "42" for r in rollouts.responses)

    def test_default_sample_count_is_thirty_two(self):
        problem = make_problem()
        rollouts = sample_responses(problem, mock_backend(3), IterationConfig())
        assert len(rollouts.responses) == 32
        assert IterationConfig().n_samples == 32

    def test_reasoning_excludes_box(self):
        problem = make_problem()
        rollouts = sample_responses(problem, mock_backend(3), IterationConfig(n_samples=3))
        for r in rollouts.responses:
            assert "\\boxed" not in r.reasoning
            assert r.final_answer is not None

    def test_defaults_match_iteration_protocol(self):
        cfg = IterationConfig()
        assert cfg.temperature == 0.7
        assert cfg.top_p == 0.8
        assert cfg.max_pairs_per_problem == 10

    def test_reference_required(self):
        with pytest.raises(ValueError):
            sample_responses(make_problem(reference=None), mock_backend(1), IterationConfig())


class TestLabelRollouts:
    def test_elementwise_rewards(self):
        problem = make_problem()
        rollouts = rollouts_from_answers(problem, ["42", "41", "42"])
        label_rollouts(rollouts, "42")
        assert [r.reward for r in rollouts.responses] == [1, 0, 1]

    def test_uniform_success(self):
        rollouts = rollouts_from_answers(make_problem(), ["42"] * 5)
        label_rollouts(rollouts, "42")
        assert all(r.reward == 1 for r in rollouts.responses)

    def test_missing_boxes_all_fail(self):
        rollouts = rollouts_from_answers(make_problem(), [None, None])
        label_rollouts(rollouts, "42")
        assert all(r.reward == 0 for r in rollouts.responses)


class TestCollectNegatives:
    def test_filters_by_reward(self):
        rollouts = rollouts_from_answers(make_problem(), ["42", "1", "42", "2"])
        label_rollouts(rollouts, "42")
        negatives = collect_negatives(rollouts)
        assert [r.sample_index for r in negatives] == [1, 3]

    def test_all_correct_empty(self):
        rollouts = rollouts_from_answers(make_problem(), ["42", "42"])
        label_rollouts(rollouts, "42")
        assert collect_negatives(rollouts) == []

    def test_all_wrong_returns_everything(self):
        rollouts = rollouts_from_answers(make_problem(), ["1", "2", "3"])
        label_rollouts(rollouts, "42")
        assert len(collect_negatives(rollouts)) == 3

    def test_unlabeled_rejected(self):
        rollouts = rollouts_from_answers(make_problem(), ["42"])
        with pytest.raises(UnlabeledRollout):
            collect_negatives(rollouts)


class TestBuildPairs:
    def test_two_negatives_two_pairs(self):
        problem = make_problem()
        gold = make_gold(problem)
        rollouts = rollouts_from_answers(problem, ["1", "2"])
        label_rollouts(rollouts, gold.final_answer)
        pairs = build_pairs(problem, gold, collect_negatives(rollouts), IterationConfig())
        assert len(pairs) == 2

    def test_cap_at_k_keeps_first_ten(self):
        problem = make_problem()
        gold = make_gold(problem)
        rollouts = rollouts_from_answers(problem, ["x"] * 12)
        label_rollouts(rollouts, gold.final_answer)
        pairs = build_pairs(problem, gold, collect_negatives(rollouts), IterationConfig())
        assert len(pairs) == 10
        assert [p.rejected_sample_index for p in pairs] == list(range(10))

    def test_zero_negatives_zero_pairs(self):
        problem = make_problem()
        pairs = build_pairs(problem, make_gold(problem), [], IterationConfig())
        assert pairs == []

    def test_gold_mismatch_rejected(self):
        problem = make_problem("one problem")
        stranger = make_gold(make_problem("a different problem"))
        with pytest.raises(GoldMismatch):
            build_pairs(problem, stranger, [], IterationConfig())

    def test_pair_record_contract_fields(self):
        problem = make_problem()
        gold = make_gold(problem)
        rollouts = rollouts_from_answers(problem, ["7"])
        label_rollouts(rollouts, gold.final_answer)
        (pair,) = build_pairs(problem, gold, collect_negatives(rollouts), IterationConfig())
        record = pair.to_record()
        assert set(record) == {"problem_id", "prompt", "chosen", "rejected", "iteration"}
        assert set(record["chosen"]) == {"reasoning", "answer"}
        assert set(record["rejected"]) == {"reasoning", "answer"}
        assert record["prompt"] == problem.text


class TestBuildIterationDataset:
    def scripted_world(self, failure_rates):
        """One problem per failure rate, all sharing the gold answer '9'."""
        problems, golds = [], {}
        for i, _ in enumerate(failure_rates):
            problem = make_problem(f"scripted problem {i}", reference="9")
            problems.append(problem)
            golds[problem.problem_id] = make_gold(problem, answer="9")
        return problems, golds

    def test_stats_count_problems_with_pairs(self):
        problems, golds = self.scripted_world([0.0, 0.5, 1.0])

        # A counting backend keyed on the problem body fails each problem at
        # exactly its configured rate.
        from mathforge.backends import Backend, BackendProfile

        rates = {p.problem_id: r for p, r in zip(problems, [0.0, 0.5, 1.0])}

        class RateBackend(Backend):
            def __init__(self):
                super().__init__(BackendProfile(member_id="m", max_in_flight=4))
                self.counters = {}

            def _complete(self, messages, config):
                body = messages[-1]["content"]
                problem = next(p for p in problems if p.text in body)
                count = self.counters.get(problem.problem_id, 0)
                self.counters[problem.problem_id] = count + 1
                n_fail = round(rates[problem.problem_id] * 4)
                value = "0" if count < n_fail else "9"
                return f"try. \\boxed{{{value}}}"

            def _embed(self, texts):  # pragma: no cover
                raise NotImplementedError

        dataset = build_iteration_dataset(
            problems, golds, RateBackend(), IterationConfig(n_samples=4)
        )
        assert dataset.stats["problems_in"] == 3
        assert dataset.stats["problems_with_pairs"] == 2
        assert dataset.stats["pairs_total"] == 2 + 4
        assert dataset.stats["mean_failure_rate"] == pytest.approx(0.5)

    def test_empty_problem_list(self):
        dataset = build_iteration_dataset([], {}, mock_backend(1), IterationConfig(n_samples=2))
        assert dataset.pairs == []
        assert dataset.stats["problems_in"] == 0
        assert dataset.stats["pairs_total"] == 0

    def test_missing_gold_rejected(self):
        problem = make_problem()
        with pytest.raises(GoldMismatch):
            build_iteration_dataset([problem], {}, mock_backend(1), IterationConfig(n_samples=2))

    def test_dataset_deterministic_on_mock(self):
        problems, golds = self.scripted_world([0.5])

        def build():
            return build_iteration_dataset(
                problems, golds, mock_backend(5), IterationConfig(n_samples=6), base_seed=3
            )

        a, b = build(), build()
        assert [p.to_record() for p in a.pairs] == [p.to_record() for p in b.pairs]

    def test_every_pair_satisfies_reward_invariant(self):
        problems, golds = self.scripted_world([1.0])
        dataset = build_iteration_dataset(
            problems, golds, mock_backend(5), IterationConfig(n_samples=8), base_seed=3
        )
        for pair in dataset.pairs:
            gold = golds[pair.problem_id]
            assert reward(pair.chosen_answer, gold.final_answer) == 1
            assert reward(pair.rejected_answer, gold.final_answer) == 0

    @given(st.lists(st.integers(min_value=0, max_value=1), min_size=1, max_size=24))
    @settings(max_examples=60, deadline=None)
    def test_pair_count_is_min_k_failures(self, pattern):
        problem = make_problem()
        gold = make_gold(problem)
        rollouts = rollouts_from_answers(
            problem, [gold.final_answer if bit else "wrong" for bit in pattern]
        )
        label_rollouts(rollouts, gold.final_answer)
        negatives = collect_negatives(rollouts)
        pairs = build_pairs(problem, gold, negatives, IterationConfig())
        failures = pattern.count(0)
        assert len(pairs) == min(10, failures)


class TestToyIterationTrend:
    def test_pair_counts_non_increasing_as_policy_improves(self):
        problems, golds = make_world(n_problems=5)
        policy = uniform_policy(problems)
        initial = policy.copy()
        counts = []
        for t in range(3):
            metrics = run_iteration(
                policy,
                problems,
                golds,
                iteration_index=t,
                initial_reference=initial,
                seed=2024,
            )
            counts.append(metrics.pairs)
        assert counts[0] > 0
        assert counts[0] >= counts[1] >= counts[2]
