import math
import random

import mpmath
import numpy as np
import pytest

from mathforge.errors import NonFiniteInput, UnknownToken
from mathforge.losskernel import (
    LossConfig,
    LossInputs,
    ToyPairExample,
    ToyPolicy,
    batch_mean_loss,
    dpo_loss,
    grad_check,
    nll_loss,
    toy_batch_gradient,
    toy_batch_loss,
    toy_logprob,
    total_loss,
)

mpmath.mp.dps = 50


def oracle_dpo(policy_c, policy_r, ref_c, ref_r, beta):
    """-log sigma(z) at 50 decimal digits."""
    z = mpmath.mpf(beta) * ((mpmath.mpf(policy_c) - ref_c) - (mpmath.mpf(policy_r) - ref_r))
    return float(mpmath.log(1 + mpmath.e ** (-z)))


def inputs(pc=0.0, pr=0.0, rc=0.0, rr=0.0, count=1):
    return LossInputs(
        policy_logp_chosen=pc,
        policy_logp_rejected=pr,
        ref_logp_chosen=rc,
        ref_logp_rejected=rr,
        chosen_token_count=count,
    )


class TestDpoLoss:
    def test_identity_inputs_give_ln2(self):
        assert dpo_loss(inputs(), LossConfig()) == pytest.approx(math.log(2), abs=1e-12)

    def test_fixture_case_against_mpmath(self):
        # chosen log-ratio 2.0, rejected log-ratio -1.0, beta 0.1 -> z = 0.3
        value = dpo_loss(inputs(pc=2.0, pr=-1.0), LossConfig(beta=0.1))
        assert value == pytest.approx(oracle_dpo(2.0, -1.0, 0.0, 0.0, 0.1), abs=1e-12)
        assert value == pytest.approx(0.554355, abs=1e-5)

    def test_monotone_to_zero_as_margin_grows(self):
        cfg = LossConfig(beta=0.1)
        values = [dpo_loss(inputs(pc=pc), cfg) for pc in (0, 10, 100, 1000, 10000)]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(0.0, abs=1e-12)

    def test_random_cases_against_mpmath(self):
        rng = random.Random(7)
        for _ in range(200):
            pc, pr, rc, rr = (rng.uniform(-50, 0) for _ in range(4))
            beta = rng.choice([0.05, 0.1, 0.5, 1.0])
            value = dpo_loss(inputs(pc, pr, rc, rr), LossConfig(beta=beta))
            assert value == pytest.approx(oracle_dpo(pc, pr, rc, rr, beta), abs=1e-10)

    def test_stable_for_extreme_margins(self):
        cfg = LossConfig(beta=1.0)
        huge_win = dpo_loss(inputs(pc=1e6), cfg)
        huge_loss = dpo_loss(inputs(pr=1e6), cfg)
        assert huge_win == 0.0
        assert huge_loss == pytest.approx(1e6)
        assert math.isfinite(huge_loss)

    def test_softplus_pair_inequality(self):
        # L(z) + L(-z) >= 2 ln 2, equality at z = 0.
        cfg = LossConfig(beta=0.1)
        for pc in (0.0, 1.0, 5.0, 40.0):
            total = dpo_loss(inputs(pc=pc), cfg) + dpo_loss(inputs(pr=pc), cfg)
            assert total >= 2 * math.log(2) - 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteInput):
            dpo_loss(inputs(pc=math.nan), LossConfig())
        with pytest.raises(NonFiniteInput):
            dpo_loss(inputs(pr=math.inf), LossConfig())


class TestNllLoss:
    def test_four_tokens_at_ln2_each(self):
        value = nll_loss(inputs(pc=-4 * math.log(2), count=4))
        assert value == pytest.approx(math.log(2), abs=1e-12)

    def test_certain_sequence_scores_zero(self):
        assert nll_loss(inputs(pc=0.0, count=8)) == 0.0

    def test_single_token_unit_case(self):
        assert nll_loss(inputs(pc=-1.0, count=1)) == 1.0

    def test_token_count_validated(self):
        with pytest.raises(ValueError):
            inputs(count=0)


class TestTotalLoss:
    def test_identity_plus_four_token_gold(self):
        value = total_loss(
            inputs(pc=-4 * math.log(2), rc=-4 * math.log(2), count=4),
            LossConfig(alpha_nll=1.0, beta=0.1),
        )
        assert value == pytest.approx(math.log(2) + math.log(2), abs=1e-10)
        assert value == pytest.approx(1.386294, abs=1e-5)

    def test_alpha_zero_reduces_to_dpo(self):
        cfg = LossConfig(alpha_nll=0.0, beta=0.1)
        case = inputs(pc=-3.0, pr=-9.0, rc=-4.0, rr=-2.0, count=7)
        assert total_loss(case, cfg) == dpo_loss(case, cfg)

    def test_linear_in_alpha(self):
        case = inputs(pc=-5.0, pr=-2.0, rc=-1.0, rr=-1.0, count=3)
        base = total_loss(case, LossConfig(alpha_nll=0.0))
        one = total_loss(case, LossConfig(alpha_nll=1.0))
        two = total_loss(case, LossConfig(alpha_nll=2.0))
        assert two - one == pytest.approx(one - base, abs=1e-12)

    def test_batch_mean_equals_mean_of_pairs(self):
        rng = random.Random(11)
        cfg = LossConfig()
        batch = [
            inputs(
                pc=rng.uniform(-40, 0),
                pr=rng.uniform(-40, 0),
                rc=rng.uniform(-40, 0),
                rr=rng.uniform(-40, 0),
                count=rng.randint(1, 30),
            )
            for _ in range(16)
        ]
        mean = batch_mean_loss(batch, cfg)
        expected = sum(total_loss(b, cfg) for b in batch) / 16
        assert mean == pytest.approx(expected, abs=1e-12)


class TestToyPolicy:
    def test_uniform_logits_closed_form(self):
        policy = ToyPolicy(vocab=("a", "b", "c", "d"), logits={"ctx": np.zeros(4)})
        value = toy_logprob(policy, "ctx", ["a", "b", "a"])
        assert value == pytest.approx(-3 * math.log(4), abs=1e-12)

    def test_dominant_logit_approaches_certainty(self):
        logits = np.array([50.0, 0.0, 0.0, 0.0])
        policy = ToyPolicy(vocab=("a", "b", "c", "d"), logits={"ctx": logits})
        assert toy_logprob(policy, "ctx", ["a", "a"]) == pytest.approx(0.0, abs=1e-12)

    def test_empty_sequence_scores_zero(self):
        policy = ToyPolicy(vocab=("a",), logits={"ctx": np.zeros(1)})
        assert toy_logprob(policy, "ctx", []) == 0.0

    def test_unknown_token_rejected(self):
        policy = ToyPolicy(vocab=("a",), logits={"ctx": np.zeros(1)})
        with pytest.raises(UnknownToken):
            toy_logprob(policy, "ctx", ["z"])

    def test_softmax_rows_normalized(self):
        rng = random.Random(1)
        policy = ToyPolicy.random(["c1", "c2"], ["a", "b", "c"], rng)
        for ctx in ("c1", "c2"):
            assert float(np.sum(policy.probs(ctx))) == pytest.approx(1.0, abs=1e-12)

    def test_params_roundtrip(self):
        rng = random.Random(2)
        policy = ToyPolicy.random(["c1", "c2"], ["a", "b"], rng)
        theta = policy.get_params()
        clone = policy.copy()
        clone.set_params(theta * 2)
        assert np.allclose(clone.get_params(), theta * 2)
        assert np.allclose(policy.get_params(), theta)


def random_batch(policy, rng, size=4):
    contexts = list(policy.contexts)
    batch = []
    for _ in range(size):
        chosen_ctx = rng.choice(contexts)
        rejected_ctx = rng.choice(contexts)
        batch.append(
            ToyPairExample(
                chosen_context=chosen_ctx,
                chosen_tokens=tuple(rng.choices(policy.vocab, k=rng.randint(1, 5))),
                rejected_context=rejected_ctx,
                rejected_tokens=tuple(rng.choices(policy.vocab, k=rng.randint(1, 5))),
                ref_logp_chosen=rng.uniform(-10, 0),
                ref_logp_rejected=rng.uniform(-10, 0),
            )
        )
    return batch


class TestGradCheck:
    def test_random_policies_pass_finite_difference_check(self):
        rng = random.Random(99)
        for _ in range(25):
            policy = ToyPolicy.random(["c1", "c2", "c3"], ["a", "b", "c", "d"], rng)
            batch = random_batch(policy, rng)
            error = grad_check(policy, batch, LossConfig(), epsilon=1e-5)
            assert error <= 1e-4

    def test_symmetric_stationary_point_has_zero_dpo_gradient(self):
        # Uniform policy, identical chosen/rejected sequences and references:
        # the preference term cannot prefer either side.
        policy = ToyPolicy(vocab=("a", "b"), logits={"ctx": np.zeros(2)})
        batch = [
            ToyPairExample(
                chosen_context="ctx",
                chosen_tokens=("a",),
                rejected_context="ctx",
                rejected_tokens=("a",),
                ref_logp_chosen=-1.0,
                ref_logp_rejected=-1.0,
            )
        ]
        grad = toy_batch_gradient(policy, batch, LossConfig(alpha_nll=0.0))
        assert np.allclose(grad, 0.0, atol=1e-12)

    def test_doubling_beta_doubles_dpo_slope_at_zero_margin(self):
        policy = ToyPolicy(vocab=("a", "b"), logits={"ctx": np.array([0.0, 0.0])})
        batch = [
            ToyPairExample(
                chosen_context="ctx",
                chosen_tokens=("a",),
                rejected_context="ctx",
                rejected_tokens=("b",),
                ref_logp_chosen=toy_logprob(policy, "ctx", ["a"]),
                ref_logp_rejected=toy_logprob(policy, "ctx", ["b"]),
            )
        ]
        grad_small = toy_batch_gradient(policy, batch, LossConfig(alpha_nll=0.0, beta=0.1))
        grad_large = toy_batch_gradient(policy, batch, LossConfig(alpha_nll=0.0, beta=0.2))
        assert np.allclose(grad_large, 2.0 * grad_small, atol=1e-12)

    def test_gradient_descends_the_loss(self):
        rng = random.Random(5)
        policy = ToyPolicy.random(["c1"], ["a", "b", "c"], rng)
        batch = random_batch(policy, rng, size=6)
        cfg = LossConfig()
        before = toy_batch_loss(policy, batch, cfg)
        grad = toy_batch_gradient(policy, batch, cfg)
        policy.set_params(policy.get_params() - 0.1 * grad)
        assert toy_batch_loss(policy, batch, cfg) < before

    def test_epsilon_range_validated(self):
        policy = ToyPolicy(vocab=("a",), logits={"ctx": np.zeros(1)})
        with pytest.raises(ValueError):
            grad_check(policy, [], LossConfig(), epsilon=1e-2)
