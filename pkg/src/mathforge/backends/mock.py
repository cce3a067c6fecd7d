"""Seeded deterministic mock backend used by every test and offline run.

The mock answers any prompt the pipeline renders, keyed on marker phrases
from the prompt templates, so a full run works end to end with no network.
All output is a pure function of (profile seed, prompt text, generation
config), which is what makes whole-pipeline runs byte-reproducible.
"""

from __future__ import annotations

import json
import random
import re
import time

from .. import prompts
from ..errors import ProviderError, ScriptMiss
from ..textutil import derive_seed, normalize_text
from .base import Backend, TransientFailure, call_with_retries
from .profiles import BackendProfile, GenerationConfig, Message

_N_PROBLEMS_RE = re.compile(r"exactly (\d+) problems")

_PROBLEM_TEMPLATES = (
    "Let f(x) = {a}x^2 - {b}x + {c}. Find the sum of the squares of the roots of f.",
    "Compute the remainder when {a}^{b} is divided by {m}.",
    "A sequence starts at {a} and each term adds the greatest digit of the previous term. Find term {b}.",
    "How many lattice points lie strictly inside the triangle with vertices (0,0), ({a},0), and (0,{b})?",
    "Find the number of positive divisors of {a} * {b}^2 that are perfect squares.",
    "Evaluate the sum of k*({a} - k) for k from 1 to {b}.",
    "A fair die is rolled {a} times. Find the numerator of the reduced probability that all rolls differ.",
    "Let S be the set of integers from 1 to {m}. How many subsets of size {a} contain no two consecutive integers?",
    "A circle of radius {a} is inscribed in a square; a chord of length {b} is drawn. Find the distance from the chord to the center.",
    "In how many ways can {a} indistinguishable balls be placed into {b} labeled boxes with no box holding more than {c}?",
    "The polynomial p(x) has integer coefficients, p({a}) = {b}, and p({b}) = {a}. Find p({c}) mod {m}.",
    "Two trains leave stations {a} km apart, at speeds {b} and {c} km/h. After how many minutes do they meet, rounded down?",
    "Find the last two digits of the product of the first {a} odd primes raised to the {b}th power.",
    "An urn holds {a} red, {b} green, and {c} blue tokens. Find the denominator of the reduced chance of drawing three distinct colors.",
    "Let T be a triangle with side lengths {a}, {b}, and {a}+{c}. Compute the floor of ten times its inradius.",
    "Define g(n) as the sum of digits of n^2 + {a}n + {b}. Find the smallest n with g(n) divisible by {c}.",
)


def canonical_answer(problem_text: str) -> str:
    """Reference answer every mock member can recompute from the text alone.

    Problem generation boxes this value, and mock solvers either reproduce
    it (a correct rollout) or perturb it (an incorrect one), which gives the
    defect filter and pair builder a realistic mix of rewards.
    """
    return str(derive_seed("canonical-answer", normalize_text(problem_text)) % 997)


class MockScript:
    """Exact-match response table keyed on the last user message.

    Entry values:
      - str: the response text.
      - {"response": str, "fail_times": n}: raise a transient failure for
        the first n calls, then respond (exercises retry paths).
      - {"error": "transport"}: always fail transiently.
      - {"error": "provider"}: raise ProviderError immediately.
    """

    def __init__(self, entries: dict[str, str | dict]):
        self._entries = dict(entries)
        self._failures_left = {
            key: int(val["fail_times"])
            for key, val in self._entries.items()
            if isinstance(val, dict) and "fail_times" in val
        }

    def lookup(self, key: str) -> str | None:
        entry = self._entries.get(key)
        if entry is None:
            return None
        if isinstance(entry, str):
            return entry
        error = entry.get("error")
        if error == "transport":
            raise TransientFailure("scripted transport failure")
        if error == "provider":
            raise ProviderError("scripted provider failure")
        if self._failures_left.get(key, 0) > 0:
            self._failures_left[key] -= 1
            raise TransientFailure("scripted transient failure")
        return entry["response"]


class MockBackend(Backend):
    """Deterministic stand-in for a chat/embedding provider."""

    def __init__(
        self,
        profile: BackendProfile,
        seed: int,
        script: MockScript | dict | None = None,
        strict: bool = False,
        embedding_dim: int = 16,
        latency: float = 0.0,
    ):
        super().__init__(profile)
        if embedding_dim < 2:
            raise ValueError("embedding_dim must be >= 2")
        self.seed = seed
        self.strict = strict
        self.embedding_dim = embedding_dim
        self.latency = latency
        if isinstance(script, dict):
            script = MockScript(script)
        self.script = script

    # -- chat ------------------------------------------------------------

    def _complete(self, messages: list[Message], config: GenerationConfig) -> str:
        if self.latency > 0:
            time.sleep(self.latency)
        key = _last_user_content(messages)

        def attempt() -> str:
            if self.script is not None:
                scripted = self.script.lookup(key)
                if scripted is not None:
                    return scripted
            if self.strict:
                raise ScriptMiss(f"no scripted response for prompt: {key[:80]!r}")
            return self._default_response(key, config)

        return call_with_retries(
            attempt,
            retry_budget=self.profile.retry_budget,
            base_delay=0.0,
        )

    def _default_response(self, prompt: str, config: GenerationConfig) -> str:
        rng = random.Random(
            derive_seed(
                self.seed,
                prompt,
                config.temperature,
                config.top_p,
                config.max_tokens,
                config.seed,
            )
        )
        if prompts.QUALITY_MARKER in prompt:
            return self._quality_verdict(prompt, rng)
        if prompts.BATTLE_MARKER in prompt:
            return self._battle_ballot(rng)
        if prompts.GENERATION_MARKER in prompt:
            return self._problem_list(prompt, rng)
        if prompts.ANSWER_MARKER in prompt:
            return self._solution(prompt, rng)
        return f"mock reply {rng.randrange(10_000)}"

    def _problem_list(self, prompt: str, rng: random.Random) -> str:
        match = _N_PROBLEMS_RE.search(prompt)
        n = int(match.group(1)) if match else 3
        items = []
        for i in range(1, n + 1):
            template = rng.choice(_PROBLEM_TEMPLATES)
            text = template.format(
                a=rng.randrange(2, 50),
                b=rng.randrange(2, 30),
                c=rng.randrange(1, 20),
                m=rng.randrange(5, 100),
            )
            items.append(f"{i}. {text}\n   Answer: \\boxed{{{canonical_answer(text)}}}")
        body = "\n".join(items)
        return f"```\n{body}\n```"

    def _quality_verdict(self, prompt: str, rng: random.Random) -> str:
        problem = _extract_problem(prompt)
        # Biased toward passing scores so default corpora survive the gate.
        score = 5 + rng.randrange(6)
        verdict = [
            {
                "instruction": problem[:120],
                "score": score,
                "reason": "clear statement with a checkable final value"
                if score >= 6
                else "statement leaves a quantity underspecified",
            }
        ]
        return json.dumps(verdict)

    def _battle_ballot(self, rng: random.Random) -> str:
        score = 1 + rng.randrange(10)
        return f"Compared against the reference, the assistant's answer rates [[{score}]]."

    def _solution(self, prompt: str, rng: random.Random) -> str:
        problem = _extract_problem(prompt)
        truth = canonical_answer(problem)
        if rng.random() < 0.55:
            answer = truth
        else:
            answer = str((int(truth) + 1 + rng.randrange(7)) % 997)
        steps = rng.randrange(2, 5)
        lines = [f"Step {k + 1}: simplify the relevant expression." for k in range(steps)]
        lines.append(f"Therefore the answer is \\boxed{{{answer}}}.")
        return "\n".join(lines)

    # -- embeddings ------------------------------------------------------

    def _embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            rng = random.Random(derive_seed(self.seed, "embed", text))
            out.append([rng.uniform(-1.0, 1.0) for _ in range(self.embedding_dim)])
        return out


def mock_backend(
    seed: int,
    script: dict | MockScript | None = None,
    *,
    member_id: str = "mock",
    strict: bool = False,
    embedding_dim: int = 16,
    latency: float = 0.0,
    max_in_flight: int = 8,
    retry_budget: int = 2,
) -> MockBackend:
    """Convenience constructor mirroring how profiles configure mocks."""
    profile = BackendProfile(
        member_id=member_id,
        max_in_flight=max_in_flight,
        retry_budget=retry_budget,
    )
    return MockBackend(
        profile,
        seed=seed,
        script=script,
        strict=strict,
        embedding_dim=embedding_dim,
        latency=latency,
    )


def _last_user_content(messages: list[Message]) -> str:
    for message in reversed(messages):
        if message.get("role") == "user":
            return message.get("content", "")
    return messages[-1].get("content", "")


def _extract_problem(prompt: str) -> str:
    marker = prompts.PROBLEM_BODY_MARKER
    idx = prompt.rfind(marker)
    if idx < 0:
        return prompt
    body = prompt[idx + len(marker):]
    # Battle prompts append further sections after the problem body.
    for stop in ("\nReference answer:", "\nAssistant's answer:"):
        cut = body.find(stop)
        if cut >= 0:
            body = body[:cut]
    return body.strip()
