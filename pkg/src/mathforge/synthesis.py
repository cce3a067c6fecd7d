"""Problem generation prompts and parsing of examiner completions."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .backends import GenerationConfig, Message
from .committee import RoundPlan
from .errors import NoProblemsFound
from .prompts import PROBLEM_GENERATION, load_template
from .textutil import content_hash, extract_boxed

STATUS_RAW = "raw"
STATUS_DEDUPED = "deduped"
STATUS_JUDGED = "judged"
STATUS_DEFECT_RETAINED = "defect_retained"
STATUS_SELECTED = "selected"
STATUS_DISCARDED = "discarded"


@dataclass
class Problem:
    """A synthesized instruction with provenance and lifecycle status."""

    problem_id: str
    text: str
    source_member: str
    round_index: int
    gen_config: GenerationConfig
    quality_score: Optional[int] = None
    reference_answer: Optional[str] = None
    status: str = STATUS_RAW
    discard_reason: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    def discard(self, reason: str) -> None:
        self.status = STATUS_DISCARDED
        self.discard_reason = reason

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "text": self.text,
            "source_member": self.source_member,
            "round_index": self.round_index,
            "gen_config": self.gen_config.to_dict(),
            "quality_score": self.quality_score,
            "reference_answer": self.reference_answer,
            "status": self.status,
            "discard_reason": self.discard_reason,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Problem":
        return cls(
            problem_id=data["problem_id"],
            text=data["text"],
            source_member=data["source_member"],
            round_index=data["round_index"],
            gen_config=GenerationConfig.from_dict(data["gen_config"]),
            quality_score=data.get("quality_score"),
            reference_answer=data.get("reference_answer"),
            status=data.get("status", STATUS_RAW),
            discard_reason=data.get("discard_reason"),
            metadata=data.get("metadata", {}),
        )


@dataclass(frozen=True)
class ParseResult:
    problems: list[Problem]
    skipped: int  # malformed items dropped (the parse-loss counter)


def render_generation_prompt(
    n_problems: int, template_dir: str | None = None
) -> list[Message]:
    if n_problems < 1:
        raise ValueError("n_problems must be >= 1")
    template = load_template(PROBLEM_GENERATION, template_dir)
    return [{"role": "user", "content": template.format(n=n_problems)}]


_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)
_ITEM_START_RE = re.compile(r"^\s*(\d+)[.)]\s+", re.MULTILINE)
_ANSWER_SPLIT_RE = re.compile(r"answer\s*:", re.IGNORECASE)


def parse_problems(raw: str, plan: RoundPlan, config: GenerationConfig) -> ParseResult:
    """Extract problems from an examiner completion.

    Fenced JSON is tried first; otherwise items come from the enumerated
    list the generation prompt asks for. Each item may end with an
    "Answer: \\boxed{...}" clause, which becomes the problem's reference
    answer and is stripped from the statement. Malformed items are skipped
    and counted, never fatal; zero parseable items raises NoProblemsFound.
    """
    body = raw
    fence = _FENCE_RE.search(raw)
    if fence:
        body = fence.group(1)

    items = _parse_json_items(body)
    skipped = 0
    if items is None:
        items, skipped = _parse_enumerated_items(body)

    problems: list[Problem] = []
    for text, answer in items:
        text = text.strip()
        if not text:
            skipped += 1
            continue
        problems.append(
            Problem(
                problem_id=content_hash(text),
                text=text,
                source_member=plan.examiner,
                round_index=plan.round_index,
                gen_config=config,
                reference_answer=answer,
            )
        )
    if not problems:
        raise NoProblemsFound("completion contained no parseable problems")
    return ParseResult(problems=problems, skipped=skipped)


def _parse_json_items(body: str) -> list[tuple[str, str | None]] | None:
    stripped = body.strip()
    if not stripped.startswith(("[", "{")):
        return None
    try:
        data = json.loads(stripped)
    except json.JSONDecodeError:
        return None
    if isinstance(data, dict):
        data = data.get("problems", [])
    if not isinstance(data, list):
        return None
    items: list[tuple[str, str | None]] = []
    for entry in data:
        if isinstance(entry, str):
            items.append(_split_answer_clause(entry))
        elif isinstance(entry, dict) and "problem" in entry:
            answer = entry.get("answer")
            items.append((str(entry["problem"]), str(answer) if answer is not None else None))
    return items


def _parse_enumerated_items(body: str) -> tuple[list[tuple[str, str | None]], int]:
    starts = list(_ITEM_START_RE.finditer(body))
    items: list[tuple[str, str | None]] = []
    skipped = 0
    for i, match in enumerate(starts):
        end = starts[i + 1].start() if i + 1 < len(starts) else len(body)
        chunk = body[match.end(): end].strip()
        if not chunk:
            skipped += 1
            continue
        items.append(_split_answer_clause(chunk))
    return items, skipped


def _split_answer_clause(item: str) -> tuple[str, str | None]:
    """Split one item into (statement, boxed reference answer)."""
    matches = list(_ANSWER_SPLIT_RE.finditer(item))
    for match in reversed(matches):
        tail = item[match.end():]
        boxed = extract_boxed(tail)
        if boxed is not None:
            return item[: match.start()].rstrip(), boxed
    # No answer clause; a box embedded in the statement still counts.
    return item, extract_boxed(item)
