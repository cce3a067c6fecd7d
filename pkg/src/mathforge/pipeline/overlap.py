"""Corpus-overlap analysis: max ROUGE-L of each problem vs an external corpus."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import EmptyCorpus
from ..filtering import rouge_l
from ..synthesis import Problem

FLAG_THRESHOLD = 0.6
N_BUCKETS = 10


@dataclass(frozen=True)
class OverlapReport:
    histogram: tuple[int, ...]  # N_BUCKETS buckets of width 0.1
    per_problem: tuple[tuple[str, float], ...]  # (problem_id, max f1)
    flagged: tuple[str, ...]  # problems with max f1 > FLAG_THRESHOLD


def bucket_index(score: float) -> int:
    return min(N_BUCKETS - 1, int(score * N_BUCKETS))


def corpus_overlap(problems: Sequence[Problem], corpus_path: str | Path) -> OverlapReport:
    """Histogram of per-problem max ROUGE-L f1 against corpus lines.

    The corpus holds one instruction per line; blank lines are skipped.
    """
    path = Path(corpus_path)
    if not path.is_file():
        raise EmptyCorpus(f"corpus file not found: {path}")
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise EmptyCorpus(f"corpus file has no instructions: {path}")

    histogram = [0] * N_BUCKETS
    per_problem = []
    flagged = []
    for problem in problems:
        best = 0.0
        for line in lines:
            best = max(best, rouge_l(problem.text, line).f1)
            if best == 1.0:
                break
        histogram[bucket_index(best)] += 1
        per_problem.append((problem.problem_id, best))
        if best > FLAG_THRESHOLD:
            flagged.append(problem.problem_id)
    return OverlapReport(
        histogram=tuple(histogram),
        per_problem=tuple(per_problem),
        flagged=tuple(flagged),
    )
