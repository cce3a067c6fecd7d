"""Diversity-preserving subset selection by farthest-first traversal.

Distances are Euclidean; on unit-normalized embeddings that ordering is
monotone in cosine distance, so geometric coverage and semantic coverage
coincide. The first center is the point farthest from the corpus centroid
rather than a random draw, keeping selections reproducible; ties break
toward the smallest problem_id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCorpus


@dataclass(frozen=True)
class EmbeddedProblem:
    problem_id: str
    vector: tuple[float, ...]


@dataclass(frozen=True)
class SelectionResult:
    selected_ids: tuple[str, ...]
    coverage_radius: float
    min_dists_at_selection: tuple[float, ...]  # aligned with selected_ids; NaN for rank 0


def kcenter_select(points: list[EmbeddedProblem], budget: int) -> SelectionResult:
    """Greedy k-center: repeatedly take the point farthest from the chosen set."""
    if not points:
        raise EmptyCorpus("no points to select from")
    if budget < 1:
        raise ValueError("budget must be >= 1")

    ids = [p.problem_id for p in points]
    matrix = np.asarray([p.vector for p in points], dtype=np.float64)
    n = len(points)
    k = min(budget, n)

    # Stable order so the argmax tie-break lands on the smallest problem_id.
    order = np.argsort(np.asarray(ids))
    centroid = matrix.mean(axis=0)
    centroid_dist = np.linalg.norm(matrix - centroid, axis=1)

    def pick(values: np.ndarray) -> int:
        best = order[0]
        for idx in order:
            if values[idx] > values[best]:
                best = idx
        return int(best)

    first = pick(centroid_dist)
    selected = [first]
    gains = [float("nan")]
    min_dist = np.linalg.norm(matrix - matrix[first], axis=1)
    while len(selected) < k:
        nxt = pick(min_dist)
        selected.append(nxt)
        gains.append(float(min_dist[nxt]))
        min_dist = np.minimum(min_dist, np.linalg.norm(matrix - matrix[nxt], axis=1))

    return SelectionResult(
        selected_ids=tuple(ids[i] for i in selected),
        coverage_radius=float(min_dist.max()),
        min_dists_at_selection=tuple(gains),
    )
