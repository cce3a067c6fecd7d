import math
import random
from itertools import combinations

import numpy as np
import pytest

from mathforge.errors import EmptyCorpus
from mathforge.selection import EmbeddedProblem, SelectionResult, kcenter_select


def points_2d(coords):
    return [EmbeddedProblem(f"p{i:02d}", tuple(c)) for i, c in enumerate(coords)]


def optimal_radius_bruteforce(coords, k):
    """Exact k-center radius by exhausting all C(n, k) center subsets."""
    n = len(coords)
    dist = [
        [math.dist(coords[i], coords[j]) for j in range(n)] for i in range(n)
    ]
    best = math.inf
    for centers in combinations(range(n), k):
        radius = max(min(dist[i][c] for c in centers) for i in range(n))
        best = min(best, radius)
    return best


class TestKCenterHandCases:
    def test_four_point_case_matches_bruteforce(self):
        coords = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (10.0, 10.0)]
        result = kcenter_select(points_2d(coords), budget=2)
        # Farthest from centroid is (10,10); next farthest-first is (0,0).
        assert result.selected_ids == ("p03", "p00")
        assert result.coverage_radius == pytest.approx(1.0)

    def test_budget_saturation_selects_everything(self):
        coords = [(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]
        result = kcenter_select(points_2d(coords), budget=10)
        assert sorted(result.selected_ids) == ["p00", "p01", "p02"]
        assert result.coverage_radius == 0.0

    def test_budget_one_radius_is_max_distance_from_center(self):
        coords = [(0.0, 0.0), (6.0, 8.0), (1.0, 1.0)]
        result = kcenter_select(points_2d(coords), budget=1)
        assert len(result.selected_ids) == 1
        center = coords[int(result.selected_ids[0][1:])]
        expected = max(math.dist(center, c) for c in coords)
        assert result.coverage_radius == pytest.approx(expected)

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpus):
            kcenter_select([], budget=1)

    def test_bad_budget_rejected(self):
        with pytest.raises(ValueError):
            kcenter_select(points_2d([(0, 0)]), budget=0)

    def test_tie_break_smallest_problem_id(self):
        # Four corners of a square: all equidistant from the centroid.
        coords = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        result = kcenter_select(points_2d(coords), budget=1)
        assert result.selected_ids[0] == "p00"

    def test_min_dist_at_selection_tracks_gains(self):
        coords = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (10.0, 10.0)]
        result = kcenter_select(points_2d(coords), budget=3)
        gains = result.min_dists_at_selection
        assert math.isnan(gains[0])
        assert gains[1] == pytest.approx(math.dist((10, 10), (0, 0)))
        # Gains are non-increasing after the first center.
        assert gains[1] >= gains[2]


class TestKCenterProperties:
    def random_sets(self, count, rng):
        for _ in range(count):
            n = rng.randint(4, 12)
            yield [(rng.uniform(-5, 5), rng.uniform(-5, 5)) for _ in range(n)]

    def test_two_approximation_against_bruteforce(self):
        rng = random.Random(1234)
        for coords in self.random_sets(40, rng):
            for k in range(1, min(4, len(coords)) + 1):
                greedy = kcenter_select(points_2d(coords), budget=k)
                optimal = optimal_radius_bruteforce(coords, k)
                assert greedy.coverage_radius <= 2 * optimal + 1e-9

    def test_monotone_radius_in_budget(self):
        rng = random.Random(99)
        coords = [(rng.uniform(-3, 3), rng.uniform(-3, 3)) for _ in range(10)]
        radii = [
            kcenter_select(points_2d(coords), budget=k).coverage_radius
            for k in range(1, 11)
        ]
        for small, large in zip(radii, radii[1:]):
            assert large <= small + 1e-12

    def test_deterministic_selection_order(self):
        rng = random.Random(7)
        coords = [(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(15)]
        a = kcenter_select(points_2d(coords), budget=5)
        b = kcenter_select(points_2d(coords), budget=5)
        assert a.selected_ids == b.selected_ids
        assert a.coverage_radius == b.coverage_radius

    def test_selected_ids_distinct_and_sized(self):
        rng = random.Random(11)
        coords = [(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(9)]
        for budget in (1, 3, 9, 20):
            result = kcenter_select(points_2d(coords), budget)
            assert len(result.selected_ids) == min(budget, 9)
            assert len(set(result.selected_ids)) == len(result.selected_ids)

    def test_unit_norm_vectors_supported(self):
        rng = np.random.default_rng(5)
        vectors = rng.normal(size=(20, 8))
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
        points = [EmbeddedProblem(f"p{i:02d}", tuple(v)) for i, v in enumerate(vectors)]
        result = kcenter_select(points, budget=6)
        assert isinstance(result, SelectionResult)
        assert len(result.selected_ids) == 6
