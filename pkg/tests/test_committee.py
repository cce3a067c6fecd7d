import pytest

from mathforge.committee import CommitteeConfig, generation_grid, schedule_rounds
from mathforge.errors import EmptyGrid, TooFewMembers


class TestScheduleRounds:
    def test_five_members_five_rounds_each_examines_once(self):
        config = CommitteeConfig(members=("A", "B", "C", "D", "E"), rounds=5)
        plans = schedule_rounds(config)
        assert [p.examiner for p in plans] == ["A", "B", "C", "D", "E"]

    def test_smallest_legal_committee(self):
        plans = schedule_rounds(CommitteeConfig(members=("A", "B"), rounds=1))
        assert plans[0].examiner == "A"
        assert plans[0].judges == ("B",)

    def test_single_member_rejected(self):
        with pytest.raises(TooFewMembers):
            schedule_rounds(CommitteeConfig(members=("A",), rounds=1))

    def test_judges_are_everyone_else_in_config_order(self):
        config = CommitteeConfig(members=("A", "B", "C"), rounds=3)
        plans = schedule_rounds(config)
        assert plans[1].examiner == "B"
        assert plans[1].judges == ("A", "C")

    def test_role_partition_property(self):
        config = CommitteeConfig(members=("A", "B", "C", "D"), rounds=11)
        for plan in schedule_rounds(config):
            union = {plan.examiner, *plan.judges}
            assert union == set(config.members)
            assert plan.examiner not in plan.judges

    def test_fairness_over_full_rotations(self):
        members = ("A", "B", "C", "D")
        plans = schedule_rounds(CommitteeConfig(members=members, rounds=8))
        for start in (0, 4):
            window = [p.examiner for p in plans[start: start + 4]]
            assert sorted(window) == sorted(members)

    def test_rounds_default_is_one_full_rotation(self):
        config = CommitteeConfig(members=("A", "B", "C"))
        assert len(schedule_rounds(config)) == 3


class TestGenerationGrid:
    def test_default_grid_is_nine_configs(self):
        grid = generation_grid(CommitteeConfig(members=("A", "B")))
        assert len(grid) == 9
        assert (grid[0].temperature, grid[0].top_p) == (0.60, 0.85)
        assert (grid[-1].temperature, grid[-1].top_p) == (0.70, 0.95)

    def test_singleton_grid(self):
        config = CommitteeConfig(
            members=("A", "B"), grid_temperatures=(0.7,), grid_top_ps=(0.8,)
        )
        grid = generation_grid(config)
        assert len(grid) == 1
        assert (grid[0].temperature, grid[0].top_p) == (0.7, 0.8)

    def test_two_by_three_grid_order_enumerated_by_hand(self):
        config = CommitteeConfig(
            members=("A", "B"),
            grid_temperatures=(0.1, 0.2),
            grid_top_ps=(0.5, 0.6, 0.7),
        )
        grid = generation_grid(config)
        assert [(g.temperature, g.top_p) for g in grid] == [
            (0.1, 0.5),
            (0.1, 0.6),
            (0.1, 0.7),
            (0.2, 0.5),
            (0.2, 0.6),
            (0.2, 0.7),
        ]

    def test_empty_axis_rejected(self):
        config = CommitteeConfig(members=("A", "B"), grid_temperatures=())
        with pytest.raises(EmptyGrid):
            generation_grid(config)

    def test_duplicate_members_rejected(self):
        with pytest.raises(ValueError):
            CommitteeConfig(members=("A", "A"))
