"""Round scheduling and the generation sampling grid.

Per round exactly one member writes problems (the examiner) and everyone
else reviews; the rotation is round-robin in config order so that over
|members| consecutive rounds each member examines exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .backends import GenerationConfig
from .errors import EmptyGrid, TooFewMembers

DEFAULT_GRID_TEMPERATURES = (0.60, 0.65, 0.70)
DEFAULT_GRID_TOP_PS = (0.85, 0.90, 0.95)


@dataclass(frozen=True)
class CommitteeConfig:
    members: tuple[str, ...]
    rounds: int = 0  # 0 means one full rotation (= len(members))
    grid_temperatures: tuple[float, ...] = DEFAULT_GRID_TEMPERATURES
    grid_top_ps: tuple[float, ...] = DEFAULT_GRID_TOP_PS

    def __post_init__(self) -> None:
        if len(set(self.members)) != len(self.members):
            raise ValueError("committee members must be unique")
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")

    @property
    def effective_rounds(self) -> int:
        return self.rounds if self.rounds > 0 else len(self.members)


@dataclass(frozen=True)
class RoundPlan:
    round_index: int
    examiner: str
    judges: tuple[str, ...] = field(default_factory=tuple)


def schedule_rounds(config: CommitteeConfig) -> list[RoundPlan]:
    """Round r's examiner is members[r mod n]; judges are everyone else."""
    members = config.members
    if len(members) < 2:
        raise TooFewMembers(f"need at least 2 members, got {len(members)}")
    plans = []
    for r in range(config.effective_rounds):
        examiner = members[r % len(members)]
        judges = tuple(m for m in members if m != examiner)
        plans.append(RoundPlan(round_index=r, examiner=examiner, judges=judges))
    return plans


def generation_grid(config: CommitteeConfig, max_tokens: int = 1024) -> list[GenerationConfig]:
    """Cartesian product of the grid axes, temperature-major then top-p."""
    if not config.grid_temperatures or not config.grid_top_ps:
        raise EmptyGrid("both grid_temperatures and grid_top_ps must be non-empty")
    return [
        GenerationConfig(temperature=t, top_p=p, max_tokens=max_tokens)
        for t, p in product(config.grid_temperatures, config.grid_top_ps)
    ]
