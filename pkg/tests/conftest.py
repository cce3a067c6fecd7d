import copy

import pytest

BASE_CONFIG = {
    "seed": 7,
    "selection_budget": 6,
    "committee": {
        "members": ["alpha", "beta", "gamma"],
        "rounds": 3,
        "grid_temperatures": [0.7],
        "grid_top_ps": [0.8],
    },
    "backends": [
        {"member_id": "alpha", "kind": "mock", "seed": 11},
        {"member_id": "beta", "kind": "mock", "seed": 12},
        {"member_id": "gamma", "kind": "mock", "seed": 13},
    ],
    "synthesis": {"problems_per_call": 4, "calls_per_round": 2, "max_tokens": 512},
    "thresholds": {"defect_n": 4},
    "iteration": {"n_samples": 6},
    "losscheck_min_records": 16,
}


@pytest.fixture
def config_doc():
    """A small all-mock pipeline config document; mutate freely."""
    return copy.deepcopy(BASE_CONFIG)


# One visible pass/fail line per acceptance criterion at the end of a run.
_acceptance_outcomes: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        _acceptance_outcomes[item.name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_acceptance_outcomes.items()):
        label = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{label}  {name}")
