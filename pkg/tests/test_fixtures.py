"""The committed cross-component fixtures must match what the code produces.

The trainer package consumes fixtures/ through the documented JSONL
contracts only; this guard keeps those files in lockstep with the
pipeline. Regenerate per fixtures/config.yaml if it ever fails.
"""

from pathlib import Path

from mathforge.pipeline import PipelineRunner, load_config, read_jsonl

FIXTURES = Path(__file__).parent.parent / "fixtures"


def test_committed_fixtures_match_pipeline_output(tmp_path):
    config = load_config(FIXTURES / "config.yaml")
    runner = PipelineRunner.create(tmp_path, config, run_id="fixtures")
    runner.execute()
    produced_pairs = (runner.run_dir / "pairs.jsonl").read_bytes()
    produced_losses = (runner.run_dir / "losscheck.jsonl").read_bytes()
    assert produced_pairs == (FIXTURES / "pairs.jsonl").read_bytes()
    assert produced_losses == (FIXTURES / "loss_fixtures.jsonl").read_bytes()


def test_fixture_volumes_meet_parity_requirements():
    _, losses = read_jsonl(FIXTURES / "loss_fixtures.jsonl")
    assert len(losses) >= 100
    _, pairs = read_jsonl(FIXTURES / "pairs.jsonl")
    assert len(pairs) >= 10
