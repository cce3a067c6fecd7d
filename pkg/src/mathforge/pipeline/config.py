"""Declarative run configuration: parsing, defaults, validation, hashing.

The config hash is computed over the fully-populated canonical document
(parsed, defaults applied, keys sorted), so formatting-only edits to the
file keep the same hash and runs stay resumable across reformatting.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..backends import Backend, BackendProfile, HttpBackend, MockBackend, MockScript
from ..committee import DEFAULT_GRID_TEMPERATURES, DEFAULT_GRID_TOP_PS, CommitteeConfig
from ..errors import ConfigError
from ..losskernel import LossConfig
from ..pairbuilder import IterationConfig
from ..textutil import derive_seed


@dataclass(frozen=True)
class BackendSpec:
    member_id: str
    kind: str = "mock"  # mock | http
    seed: int | None = None  # mock; defaults to a per-member derivation
    embedding_dim: int = 16
    script_path: str | None = None
    strict: bool = False
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env: str = ""
    max_in_flight: int = 4
    timeout: float = 60.0
    retry_budget: int = 2

    def profile(self) -> BackendProfile:
        return BackendProfile(
            member_id=self.member_id,
            endpoint_url=self.endpoint_url,
            model_name=self.model_name,
            api_key_env=self.api_key_env,
            max_in_flight=self.max_in_flight,
            timeout=self.timeout,
            retry_budget=self.retry_budget,
        )


@dataclass(frozen=True)
class SynthesisSettings:
    problems_per_call: int = 5
    calls_per_round: int | None = None  # None = one call per grid config
    max_tokens: int = 1024


@dataclass(frozen=True)
class Thresholds:
    dedup_rouge: float = 0.6
    quality_min: int = 6
    defect_n: int = 16


@dataclass(frozen=True)
class RatingSettings:
    k_factor: float = 32.0
    initial_rating: float = 1000.0
    alpha_score: float = 0.5


@dataclass(frozen=True)
class PipelineConfig:
    committee: CommitteeConfig
    backends: tuple[BackendSpec, ...]
    selection_budget: int
    seed: int = 0
    base_model: str = ""
    embedding_backend: str = ""
    synthesis: SynthesisSettings = field(default_factory=SynthesisSettings)
    thresholds: Thresholds = field(default_factory=Thresholds)
    rating: RatingSettings = field(default_factory=RatingSettings)
    iteration: IterationConfig = field(default_factory=IterationConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    losscheck_min_records: int = 128
    overlap_corpus: str | None = None
    prompts_dir: str | None = None

    def to_canonical_dict(self) -> dict:
        return {
            "committee": {
                "members": list(self.committee.members),
                "rounds": self.committee.effective_rounds,
                "grid_temperatures": list(self.committee.grid_temperatures),
                "grid_top_ps": list(self.committee.grid_top_ps),
            },
            "backends": [
                {
                    "member_id": b.member_id,
                    "kind": b.kind,
                    "seed": b.seed,
                    "embedding_dim": b.embedding_dim,
                    "script_path": b.script_path,
                    "strict": b.strict,
                    "endpoint_url": b.endpoint_url,
                    "model_name": b.model_name,
                    "api_key_env": b.api_key_env,
                    "max_in_flight": b.max_in_flight,
                    "timeout": b.timeout,
                    "retry_budget": b.retry_budget,
                }
                for b in self.backends
            ],
            "selection_budget": self.selection_budget,
            "seed": self.seed,
            "base_model": self.base_model,
            "embedding_backend": self.embedding_backend,
            "synthesis": {
                "problems_per_call": self.synthesis.problems_per_call,
                "calls_per_round": self.synthesis.calls_per_round,
                "max_tokens": self.synthesis.max_tokens,
            },
            "thresholds": {
                "dedup_rouge": self.thresholds.dedup_rouge,
                "quality_min": self.thresholds.quality_min,
                "defect_n": self.thresholds.defect_n,
            },
            "rating": {
                "k_factor": self.rating.k_factor,
                "initial_rating": self.rating.initial_rating,
                "alpha_score": self.rating.alpha_score,
            },
            "iteration": {
                "iteration_index": self.iteration.iteration_index,
                "n_samples": self.iteration.n_samples,
                "temperature": self.iteration.temperature,
                "top_p": self.iteration.top_p,
                "max_pairs_per_problem": self.iteration.max_pairs_per_problem,
                "max_tokens": self.iteration.max_tokens,
            },
            "loss": {"alpha_nll": self.loss.alpha_nll, "beta": self.loss.beta},
            "losscheck_min_records": self.losscheck_min_records,
            "overlap_corpus": self.overlap_corpus,
            "prompts_dir": self.prompts_dir,
        }

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.to_canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def backend_spec(self, member_id: str) -> BackendSpec:
        for spec in self.backends:
            if spec.member_id == member_id:
                return spec
        raise ConfigError(f"no backend profile for member_id {member_id!r}")


def _require(data: dict, key: str, path: str) -> Any:
    if key not in data or data[key] is None:
        raise ConfigError(f"{path}.{key}: required field missing")
    return data[key]


def _known_keys(data: dict, allowed: set[str], path: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")


def _get_section(data: dict, key: str) -> dict:
    section = data.get(key) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"{key}: expected a mapping")
    return section


def parse_config(data: dict) -> PipelineConfig:
    """Build a validated PipelineConfig from a parsed document."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _known_keys(
        data,
        {
            "committee",
            "backends",
            "selection_budget",
            "seed",
            "base_model",
            "embedding_backend",
            "synthesis",
            "thresholds",
            "rating",
            "iteration",
            "loss",
            "losscheck_min_records",
            "overlap_corpus",
            "prompts_dir",
        },
        "config",
    )

    committee_data = _require(data, "committee", "config")
    _known_keys(
        committee_data,
        {"members", "rounds", "grid_temperatures", "grid_top_ps"},
        "committee",
    )
    members = _require(committee_data, "members", "committee")
    if not isinstance(members, list) or len(members) < 2:
        raise ConfigError("committee.members: need a list of at least 2 member ids")
    if len(set(members)) != len(members):
        raise ConfigError("committee.members: member ids must be unique")
    try:
        committee = CommitteeConfig(
            members=tuple(members),
            rounds=int(committee_data.get("rounds", 0) or 0),
            grid_temperatures=tuple(
                committee_data.get("grid_temperatures", DEFAULT_GRID_TEMPERATURES)
            ),
            grid_top_ps=tuple(committee_data.get("grid_top_ps", DEFAULT_GRID_TOP_PS)),
        )
    except ValueError as exc:
        raise ConfigError(f"committee: {exc}") from exc

    backend_list = _require(data, "backends", "config")
    if not isinstance(backend_list, list) or not backend_list:
        raise ConfigError("backends: need a non-empty list of profiles")
    specs = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(backend_list):
        path = f"backends[{i}]"
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a mapping")
        _known_keys(
            raw,
            {
                "member_id",
                "kind",
                "seed",
                "embedding_dim",
                "script_path",
                "strict",
                "endpoint_url",
                "model_name",
                "api_key_env",
                "max_in_flight",
                "timeout",
                "retry_budget",
            },
            path,
        )
        member_id = _require(raw, "member_id", path)
        if member_id in seen_ids:
            raise ConfigError(f"{path}.member_id: duplicate profile for {member_id!r}")
        seen_ids.add(member_id)
        kind = raw.get("kind", "mock")
        if kind not in ("mock", "http"):
            raise ConfigError(f"{path}.kind: expected 'mock' or 'http', got {kind!r}")
        if kind == "http" and not raw.get("endpoint_url"):
            raise ConfigError(f"{path}.endpoint_url: required for http backends")
        try:
            specs.append(
                BackendSpec(
                    member_id=member_id,
                    kind=kind,
                    seed=raw.get("seed"),
                    embedding_dim=int(raw.get("embedding_dim", 16)),
                    script_path=raw.get("script_path"),
                    strict=bool(raw.get("strict", False)),
                    endpoint_url=raw.get("endpoint_url", ""),
                    model_name=raw.get("model_name", ""),
                    api_key_env=raw.get("api_key_env", ""),
                    max_in_flight=int(raw.get("max_in_flight", 4)),
                    timeout=float(raw.get("timeout", 60.0)),
                    retry_budget=int(raw.get("retry_budget", 2)),
                )
            )
            specs[-1].profile()  # trips profile invariants early
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    profile_ids = {s.member_id for s in specs}
    for member in committee.members:
        if member not in profile_ids:
            raise ConfigError(
                f"committee.members: {member!r} has no backend profile"
            )

    selection_budget = _require(data, "selection_budget", "config")
    if not isinstance(selection_budget, int) or selection_budget < 1:
        raise ConfigError("selection_budget: must be a positive integer")

    base_model = data.get("base_model") or committee.members[0]
    if base_model not in profile_ids:
        raise ConfigError(f"base_model: {base_model!r} has no backend profile")
    embedding_backend = data.get("embedding_backend") or base_model
    if embedding_backend not in profile_ids:
        raise ConfigError(
            f"embedding_backend: {embedding_backend!r} has no backend profile"
        )

    synthesis_data = _get_section(data, "synthesis")
    _known_keys(synthesis_data, {"problems_per_call", "calls_per_round", "max_tokens"}, "synthesis")
    synthesis = SynthesisSettings(
        problems_per_call=int(synthesis_data.get("problems_per_call", 5)),
        calls_per_round=(
            int(synthesis_data["calls_per_round"])
            if synthesis_data.get("calls_per_round") is not None
            else None
        ),
        max_tokens=int(synthesis_data.get("max_tokens", 1024)),
    )
    if synthesis.problems_per_call < 1:
        raise ConfigError("synthesis.problems_per_call: must be positive")

    thresholds_data = _get_section(data, "thresholds")
    _known_keys(thresholds_data, {"dedup_rouge", "quality_min", "defect_n"}, "thresholds")
    thresholds = Thresholds(
        dedup_rouge=float(thresholds_data.get("dedup_rouge", 0.6)),
        quality_min=int(thresholds_data.get("quality_min", 6)),
        defect_n=int(thresholds_data.get("defect_n", 16)),
    )
    if not 0.0 < thresholds.dedup_rouge <= 1.0:
        raise ConfigError("thresholds.dedup_rouge: must be in (0, 1]")
    if thresholds.defect_n < 1:
        raise ConfigError("thresholds.defect_n: must be positive")

    rating_data = _get_section(data, "rating")
    _known_keys(rating_data, {"k_factor", "initial_rating", "alpha_score"}, "rating")
    rating = RatingSettings(
        k_factor=float(rating_data.get("k_factor", 32.0)),
        initial_rating=float(rating_data.get("initial_rating", 1000.0)),
        alpha_score=float(rating_data.get("alpha_score", 0.5)),
    )
    if rating.k_factor <= 0:
        raise ConfigError("rating.k_factor: must be positive")
    if not 0.0 <= rating.alpha_score <= 1.0:
        raise ConfigError("rating.alpha_score: must be in [0, 1]")

    iteration_data = _get_section(data, "iteration")
    _known_keys(
        iteration_data,
        {"iteration_index", "n_samples", "temperature", "top_p", "max_pairs_per_problem", "max_tokens"},
        "iteration",
    )
    try:
        iteration = IterationConfig(
            iteration_index=int(iteration_data.get("iteration_index", 0)),
            n_samples=int(iteration_data.get("n_samples", 32)),
            temperature=float(iteration_data.get("temperature", 0.7)),
            top_p=float(iteration_data.get("top_p", 0.8)),
            max_pairs_per_problem=int(iteration_data.get("max_pairs_per_problem", 10)),
            max_tokens=int(iteration_data.get("max_tokens", 1024)),
        )
    except ValueError as exc:
        raise ConfigError(f"iteration: {exc}") from exc

    loss_data = _get_section(data, "loss")
    _known_keys(loss_data, {"alpha_nll", "beta"}, "loss")
    try:
        loss = LossConfig(
            alpha_nll=float(loss_data.get("alpha_nll", 1.0)),
            beta=float(loss_data.get("beta", 0.1)),
        )
    except ValueError as exc:
        raise ConfigError(f"loss: {exc}") from exc

    return PipelineConfig(
        committee=committee,
        backends=tuple(specs),
        selection_budget=selection_budget,
        seed=int(data.get("seed", 0)),
        base_model=base_model,
        embedding_backend=embedding_backend,
        synthesis=synthesis,
        thresholds=thresholds,
        rating=rating,
        iteration=iteration,
        loss=loss,
        losscheck_min_records=int(data.get("losscheck_min_records", 128)),
        overlap_corpus=data.get("overlap_corpus"),
        prompts_dir=data.get("prompts_dir"),
    )


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a YAML/JSON config file into a validated PipelineConfig."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data)


def build_backend(spec: BackendSpec, root_seed: int) -> Backend:
    """Instantiate a backend from its spec; mock seeds derive from the run seed."""
    profile = spec.profile()
    if spec.kind == "http":
        return HttpBackend(profile)
    seed = spec.seed if spec.seed is not None else derive_seed(root_seed, "backend", spec.member_id)
    script = None
    if spec.script_path:
        script_file = Path(spec.script_path)
        if not script_file.is_file():
            raise ConfigError(f"script_path not found: {script_file}")
        script = MockScript(json.loads(script_file.read_text(encoding="utf-8")))
    return MockBackend(
        profile,
        seed=seed,
        script=script,
        strict=spec.strict,
        embedding_dim=spec.embedding_dim,
    )


def build_backends(config: PipelineConfig) -> dict[str, Backend]:
    return {spec.member_id: build_backend(spec, config.seed) for spec in config.backends}
