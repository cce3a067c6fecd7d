"""Backend identity and per-request sampling settings."""

from __future__ import annotations

from dataclasses import dataclass, field

Message = dict[str, str]  # {"role": ..., "content": ...}


@dataclass(frozen=True)
class GenerationConfig:
    """Sampling settings for one completion request."""

    temperature: float = 0.7
    top_p: float = 0.8
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationConfig":
        return cls(
            temperature=data["temperature"],
            top_p=data["top_p"],
            max_tokens=data["max_tokens"],
            seed=data.get("seed"),
        )


@dataclass(frozen=True)
class BackendProfile:
    """One chat/embedding provider as seen by the rest of the pipeline.

    API keys are only ever named here (by environment variable), never stored.
    """

    member_id: str
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env: str = ""
    max_in_flight: int = 4
    timeout: float = 60.0
    retry_budget: int = 2

    def __post_init__(self) -> None:
        if not self.member_id:
            raise ValueError("member_id must be non-empty")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")


@dataclass(frozen=True)
class ChatExchange:
    """One completed chat round trip."""

    request_messages: tuple[Message, ...]
    response_text: str
    latency: float
    config_used: GenerationConfig = field(default_factory=GenerationConfig)
