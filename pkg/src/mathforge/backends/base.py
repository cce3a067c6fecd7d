"""Shared backend contract: bounded concurrency and retry with backoff."""

from __future__ import annotations

import random
import threading
import time
from abc import ABC, abstractmethod
from typing import Callable, TypeVar

import numpy as np

from ..errors import TransportError
from .profiles import BackendProfile, ChatExchange, GenerationConfig, Message

T = TypeVar("T")


class TransientFailure(Exception):
    """Internal signal that a single attempt failed but may be retried."""


def call_with_retries(
    fn: Callable[[], T],
    *,
    retry_budget: int,
    base_delay: float = 1.0,
    max_delay: float = 30.0,
    rng: random.Random | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run `fn`, retrying TransientFailure up to `retry_budget` times.

    Backoff is exponential with full jitter: attempt k sleeps a uniform
    draw from [0, min(max_delay, base_delay * 2**k)].
    """
    rng = rng if rng is not None else random.Random()
    attempt = 0
    while True:
        try:
            return fn()
        except TransientFailure as exc:
            if attempt >= retry_budget:
                raise TransportError(
                    f"retries exhausted after {attempt + 1} attempts: {exc}"
                ) from exc
            cap = min(max_delay, base_delay * (2**attempt))
            if cap > 0:
                sleep(rng.uniform(0.0, cap))
            attempt += 1


class Backend(ABC):
    """Chat + embedding provider with a per-instance in-flight bound.

    Instances are shareable across worker threads; `_gate` enforces the
    profile's max_in_flight no matter how many callers hold the handle.
    """

    def __init__(self, profile: BackendProfile):
        self.profile = profile
        self._gate = threading.BoundedSemaphore(profile.max_in_flight)
        self._flight_lock = threading.Lock()
        self._in_flight = 0
        self.max_observed_in_flight = 0

    def _enter_flight(self) -> None:
        with self._flight_lock:
            self._in_flight += 1
            self.max_observed_in_flight = max(self.max_observed_in_flight, self._in_flight)

    def _exit_flight(self) -> None:
        with self._flight_lock:
            self._in_flight -= 1

    def chat(self, messages: list[Message], config: GenerationConfig) -> ChatExchange:
        if not messages:
            raise ValueError("messages must be non-empty")
        start = time.monotonic()
        with self._gate:
            self._enter_flight()
            try:
                text = self._complete(messages, config)
            finally:
                self._exit_flight()
        return ChatExchange(
            request_messages=tuple(messages),
            response_text=text,
            latency=time.monotonic() - start,
            config_used=config,
        )

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        """One unit-norm float64 vector per text, all of equal dimension."""
        if not texts:
            raise ValueError("texts must be non-empty")
        with self._gate:
            self._enter_flight()
            try:
                raw = self._embed(texts)
            finally:
                self._exit_flight()
        out = []
        for vec in raw:
            arr = np.asarray(vec, dtype=np.float64)
            norm = float(np.linalg.norm(arr))
            out.append(arr / norm if norm > 0 else arr)
        return out

    @abstractmethod
    def _complete(self, messages: list[Message], config: GenerationConfig) -> str:
        """Produce the completion text for one request."""

    @abstractmethod
    def _embed(self, texts: list[str]) -> list[list[float]]:
        """Produce one raw vector per text (normalization happens above)."""
