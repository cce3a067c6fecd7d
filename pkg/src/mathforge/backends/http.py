"""OpenAI-compatible HTTP backend (chat completions + embeddings)."""

from __future__ import annotations

import os

import httpx

from ..errors import AuthError, DimensionMismatch, ProviderError
from .base import Backend, TransientFailure, call_with_retries
from .profiles import BackendProfile, GenerationConfig, Message

# Status codes worth retrying; everything else non-2xx fails immediately.
_TRANSIENT_STATUS = frozenset({408, 429, 500, 502, 503, 504})


class HttpBackend(Backend):
    """Talks to `{endpoint_url}/chat/completions` and `{endpoint_url}/embeddings`.

    The API key is read from the environment variable named in the profile
    at call time; it is never persisted.
    """

    def __init__(
        self,
        profile: BackendProfile,
        *,
        transport: httpx.BaseTransport | None = None,
        backoff_base: float = 1.0,
        backoff_cap: float = 30.0,
    ):
        super().__init__(profile)
        self._backoff_base = backoff_base
        self._backoff_cap = backoff_cap
        self._client = httpx.Client(
            base_url=profile.endpoint_url.rstrip("/"),
            timeout=profile.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        if not self.profile.api_key_env:
            return {}
        key = os.environ.get(self.profile.api_key_env, "")
        if not key:
            raise AuthError(
                f"environment variable {self.profile.api_key_env!r} is not set "
                f"for backend {self.profile.member_id!r}"
            )
        return {"Authorization": f"Bearer {key}"}

    def _post(self, path: str, payload: dict) -> dict:
        headers = self._headers()

        def attempt() -> dict:
            try:
                response = self._client.post(path, json=payload, headers=headers)
            except httpx.TransportError as exc:
                raise TransientFailure(str(exc)) from exc
            if response.status_code in _TRANSIENT_STATUS:
                raise TransientFailure(f"status {response.status_code}")
            if response.status_code < 200 or response.status_code >= 300:
                raise ProviderError(
                    f"{self.profile.member_id}: {path} returned {response.status_code}: "
                    f"{response.text[:200]}"
                )
            return response.json()

        try:
            return call_with_retries(
                attempt,
                retry_budget=self.profile.retry_budget,
                base_delay=self._backoff_base,
                max_delay=self._backoff_cap,
            )
        except TransientFailure as exc:  # pragma: no cover - defensive
            raise ProviderError(str(exc)) from exc

    def _complete(self, messages: list[Message], config: GenerationConfig) -> str:
        payload = {
            "model": self.profile.model_name,
            "messages": messages,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_tokens,
        }
        if config.seed is not None:
            payload["seed"] = config.seed
        data = self._post("/chat/completions", payload)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat completion payload: {exc}") from exc
        if not text:
            raise ProviderError("provider returned an empty completion")
        return text

    def _embed(self, texts: list[str]) -> list[list[float]]:
        payload = {"model": self.profile.model_name, "input": texts}
        data = self._post("/embeddings", payload)
        try:
            vectors = [item["embedding"] for item in data["data"]]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embeddings payload: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(
                f"expected {len(texts)} embeddings, got {len(vectors)}"
            )
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise DimensionMismatch(f"ragged embedding dimensions: {sorted(dims)}")
        return vectors
