"""Uniform access to chat-completion and embedding providers.

All pipeline stages call providers through the `Backend` contract; nothing
downstream knows whether a member is a live HTTP endpoint or the seeded
mock, which is what lets every stage run and be verified offline.
"""

from .base import Backend, call_with_retries
from .http import HttpBackend
from .mock import MockBackend, MockScript, canonical_answer, mock_backend
from .profiles import BackendProfile, ChatExchange, GenerationConfig, Message

__all__ = [
    "Backend",
    "BackendProfile",
    "ChatExchange",
    "GenerationConfig",
    "HttpBackend",
    "Message",
    "MockBackend",
    "MockScript",
    "call_with_retries",
    "canonical_answer",
    "mock_backend",
]
