"""Text normalization, content hashing, and seed derivation helpers."""

from __future__ import annotations

import hashlib
import re
import unicodedata

_WS_RUN = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Canonical form used for content identity: NFC, trimmed, single spaces."""
    return _WS_RUN.sub(" ", unicodedata.normalize("NFC", text)).strip()


def content_hash(text: str, length: int = 16) -> str:
    """Hex digest of the normalized text, truncated to `length` characters."""
    digest = hashlib.sha256(normalize_text(text).encode("utf-8")).hexdigest()
    return digest[:length]


def derive_seed(*parts: object) -> int:
    """Deterministic 63-bit seed from an ordered tuple of parts.

    Used to give every stage, call, and sample its own reproducible RNG
    stream from one root seed.
    """
    joined = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(joined.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


_BOXED = "\\boxed{"


def _last_balanced_box(text: str) -> tuple[int, int, str] | None:
    """(start, end, content) of the last brace-balanced box, or None."""
    start = text.rfind(_BOXED)
    while start >= 0:
        depth = 1
        i = start + len(_BOXED)
        while i < len(text) and depth > 0:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
            i += 1
        if depth == 0:
            return start, i, text[start + len(_BOXED): i - 1].strip()
        start = text.rfind(_BOXED, 0, start)
    return None


def extract_boxed(text: str) -> str | None:
    """Content of the last balanced ``\\boxed{...}``, or None.

    Braces inside the box are matched, so nested expressions like
    ``\\boxed{\\frac{3}{4}}`` come back whole. Unbalanced boxes yield None.
    """
    found = _last_balanced_box(text)
    return found[2] if found else None


def split_reasoning_answer(raw_text: str) -> tuple[str, str | None]:
    """Split a completion into (reasoning, boxed final answer).

    The reasoning excludes the final ``\\boxed{...}`` token itself; when no
    balanced box exists the whole text is reasoning and the answer is None.
    """
    found = _last_balanced_box(raw_text)
    if found is None:
        return raw_text.strip(), None
    start, end, answer = found
    prefix = raw_text[:start].rstrip()
    suffix = raw_text[end:].lstrip()
    reasoning = f"{prefix} {suffix}".strip() if prefix and suffix else prefix or suffix
    return reasoning, answer
