"""Prompt templates shipped as text assets.

Templates are plain ``str.format`` documents. A config may point at an
override directory; any file there with the same name shadows the packaged
asset, so deployments can tune wording without forking the package.

The marker constants below are distinctive substrings of each template.
The seeded mock backend dispatches on them to decide what kind of reply a
prompt expects, so renderers and the mock stay in sync through this module.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

PROBLEM_GENERATION = "problem_generation"
QUALITY_REVIEW = "quality_review"
ANSWER_BATTLE = "answer_battle"
PROBLEM_ANSWER = "problem_answer"

GENERATION_MARKER = "world-class designer of extremely challenging"
QUALITY_MARKER = "Respond with a JSON list"
BATTLE_MARKER = "double square brackets"
ANSWER_MARKER = "Solve the problem below"

# Substring the answering/battle templates place right before the problem
# body; the mock backend uses it to recover the problem text from a prompt.
PROBLEM_BODY_MARKER = "Problem:\n"


def load_template(name: str, override_dir: str | Path | None = None) -> str:
    """Return the template text, preferring an override directory if given."""
    if override_dir is not None:
        candidate = Path(override_dir) / f"{name}.txt"
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    return resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
