"""Versioned prompt templates shipped with the package."""

from __future__ import annotations

import hashlib
from importlib import resources


def load_template(name: str) -> tuple[str, str]:
    """Return (template text, sha256 hex) for a template file."""
    text = resources.files(__package__).joinpath(name).read_text(encoding="utf-8")
    return text, hashlib.sha256(text.encode("utf-8")).hexdigest()


def render(template: str, **slots: str) -> str:
    """Fill {slot} placeholders literally; slot values are never parsed."""
    out = template
    for key, value in slots.items():
        out = out.replace("{" + key + "}", value)
    return out
