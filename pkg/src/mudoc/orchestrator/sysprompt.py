"""The versioned system message driving grounded, multimodal answers."""

from __future__ import annotations

from ..prompts import load_template, render
from ..providers.chat import TOOL_SEARCH_IMAGES, TOOL_SEARCH_TEXT

SYSTEM_TEMPLATE = "system_v1.txt"


def system_message(
    search_text_tool: str = TOOL_SEARCH_TEXT,
    search_images_tool: str = TOOL_SEARCH_IMAGES,
) -> tuple[str, str]:
    """Returns (prompt text, template sha256)."""
    template, digest = load_template(SYSTEM_TEMPLATE)
    text = render(template, search_text=search_text_tool, search_images=search_images_tool)
    return text, digest
