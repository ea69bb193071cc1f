"""Chat turn orchestration: context, tool loop, rendering, mapping."""

from .context import CONTEXT_BUDGET_CHARS, build_context
from .events import (
    STATUS_GATHERING,
    STATUS_GENERATING,
    AnchorsEvent,
    BlockEvent,
    DoneEvent,
    ErrorEvent,
    StatusEvent,
    TokenEvent,
    TurnEvent,
    status_retrieving_images,
    status_retrieving_text,
)
from .rendering import RenderedBlock, map_paragraphs, render_response
from .session import Session, SessionStore
from .sysprompt import system_message
from .turn import Orchestrator, TurnResult

__all__ = [
    "CONTEXT_BUDGET_CHARS",
    "build_context",
    "STATUS_GATHERING",
    "STATUS_GENERATING",
    "status_retrieving_text",
    "status_retrieving_images",
    "StatusEvent",
    "TokenEvent",
    "BlockEvent",
    "AnchorsEvent",
    "DoneEvent",
    "ErrorEvent",
    "TurnEvent",
    "RenderedBlock",
    "render_response",
    "map_paragraphs",
    "Session",
    "SessionStore",
    "system_message",
    "Orchestrator",
    "TurnResult",
]
