"""Typed events emitted while a chat turn runs.

The server wraps these into SSE records; the exact status strings are
part of the UI contract and must not drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

STATUS_GATHERING = "Gathering information"
STATUS_GENERATING = "Generating a response"


def status_retrieving_text(query: str) -> str:
    return f"Retrieving text for {query}"


def status_retrieving_images(query: str) -> str:
    return f"Retrieving images for {query}"


@dataclass(frozen=True)
class StatusEvent:
    text: str
    event_type: str = field(default="status", init=False)

    def payload(self) -> dict[str, Any]:
        return {"text": self.text}


@dataclass(frozen=True)
class TokenEvent:
    text: str
    event_type: str = field(default="token", init=False)

    def payload(self) -> dict[str, Any]:
        return {"text": self.text}


@dataclass(frozen=True)
class BlockEvent:
    block_index: int
    block: Any  # RenderedBlock; serialized via its to_json
    event_type: str = field(default="block", init=False)

    def payload(self) -> dict[str, Any]:
        return {"block_index": self.block_index, "block": self.block.to_json()}


@dataclass(frozen=True)
class AnchorsEvent:
    anchors: tuple[dict, ...]
    event_type: str = field(default="anchors", init=False)

    def payload(self) -> dict[str, Any]:
        return {"anchors": list(self.anchors)}


@dataclass(frozen=True)
class DoneEvent:
    turn_id: str
    flags: tuple[str, ...] = ()
    event_type: str = field(default="done", init=False)

    def payload(self) -> dict[str, Any]:
        return {"turn_id": self.turn_id, "flags": list(self.flags)}


@dataclass(frozen=True)
class ErrorEvent:
    message: str
    event_type: str = field(default="error", init=False)

    def payload(self) -> dict[str, Any]:
        return {"message": self.message}


TurnEvent = StatusEvent | TokenEvent | BlockEvent | AnchorsEvent | DoneEvent | ErrorEvent
