"""Server-sent event encoding for turn event streams.

Wire format per record:

    event: <type>\n
    data: <single-line JSON payload, including "seq">\n
    \n

seq increases strictly within one turn; exactly one terminal record
(done or error) closes the stream.
"""

from __future__ import annotations

import json

from ..orchestrator.events import TurnEvent

SSE_CONTENT_TYPE = "text/event-stream"


def encode_event(event: TurnEvent, seq: int) -> str:
    payload = dict(event.payload())
    payload["seq"] = seq
    data = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
    return f"event: {event.event_type}\ndata: {data}\n\n"


def parse_sse_stream(text: str) -> list[tuple[str, dict]]:
    """Inverse of encode_event, for tests and simple clients."""
    records: list[tuple[str, dict]] = []
    for block in text.split("\n\n"):
        event_type = None
        data = None
        for line in block.splitlines():
            if line.startswith("event:"):
                event_type = line[len("event:") :].strip()
            elif line.startswith("data:"):
                data = json.loads(line[len("data:") :].strip())
        if event_type is not None and data is not None:
            records.append((event_type, data))
    return records
