"""Chat sessions and their in-memory store."""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..providers.chat import ChatMessage


@dataclass
class Session:
    session_id: str
    doc_ids: list[str]
    history: list[ChatMessage] = field(default_factory=list)
    turn_counter: int = 0
    meta: dict[str, str] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    """Thread-safe session registry with an optional append-only log."""

    def __init__(self, log_path: str | Path | None = None):
        self._sessions: dict[str, Session] = {}
        self._guard = threading.Lock()
        self._log_path = Path(log_path) if log_path else None
        self._log_lock = threading.Lock()

    def create(self, doc_ids: list[str], meta: dict[str, str] | None = None) -> Session:
        session = Session(session_id=f"s-{uuid.uuid4().hex[:16]}", doc_ids=list(doc_ids), meta=dict(meta or {}))
        with self._guard:
            self._sessions[session.session_id] = session
        self.log({"event": "session_created", "session_id": session.session_id, "doc_ids": doc_ids})
        return session

    def get(self, session_id: str) -> Session | None:
        with self._guard:
            return self._sessions.get(session_id)

    def log(self, record: dict) -> None:
        if self._log_path is None:
            return
        with self._log_lock:
            with open(self._log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
