"""HTTP service: sessions, streamed turns, document and figure assets.

Sessions live in memory; turn execution runs on a worker thread whose
events are fanned into the SSE response, so a client disconnect never
interrupts a turn - history stays consistent server-side. Asset routes
are immutable and ETag-cached.
"""

from __future__ import annotations

import queue
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..config import AppConfig
from ..errors import UnknownId
from ..index.store import DocumentIndex
from ..orchestrator import Orchestrator, SessionStore
from ..orchestrator.events import DoneEvent, ErrorEvent
from ..providers import ProviderSet
from .sse import SSE_CONTENT_TYPE, encode_event

UI_PROMPT_TEMPLATES = {
    "summarize": 'Summarize the following passage: "{selection}"',
    "eli10": 'Explain the following passage like I\'m 10 years old: "{selection}"',
}


class CreateSessionBody(BaseModel):
    doc_id: str


class MessageBody(BaseModel):
    text: str


def create_app(
    indices: dict[str, DocumentIndex],
    providers: ProviderSet,
    config: AppConfig,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="mudoc", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[config.server.cors_origin] if config.server.cors_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    orchestrator = Orchestrator(indices=indices, providers=providers, config=config)
    sessions = SessionStore(log_path=config.server.session_log_path or None)
    app.state.orchestrator = orchestrator
    app.state.sessions = sessions

    def _owning_index(record_id: str) -> DocumentIndex | None:
        for index in indices.values():
            if index.has_record(record_id):
                return index
        return None

    def _etag_response(data: bytes, etag: str, media_type: str, request: Request) -> Response:
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304, headers={"ETag": etag})
        return Response(content=data, media_type=media_type, headers={"ETag": etag})

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "docs": sorted(indices)}

    @app.get("/api/config")
    def ui_config() -> dict:
        return {
            "prompt_templates": UI_PROMPT_TEMPLATES,
            "docs": sorted(indices),
            "highlight_seconds": 3.0,
        }

    @app.get("/api/docs/{doc_id}/meta")
    def doc_meta(doc_id: str) -> Response:
        index = indices.get(doc_id)
        if index is None:
            return JSONResponse({"detail": "unknown document"}, status_code=404)
        return JSONResponse(
            {
                "doc_id": doc_id,
                "pages": len(index.manifest.page_sizes_pt),
                "page_sizes_pt": index.manifest.page_sizes_pt,
                "dpi": index.manifest.dpi,
                "counts": index.manifest.counts,
            }
        )

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> Response:
        if body.doc_id not in indices:
            return JSONResponse({"detail": "unknown document"}, status_code=404)
        session = sessions.create([body.doc_id])
        return JSONResponse({"session_id": session.session_id}, status_code=201)

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody) -> Response:
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        if not body.text.strip():
            return JSONResponse({"detail": "empty message"}, status_code=400)
        if not session.lock.acquire(blocking=False):
            return JSONResponse({"detail": "a turn is already in progress"}, status_code=409)

        events: "queue.Queue[object]" = queue.Queue()
        seq_counter = {"n": 0}

        def emit(event) -> None:
            events.put(event)
            sessions.log(
                {"event": "turn_event", "session_id": session_id, "type": event.event_type}
            )

        def worker() -> None:
            try:
                orchestrator.run_turn_locked(session, body.text, emit)
            except Exception as exc:  # defensive: stream must always terminate
                events.put(ErrorEvent(f"internal error: {exc}"))
            finally:
                session.lock.release()
                events.put(None)

        threading.Thread(target=worker, name=f"turn-{session_id}", daemon=True).start()

        def stream():
            while True:
                event = events.get()
                if event is None:
                    return
                yield encode_event(event, seq_counter["n"])
                seq_counter["n"] += 1

        return StreamingResponse(stream(), media_type=SSE_CONTENT_TYPE)

    @app.get("/api/docs/{doc_id}/pdf")
    def doc_pdf(doc_id: str, request: Request) -> Response:
        index = indices.get(doc_id)
        if index is None:
            return JSONResponse({"detail": "unknown document"}, status_code=404)
        etag = index.manifest.file_hashes.get("document.pdf", "")
        return _etag_response(index.asset_bytes("document.pdf"), etag, "application/pdf", request)

    @app.get("/api/docs/{doc_id}/pages/{page_index}")
    def doc_page(doc_id: str, page_index: int, request: Request) -> Response:
        index = indices.get(doc_id)
        if index is None:
            return JSONResponse({"detail": "unknown document"}, status_code=404)
        rel = f"pages/{page_index}.png"
        if rel not in index.manifest.file_hashes:
            return JSONResponse({"detail": "unknown page"}, status_code=404)
        return _etag_response(index.asset_bytes(rel), index.manifest.file_hashes[rel], "image/png", request)

    @app.get("/api/figures/{figure_id}")
    def figure(figure_id: str, request: Request) -> Response:
        index = _owning_index(figure_id)
        if index is None:
            return JSONResponse({"detail": "unknown figure"}, status_code=404)
        try:
            record = index.figure(figure_id)
            snippet = index.snippet(record.snippet_id)
            data = index.asset_bytes(snippet.image_ref)
        except UnknownId:
            return JSONResponse({"detail": "unknown figure"}, status_code=404)
        etag = index.manifest.file_hashes.get(snippet.image_ref, "")
        return _etag_response(data, etag, "image/png", request)

    @app.get("/api/anchors/{record_id}")
    def anchor(record_id: str) -> Response:
        index = _owning_index(record_id)
        if index is None:
            return JSONResponse({"detail": "unknown record"}, status_code=404)
        try:
            found = index.anchor_for(record_id)
        except UnknownId:
            return JSONResponse({"detail": "unknown record"}, status_code=404)
        return JSONResponse(found.to_json())

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
