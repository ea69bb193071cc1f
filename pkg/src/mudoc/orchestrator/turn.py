"""Running one chat turn end to end.

The loop: complete against the bounded context; on a tool call, emit a
status event, run retrieval, append the tool result (image results also
append a user-visible attachment message carrying the actual crops);
on final text, render blocks and map paragraph anchors. History commits
atomically at the end of the turn; any failure leaves the session
exactly as it was.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..config import AppConfig
from ..errors import MudocError
from ..index.store import DocumentIndex
from ..providers import ProviderSet
from ..providers.chat import (
    TOOL_SEARCH_IMAGES,
    TOOL_SEARCH_TEXT,
    ChatMessage,
    ChatOutcome,
    FigureRef,
    new_tool_call_id,
)
from ..retrieval.scoring import retrieve_images, retrieve_text
from .context import build_context
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
from .session import Session
from .sysprompt import system_message

Emit = Callable[[TurnEvent], None]


@dataclass
class TurnResult:
    turn_id: str
    final_text: str
    blocks: list[RenderedBlock]
    flags: tuple[str, ...] = ()


@dataclass
class Orchestrator:
    indices: dict[str, DocumentIndex]
    providers: ProviderSet
    config: AppConfig
    _system_cache: tuple[str, str] | None = field(default=None, repr=False)

    def _system(self) -> tuple[ChatMessage, str]:
        if self._system_cache is None:
            self._system_cache = system_message()
        text, digest = self._system_cache
        return ChatMessage(role="system", content=text), digest

    def session_indices(self, session: Session) -> list[DocumentIndex]:
        return [self.indices[d] for d in session.doc_ids if d in self.indices]

    def run_turn(self, session: Session, user_text: str, emit: Emit) -> TurnResult | None:
        """Execute a turn, emitting events; returns None after an error."""
        if not user_text:
            raise ValueError("user_text must be non-empty")
        with session.lock:
            return self.run_turn_locked(session, user_text, emit)

    def run_turn_locked(self, session: Session, user_text: str, emit: Emit) -> TurnResult | None:
        """Turn body; the caller must already hold session.lock."""
        cfg = self.config.orchestrator
        indices = self.session_indices(session)
        system_msg, prompt_hash = self._system()
        session.meta.setdefault("system_prompt_hash", prompt_hash)
        pending: list[ChatMessage] = [ChatMessage(role="user", content=user_text)]
        flags: list[str] = []
        generating = False

        def on_token(token: str) -> None:
            nonlocal generating
            if not generating:
                generating = True
                emit(StatusEvent(STATUS_GENERATING))
            emit(TokenEvent(token))

        emit(StatusEvent(STATUS_GATHERING))
        try:
            final_text = None
            rounds = 0
            while final_text is None:
                tools_enabled = rounds < cfg.max_tool_calls
                if not tools_enabled and "forced_finalization" not in flags:
                    flags.append("forced_finalization")
                context, ctx_flags = build_context(
                    session.history + pending, system_msg, cfg.context_budget_chars
                )
                for f in ctx_flags:
                    if f not in flags:
                        flags.append(f)
                outcome = self.providers.chat.complete(context, tools_enabled, on_token=on_token)
                if outcome.kind == "final_text":
                    final_text = outcome.text
                    pending.append(ChatMessage(role="assistant", content=final_text))
                    break
                rounds += 1
                self._execute_tool(outcome, indices, pending, emit)

            if not generating:
                emit(StatusEvent(STATUS_GENERATING))
            blocks = render_response(final_text, indices)
            blocks = map_paragraphs(
                blocks,
                indices,
                self.providers.embedder,
                threshold=cfg.map_threshold,
                min_paragraph_chars=cfg.min_paragraph_chars,
                min_snippet_chars=cfg.min_snippet_chars,
            )
            for i, block in enumerate(blocks):
                emit(BlockEvent(i, block))
            anchors = tuple(
                {
                    "block_index": i,
                    "record_id": b.figure_id if b.kind == "figure" else None,
                    "anchor": b.anchor.to_json(),
                    "map_score": b.map_score,
                }
                for i, b in enumerate(blocks)
                if b.anchor is not None
            )
            emit(AnchorsEvent(anchors))
        except MudocError as exc:
            emit(ErrorEvent(f"{type(exc).__name__}: {exc}"))
            return None

        session.history.extend(pending)
        session.turn_counter += 1
        turn_id = f"{session.session_id}-t{session.turn_counter}"
        emit(DoneEvent(turn_id, tuple(flags)))
        return TurnResult(turn_id=turn_id, final_text=final_text, blocks=blocks, flags=tuple(flags))

    def _execute_tool(
        self,
        outcome: ChatOutcome,
        indices: list[DocumentIndex],
        pending: list[ChatMessage],
        emit: Emit,
    ) -> None:
        query = outcome.tool_query
        call_id = new_tool_call_id()
        pending.append(
            ChatMessage(
                role="assistant",
                tool_name=outcome.tool_name,
                tool_query=query,
                tool_call_id=call_id,
            )
        )
        k = self.config.retrieval.top_k
        if outcome.tool_name == TOOL_SEARCH_TEXT:
            emit(StatusEvent(status_retrieving_text(query)))
            hits = retrieve_text(query, indices, self.providers.embedder, k) if query else []
            chunk_by_id = {c.chunk_id: c for idx in indices for c in idx.chunks}
            parts = []
            for hit in hits:
                chunk = chunk_by_id[hit.chunk_id]
                parts.append(f"[{chunk.chunk_id}] (page {chunk.first_page + 1})\n{chunk.cleaned_text}")
            content = "\n\n".join(parts) if parts else "(no results)"
            pending.append(
                ChatMessage(role="tool_result", content=content, tool_name=outcome.tool_name, tool_call_id=call_id)
            )
            return
        if outcome.tool_name == TOOL_SEARCH_IMAGES:
            emit(StatusEvent(status_retrieving_images(query)))
            hits = retrieve_images(query, indices, self.providers.embedder, k) if query else []
            figure_by_id = {f.figure_id: (f, idx) for idx in indices for f in idx.figures}
            refs: list[FigureRef] = []
            images: list[bytes] = []
            lines: list[str] = []
            for hit in hits:
                fig, idx = figure_by_id[hit.figure_id]
                refs.append(FigureRef(fig.figure_id, fig.caption, fig.description))
                lines.append(f"{fig.figure_id} | {fig.caption} | {fig.description}")
                snippet = idx.snippet(fig.snippet_id)
                images.append(idx.asset_bytes(snippet.image_ref))
            content = "\n".join(lines) if lines else "(no results)"
            pending.append(
                ChatMessage(role="tool_result", content=content, tool_name=outcome.tool_name, tool_call_id=call_id)
            )
            # Chat backends reject images inside tool results, so the crops
            # ride in a user-visible attachment immediately afterwards.
            pending.append(
                ChatMessage(
                    role="image_attachment",
                    content=content,
                    figure_refs=tuple(refs),
                    images=tuple(images),
                )
            )
            return
        raise MudocError(f"provider called unknown tool {outcome.tool_name!r}")
