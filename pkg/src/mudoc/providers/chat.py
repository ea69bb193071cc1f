"""Chat completion with tool calls.

A completion yields either final text (optionally streamed token by
token) or a structured call to one of the two registered search tools.
Mock providers cover ingestion-time enrichment prompts, scripted
conversations for tests, and a self-contained demo mode; the HTTP
adapter speaks the common chat-completion wire shape.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

import httpx

from ..errors import BudgetExceeded, ProviderRefusal, ProviderUnavailable
from .base import HttpAdapter, ProviderStats, call_with_retries
from .pixelcode import decode_region

TOOL_SEARCH_TEXT = "search_text"
TOOL_SEARCH_IMAGES = "search_images"
TOOL_NAMES = (TOOL_SEARCH_TEXT, TOOL_SEARCH_IMAGES)

ROLES = ("system", "user", "assistant", "tool_result", "image_attachment")

OnToken = Callable[[str], None]


@dataclass(frozen=True)
class FigureRef:
    figure_id: str
    caption: str
    description: str


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str = ""
    tool_name: str | None = None
    tool_query: str | None = None
    tool_call_id: str | None = None
    figure_refs: tuple[FigureRef, ...] = ()
    images: tuple[bytes, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def char_len(self) -> int:
        return len(self.content)

    @property
    def is_tool_call(self) -> bool:
        return self.role == "assistant" and self.tool_name is not None


@dataclass(frozen=True)
class ChatOutcome:
    kind: str  # "final_text" | "tool_call"
    text: str = ""
    tool_name: str = ""
    tool_query: str = ""

    def __post_init__(self) -> None:
        if self.kind == "final_text":
            if self.tool_name or self.tool_query:
                raise ValueError("final_text outcome must not carry tool fields")
        elif self.kind == "tool_call":
            if self.text:
                raise ValueError("tool_call outcome must not carry text")
            if self.tool_name not in TOOL_NAMES:
                raise ValueError(f"unknown tool {self.tool_name!r}")
        else:
            raise ValueError(f"unknown outcome kind {self.kind!r}")

    @staticmethod
    def final(text: str) -> "ChatOutcome":
        return ChatOutcome(kind="final_text", text=text)

    @staticmethod
    def call(tool_name: str, tool_query: str) -> "ChatOutcome":
        return ChatOutcome(kind="tool_call", tool_name=tool_name, tool_query=tool_query)


class ChatProvider(Protocol):
    def complete(
        self,
        messages: list[ChatMessage],
        tools_enabled: bool = True,
        on_token: OnToken | None = None,
    ) -> ChatOutcome: ...


def stream_tokens(text: str, on_token: OnToken | None) -> None:
    """Deliver text as whitespace-preserving tokens; concat equals text."""
    if on_token is None:
        return
    for token in re.findall(r"\S*\s*", text):
        if token:
            on_token(token)


def _require_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role != "system":
        raise ValueError("first message must be the system message")


class ScriptedChatProvider:
    """Replays a fixed outcome script; deterministic and byte-stable.

    When tools are disabled, a scripted tool call degrades to final
    text carrying the query string, honoring the tools_enabled contract.
    """

    def __init__(self, script: Iterable[ChatOutcome], stats: ProviderStats | None = None):
        self._script = list(script)
        self._pos = 0
        self._stats = stats

    def reset(self) -> None:
        self._pos = 0

    def complete(
        self,
        messages: list[ChatMessage],
        tools_enabled: bool = True,
        on_token: OnToken | None = None,
    ) -> ChatOutcome:
        _require_messages(messages)
        if self._stats is not None:
            self._stats.bump("chat")
        if self._pos >= len(self._script):
            raise ProviderUnavailable("scripted conversation exhausted")
        outcome = self._script[self._pos]
        self._pos += 1
        if outcome.kind == "tool_call" and not tools_enabled:
            outcome = ChatOutcome.final(outcome.tool_query)
        if outcome.kind == "final_text":
            stream_tokens(outcome.text, on_token)
        return outcome


class MockEnrichmentChat:
    """Answers the ingestion prompt templates deterministically.

    Recognizes the TASK header each template starts with; cleaning
    normalizes whitespace, summarizing truncates, captioning decodes the
    pixel-coded seed from the attached figure crop.
    """

    def __init__(self, stats: ProviderStats | None = None):
        self._stats = stats

    def complete(
        self,
        messages: list[ChatMessage],
        tools_enabled: bool = True,
        on_token: OnToken | None = None,
    ) -> ChatOutcome:
        _require_messages(messages)
        if self._stats is not None:
            self._stats.bump("chat")
        prompt = messages[-1].content
        task = ""
        m = re.match(r"TASK:\s*(\w+)", prompt)
        if m:
            task = m.group(1)
        if task == "clean":
            raw = _section(prompt, "RAW TEXT:")
            text = " ".join(raw.split())
        elif task == "summarize":
            raw = _section(prompt, "RAW TEXT:")
            head = " ".join(raw.split())[:160]
            text = f"In short: {head}"
        elif task == "caption":
            seed = ""
            for img_bytes in messages[-1].images:
                import io

                from PIL import Image

                marker = decode_region(Image.open(io.BytesIO(img_bytes)))
                if marker:
                    seed = marker.payload
                    break
            seed = seed or "Untitled figure"
            text = f"CAPTION: {seed}\nDESCRIPTION: {seed}, as presented in the surrounding pages."
        else:
            raise ProviderRefusal(f"unrecognized enrichment prompt (task={task!r})")
        stream_tokens(text, on_token)
        return ChatOutcome.final(text)


def _section(prompt: str, header: str) -> str:
    idx = prompt.find(header)
    if idx < 0:
        raise ProviderRefusal(f"prompt missing {header!r} section")
    return prompt[idx + len(header) :].strip()


class DemoChatProvider:
    """Self-contained conversational behavior for mock-mode serving.

    Each turn searches text, then images, then answers with one grounded
    paragraph and the best retrieved figure. Decisions are a pure
    function of the visible message history.
    """

    def __init__(self, stats: ProviderStats | None = None):
        self._stats = stats

    def complete(
        self,
        messages: list[ChatMessage],
        tools_enabled: bool = True,
        on_token: OnToken | None = None,
    ) -> ChatOutcome:
        _require_messages(messages)
        if self._stats is not None:
            self._stats.bump("chat")
        last = messages[-1]
        query = next((m.content for m in reversed(messages) if m.role == "user" and not m.figure_refs), "")
        if tools_enabled and last.role == "user" and not last.figure_refs:
            return ChatOutcome.call(TOOL_SEARCH_TEXT, query)
        if tools_enabled and last.role == "tool_result" and last.tool_name == TOOL_SEARCH_TEXT:
            return ChatOutcome.call(TOOL_SEARCH_IMAGES, query)
        figs = next((m.figure_refs for m in reversed(messages) if m.figure_refs), ())
        excerpt = next(
            (m.content for m in reversed(messages) if m.role == "tool_result" and m.tool_name == TOOL_SEARCH_TEXT),
            "",
        )
        excerpt = " ".join(excerpt.split())[:280]
        parts = [f"Here is what the document says about {query}: {excerpt}"]
        if figs:
            fig = figs[0]
            parts.append(f'<img src="{fig.figure_id}"> {fig.description}')
            parts.append("The figure above comes straight from the source document.")
        text = "\n\n".join(parts)
        stream_tokens(text, on_token)
        return ChatOutcome.final(text)


def tool_definitions() -> list[dict]:
    """Tool schemas in the common function-calling wire shape."""
    defs = []
    for name, desc in (
        (TOOL_SEARCH_TEXT, "Search the indexed documents for relevant text passages."),
        (TOOL_SEARCH_IMAGES, "Search the indexed documents for relevant figures and diagrams."),
    ):
        defs.append(
            {
                "type": "function",
                "function": {
                    "name": name,
                    "description": desc,
                    "parameters": {
                        "type": "object",
                        "properties": {"query": {"type": "string", "description": "Search query."}},
                        "required": ["query"],
                    },
                },
            }
        )
    return defs


def to_wire(messages: list[ChatMessage]) -> list[dict]:
    """Lower internal messages to the chat-completion wire shape."""
    import base64

    wire: list[dict] = []
    for msg in messages:
        if msg.role == "system":
            wire.append({"role": "system", "content": msg.content})
        elif msg.role == "user":
            wire.append({"role": "user", "content": msg.content})
        elif msg.role == "assistant" and msg.is_tool_call:
            wire.append(
                {
                    "role": "assistant",
                    "content": None,
                    "tool_calls": [
                        {
                            "id": msg.tool_call_id or "call_0",
                            "type": "function",
                            "function": {
                                "name": msg.tool_name,
                                "arguments": json.dumps({"query": msg.tool_query}),
                            },
                        }
                    ],
                }
            )
        elif msg.role == "assistant":
            wire.append({"role": "assistant", "content": msg.content})
        elif msg.role == "tool_result":
            wire.append({"role": "tool", "tool_call_id": msg.tool_call_id or "call_0", "content": msg.content})
        elif msg.role == "image_attachment":
            content: list[dict] = [{"type": "text", "text": msg.content}]
            for img in msg.images:
                b64 = base64.b64encode(img).decode("ascii")
                content.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}})
            wire.append({"role": "user", "content": content})
    return wire


class HttpChatProvider(HttpAdapter):
    """Streams deltas from a chat-completion endpoint.

    Connection establishment is retried; once streaming has begun, a
    transport failure surfaces immediately rather than re-emitting
    tokens.
    """

    def __init__(self, base_url: str, model: str = "default", **kw):
        super().__init__(base_url, stats_key="chat", **kw)
        self.model = model

    def complete(
        self,
        messages: list[ChatMessage],
        tools_enabled: bool = True,
        on_token: OnToken | None = None,
    ) -> ChatOutcome:
        _require_messages(messages)
        if self._stats is not None:
            self._stats.bump("chat")
        payload = {
            "model": self.model,
            "messages": to_wire(messages),
            "stream": True,
        }
        if tools_enabled:
            payload["tools"] = tool_definitions()

        def open_stream() -> httpx.Response:
            with self._gate:
                req = self._client.build_request(
                    "POST", self.base_url + "/v1/chat/completions", json=payload, headers=self._headers
                )
                resp = self._client.send(req, stream=True)
            if resp.status_code == 413:
                resp.close()
                raise BudgetExceeded("input exceeds provider limit")
            if resp.status_code >= 500:
                resp.close()
                raise httpx.HTTPStatusError("server error", request=req, response=resp)
            if resp.status_code >= 400:
                body = resp.read().decode("utf-8", "replace")
                resp.close()
                if "context_length" in body or "too large" in body:
                    raise BudgetExceeded(body[:200])
                raise ProviderRefusal(f"chat backend rejected request: {body[:200]}")
            return resp

        resp = call_with_retries(open_stream, self._backoff, self._sleep)
        return self._consume(resp, on_token)

    def _consume(self, resp: httpx.Response, on_token: OnToken | None) -> ChatOutcome:
        text_parts: list[str] = []
        tool_name = ""
        arg_parts: list[str] = []
        try:
            for line in resp.iter_lines():
                if not line.startswith("data:"):
                    continue
                data = line[5:].strip()
                if data == "[DONE]":
                    break
                try:
                    chunk = json.loads(data)
                except json.JSONDecodeError as exc:
                    raise ProviderRefusal(f"unparseable stream chunk: {data[:100]}") from exc
                choices = chunk.get("choices") or []
                if not choices:
                    continue
                delta = choices[0].get("delta") or choices[0].get("message") or {}
                piece = delta.get("content")
                if piece:
                    text_parts.append(piece)
                    if on_token is not None:
                        on_token(piece)
                for tc in delta.get("tool_calls") or []:
                    fn = tc.get("function") or {}
                    if fn.get("name"):
                        tool_name = fn["name"]
                    if fn.get("arguments"):
                        arg_parts.append(fn["arguments"])
        except httpx.TransportError as exc:
            raise ProviderUnavailable(f"stream interrupted: {exc}") from exc
        finally:
            resp.close()
        if tool_name:
            try:
                query = json.loads("".join(arg_parts)).get("query", "")
            except json.JSONDecodeError as exc:
                raise ProviderRefusal("tool call without parseable arguments") from exc
            if tool_name not in TOOL_NAMES:
                raise ProviderRefusal(f"provider called unknown tool {tool_name!r}")
            return ChatOutcome.call(tool_name, query)
        if text_parts:
            return ChatOutcome.final("".join(text_parts))
        raise ProviderRefusal("provider returned neither text nor a tool call")


def new_tool_call_id() -> str:
    return f"call_{uuid.uuid4().hex[:12]}"
