"""Chunk cleaning/summarization and figure captioning via the chat provider."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ProviderRefusal
from ..index.records import DocumentSnippet
from ..providers.chat import ChatMessage, ChatProvider
from ..prompts import load_template, render

ENRICH_SYSTEM = ChatMessage(role="system", content="You are a precise document processing assistant.")


@dataclass(frozen=True)
class PageContext:
    """Full OCR text of the neighboring pages; empty at document edges."""

    page_index: int
    prev_text: str
    curr_text: str
    next_text: str


def page_context(page_texts: list[str], page_index: int) -> PageContext:
    return PageContext(
        page_index=page_index,
        prev_text=page_texts[page_index - 1] if page_index > 0 else "",
        curr_text=page_texts[page_index] if 0 <= page_index < len(page_texts) else "",
        next_text=page_texts[page_index + 1] if page_index + 1 < len(page_texts) else "",
    )


def build_clean_prompt(raw_text: str, ctx: PageContext) -> str:
    template, _ = load_template("clean_v1.txt")
    return render(template, prev=ctx.prev_text, curr=ctx.curr_text, next=ctx.next_text, raw=raw_text)


def build_summary_prompt(raw_text: str, ctx: PageContext) -> str:
    template, _ = load_template("summarize_v1.txt")
    return render(template, prev=ctx.prev_text, curr=ctx.curr_text, next=ctx.next_text, raw=raw_text)


def build_caption_prompt(ctx: PageContext) -> str:
    template, _ = load_template("caption_v1.txt")
    return render(template, prev=ctx.prev_text, curr=ctx.curr_text, next=ctx.next_text)


def clean_and_summarize(
    chat: ChatProvider,
    raw_text: str,
    ctx: PageContext,
    summary_threshold: int = 1000,
) -> tuple[str, str | None, list[str]]:
    """Returns (cleaned_text, summary_text or None, warnings).

    A refusal degrades to the raw text with the chunk flagged; summaries
    exist exactly when the raw text exceeds the threshold.
    """
    if not raw_text:
        raise ValueError("chunk raw_text must be non-empty")
    warnings: list[str] = []
    try:
        outcome = chat.complete(
            [ENRICH_SYSTEM, ChatMessage(role="user", content=build_clean_prompt(raw_text, ctx))],
            tools_enabled=False,
        )
        cleaned = outcome.text.strip() or raw_text
    except ProviderRefusal as exc:
        warnings.append(f"cleaning refused, kept raw text: {exc}")
        return raw_text, None, warnings

    summary: str | None = None
    if len(raw_text) > summary_threshold:
        try:
            outcome = chat.complete(
                [ENRICH_SYSTEM, ChatMessage(role="user", content=build_summary_prompt(raw_text, ctx))],
                tools_enabled=False,
            )
            summary = outcome.text.strip() or None
        except ProviderRefusal as exc:
            warnings.append(f"summarization refused: {exc}")
            summary = None
        if summary is None:
            # The summary-presence predicate is a hard invariant; a refusal
            # falls back to a truncation rather than dropping the variant.
            summary = raw_text[:summary_threshold]
            warnings.append("summary fell back to truncated raw text")
    return cleaned, summary, warnings


def describe_figure(
    chat: ChatProvider,
    snippet: DocumentSnippet,
    crop_png: bytes,
    ctx: PageContext,
    caption_max_chars: int = 300,
) -> tuple[str, str, list[str]]:
    """Returns (caption, description, warnings) for a figure snippet."""
    if snippet.region_class != "figure":
        raise ValueError("describe_figure requires a figure-class snippet")
    warnings: list[str] = []
    try:
        outcome = chat.complete(
            [
                ENRICH_SYSTEM,
                ChatMessage(role="user", content=build_caption_prompt(ctx), images=(crop_png,)),
            ],
            tools_enabled=False,
        )
        caption, description = _parse_caption_response(outcome.text)
    except ProviderRefusal as exc:
        warnings.append(f"captioning failed for {snippet.snippet_id}: {exc}")
        caption, description = "", ""
    if not caption:
        caption = f"Figure on page {snippet.page_index + 1}"
        description = ""
        if not warnings:
            warnings.append(f"captioning returned no caption for {snippet.snippet_id}")
    return caption[:caption_max_chars], description, warnings


def _parse_caption_response(text: str) -> tuple[str, str]:
    caption = ""
    description_lines: list[str] = []
    in_description = False
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.upper().startswith("CAPTION:"):
            caption = stripped[len("CAPTION:") :].strip()
            in_description = False
        elif stripped.upper().startswith("DESCRIPTION:"):
            description_lines = [stripped[len("DESCRIPTION:") :].strip()]
            in_description = True
        elif in_description and stripped:
            description_lines.append(stripped)
    return caption, " ".join(d for d in description_lines if d).strip()
