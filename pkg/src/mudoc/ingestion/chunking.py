"""Windowing snippet text into bounded, overlapping chunks.

The document is modeled as one long string: snippet texts joined by a
separator. Chunks are intervals over that string, which makes the three
hard guarantees easy to reason about: no chunk exceeds the size limit,
consecutive chunks share at least the overlap amount, and the union of
intervals covers every character.

Interval selection prefers snippet boundaries: a chunk extends to the
last whole snippet that fits its window, and the next chunk restarts at
the latest snippet start that still preserves the overlap. When no
boundary fits (a snippet longer than the window, or one so positioned
that boundary packing would stall), the chunker falls back to character
granularity for that step and keeps the overlap exact.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from ..index.records import DocumentSnippet, TextChunk


@dataclass(frozen=True)
class ChunkSpan:
    """A chunk interval over the joined document string."""

    start: int
    end: int
    raw_text: str
    snippet_ids: tuple[str, ...]
    first_page: int


def needs_summary(raw_text: str, threshold: int = 1000) -> bool:
    """Summaries exist exactly for chunks above the threshold."""
    return len(raw_text) > threshold


def chunk_spans(
    snippets: list[DocumentSnippet],
    chunk_size: int = 2000,
    overlap: int = 500,
    separator: str = "\n\n",
) -> list[ChunkSpan]:
    if overlap >= chunk_size:
        raise ValueError("overlap must be smaller than chunk_size")
    usable = [s for s in snippets if s.region_class != "figure" and s.raw_text]
    if not usable:
        return []
    texts = [s.raw_text for s in usable]
    doc = separator.join(texts)
    starts: list[int] = []
    ends: list[int] = []
    pos = 0
    for text in texts:
        starts.append(pos)
        pos += len(text)
        ends.append(pos)
        pos += len(separator)
    total = len(doc)

    spans: list[tuple[int, int]] = []
    p = 0
    while True:
        if total - p <= chunk_size:
            spans.append((p, total))
            break
        window_end = p + chunk_size
        # Largest whole-snippet end inside (p, window_end].
        i = bisect.bisect_right(ends, window_end) - 1
        b = ends[i] if i >= 0 and ends[i] > p else None
        if b is None or b - p <= overlap:
            b = window_end
        spans.append((p, b))
        # Latest snippet start in (p, b - overlap]; else exact-overlap cut.
        j = bisect.bisect_right(starts, b - overlap) - 1
        p = starts[j] if j >= 0 and starts[j] > p else b - overlap

    page_of = {s.snippet_id: s.page_index for s in usable}
    out: list[ChunkSpan] = []
    for start, end in spans:
        members = tuple(
            s.snippet_id for s, s0, s1 in zip(usable, starts, ends) if s0 < end and s1 > start
        )
        first_page = page_of[members[0]]
        out.append(
            ChunkSpan(
                start=start,
                end=end,
                raw_text=doc[start:end],
                snippet_ids=members,
                first_page=first_page,
            )
        )
    return out


def build_chunks(
    snippets: list[DocumentSnippet],
    doc_id: str,
    chunk_size: int = 2000,
    overlap: int = 500,
    separator: str = "\n\n",
) -> list[TextChunk]:
    """Chunk records with raw text only; enrichment fills the variants."""
    chunks = []
    for seq, span in enumerate(chunk_spans(snippets, chunk_size, overlap, separator)):
        chunks.append(
            TextChunk(
                chunk_id=f"{doc_id}-c{seq}",
                doc_id=doc_id,
                snippet_ids=span.snippet_ids,
                raw_text=span.raw_text,
                cleaned_text="",
                summary_text=None,
                first_page=span.first_page,
            )
        )
    return chunks
