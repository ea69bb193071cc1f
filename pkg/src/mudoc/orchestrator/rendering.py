"""Turning final chat text into renderable blocks with source anchors.

The final text is split on image tags and blank lines. Recognized image
tags become figure blocks carrying the stored caption and the figure's
page anchor; unknown filenames degrade to a flagged paragraph holding
the tag text verbatim. Paragraphs long enough to be meaningful are then
mapped back to their closest source snippet by embedding similarity.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ..errors import ProviderUnavailable
from ..index.records import SourceAnchor
from ..index.store import DocumentIndex
from ..providers.embeddings import Embedder

logger = logging.getLogger(__name__)

IMG_TAG = re.compile(r"<img\b[^>]*?\bsrc\s*=\s*[\"']([^\"']+)[\"'][^>]*?/?>", re.IGNORECASE)
PARAGRAPH_SPLIT = re.compile(r"\n{2,}")

MIN_MAPPED_PARAGRAPH_CHARS = 100
MIN_MAPPING_TARGET_CHARS = 100
DEFAULT_MAP_THRESHOLD = 0.60


@dataclass
class RenderedBlock:
    kind: str  # "paragraph" | "figure"
    text: str = ""
    figure_id: str | None = None
    caption: str | None = None
    anchor: SourceAnchor | None = None
    map_score: float | None = None
    flagged: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "text": self.text,
            "figure_id": self.figure_id,
            "caption": self.caption,
            "anchor": self.anchor.to_json() if self.anchor else None,
            "map_score": self.map_score,
            "flagged": self.flagged,
        }


def _paragraph_blocks(segment: str) -> list[RenderedBlock]:
    blocks = []
    for part in PARAGRAPH_SPLIT.split(segment):
        text = part.strip()
        if text:
            blocks.append(RenderedBlock(kind="paragraph", text=text))
    return blocks


def render_response(final_text: str, indices: Sequence[DocumentIndex]) -> list[RenderedBlock]:
    """Split final text into paragraph and figure blocks, order preserved."""
    figures = {}
    for index in indices:
        for fig in index.figures:
            figures.setdefault(fig.figure_id, (fig, index))
    blocks: list[RenderedBlock] = []
    last_end = 0
    for m in IMG_TAG.finditer(final_text):
        blocks.extend(_paragraph_blocks(final_text[last_end : m.start()]))
        src = m.group(1).rsplit("/", 1)[-1]
        if src in figures:
            fig, index = figures[src]
            blocks.append(
                RenderedBlock(
                    kind="figure",
                    figure_id=fig.figure_id,
                    caption=fig.caption,
                    anchor=index.anchor_for(fig.figure_id),
                )
            )
        else:
            logger.warning("response referenced unknown figure %r", src)
            blocks.append(RenderedBlock(kind="paragraph", text=m.group(0), flagged=True))
        last_end = m.end()
    blocks.extend(_paragraph_blocks(final_text[last_end:]))
    return blocks


def _mapping_targets(indices: Sequence[DocumentIndex], min_chars: int):
    """Snippet vectors eligible as mapping targets, sorted by id."""
    rows: list[tuple[str, np.ndarray, DocumentIndex]] = []
    for index in indices:
        mat = index.matrix("snippet.raw.ctx_text")
        if mat is None or len(mat) == 0:
            continue
        vectors = mat.vectors
        for i, sid in enumerate(mat.ids):
            snippet = index.snippet(sid)
            if len(snippet.raw_text) >= min_chars:
                rows.append((sid, vectors[i], index))
    rows.sort(key=lambda r: r[0])
    return rows


def map_paragraphs(
    blocks: list[RenderedBlock],
    indices: Sequence[DocumentIndex],
    embedder: Embedder,
    threshold: float = DEFAULT_MAP_THRESHOLD,
    min_paragraph_chars: int = MIN_MAPPED_PARAGRAPH_CHARS,
    min_snippet_chars: int = MIN_MAPPING_TARGET_CHARS,
) -> list[RenderedBlock]:
    """Attach source anchors to paragraphs that match a snippet well.

    Short paragraphs are never mapped; short snippets are never mapping
    targets (headings make confusing anchors). The best score is stored
    on every examined paragraph even when below threshold.
    """
    targets = _mapping_targets(indices, min_snippet_chars)
    if not targets:
        return blocks
    matrix = np.vstack([t[1] for t in targets]).astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", matrix, matrix))
    norms[norms == 0.0] = np.inf
    for block in blocks:
        if block.kind != "paragraph" or block.flagged:
            continue
        if len(block.text) < min_paragraph_chars:
            continue
        try:
            q = np.asarray(embedder.embed(block.text, "ctx_text"), dtype=np.float64)
        except ProviderUnavailable as exc:
            logger.warning("paragraph mapping skipped, embedding failed: %s", exc)
            block.flagged = True
            continue
        qn = float(np.linalg.norm(q))
        if qn == 0.0:
            continue
        sims = (matrix @ q) / (norms * qn)
        best = int(np.argmax(sims))
        score = float(sims[best])
        block.map_score = score
        if score >= threshold:
            sid, _, index = targets[best]
            block.anchor = index.anchor_for(sid)
    return blocks
