"""Record types stored in a document index."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

REGION_CLASSES = ("title", "text", "figure", "list", "table")

FORMAT_VERSION = 1


@dataclass(frozen=True)
class DocumentSnippet:
    """One detected layout region with its crop and OCR text."""

    snippet_id: str
    doc_id: str
    page_index: int
    bbox: tuple[float, float, float, float]  # top-down PDF points
    region_class: str
    image_ref: str  # index-relative path of the stored crop
    raw_text: str  # empty for figure-class snippets

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["bbox"] = list(self.bbox)
        return d

    @staticmethod
    def from_json(d: dict[str, Any]) -> "DocumentSnippet":
        return DocumentSnippet(
            snippet_id=d["snippet_id"],
            doc_id=d["doc_id"],
            page_index=int(d["page_index"]),
            bbox=tuple(float(v) for v in d["bbox"]),
            region_class=d["region_class"],
            image_ref=d["image_ref"],
            raw_text=d["raw_text"],
        )


@dataclass(frozen=True)
class TextChunk:
    """A windowed span of concatenated snippet text with its variants."""

    chunk_id: str
    doc_id: str
    snippet_ids: tuple[str, ...]
    raw_text: str
    cleaned_text: str
    summary_text: str | None
    first_page: int

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["snippet_ids"] = list(self.snippet_ids)
        return d

    @staticmethod
    def from_json(d: dict[str, Any]) -> "TextChunk":
        return TextChunk(
            chunk_id=d["chunk_id"],
            doc_id=d["doc_id"],
            snippet_ids=tuple(d["snippet_ids"]),
            raw_text=d["raw_text"],
            cleaned_text=d["cleaned_text"],
            summary_text=d.get("summary_text"),
            first_page=int(d["first_page"]),
        )


@dataclass(frozen=True)
class FigureRecord:
    """A figure snippet with generated caption and description.

    figure_id doubles as the crop filename stem referenced by image
    tags in chat responses.
    """

    figure_id: str
    doc_id: str
    snippet_id: str
    caption: str
    description: str

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_json(d: dict[str, Any]) -> "FigureRecord":
        return FigureRecord(
            figure_id=d["figure_id"],
            doc_id=d["doc_id"],
            snippet_id=d["snippet_id"],
            caption=d["caption"],
            description=d["description"],
        )


@dataclass(frozen=True)
class SourceAnchor:
    """Where a record lives in the PDF, for navigation and highlighting."""

    doc_id: str
    page_index: int
    bbox: tuple[float, float, float, float]
    kind: str  # "figure" | "text_snippet"

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["bbox"] = list(self.bbox)
        return d


@dataclass
class Manifest:
    """Build metadata plus the content hashes that seal the index."""

    doc_id: str
    format_version: int = FORMAT_VERSION
    content_hash: str = ""
    config_hash: str = ""
    counts: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    embedding_dims: dict[str, int] = field(default_factory=dict)
    page_sizes_pt: list[list[float]] = field(default_factory=list)
    dpi: int = 200
    prompt_hashes: dict[str, str] = field(default_factory=dict)
    file_hashes: dict[str, str] = field(default_factory=dict)
    index_hash: str = ""
    created_at: str = ""

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_json(d: dict[str, Any]) -> "Manifest":
        return Manifest(**{k: d[k] for k in d if k in Manifest.__dataclass_fields__})
