"""Uniform adapters for the external model services.

Everything downstream (ingestion, retrieval, orchestration) depends
only on the small protocols here, so backends can be swapped between
HTTP services and in-process mocks without touching callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..config import AppConfig
from .base import ProviderStats
from .chat import (
    ChatProvider,
    DemoChatProvider,
    HttpChatProvider,
    MockEnrichmentChat,
    ScriptedChatProvider,
)
from .embeddings import Embedder, HashEmbedder, HttpEmbedder
from .layout import HttpLayoutDetector, LayoutDetector, LayoutRegion, MockLayoutDetector
from .ocr import HttpOcrEngine, MockOcrEngine, OcrEngine


@dataclass
class ProviderSet:
    """The four model services plus shared call counters."""

    layout: LayoutDetector
    ocr: OcrEngine
    chat: ChatProvider
    embedder: Embedder
    stats: ProviderStats = field(default_factory=ProviderStats)


def build_providers(config: AppConfig, chat_override: ChatProvider | None = None) -> ProviderSet:
    """Construct providers per config.providers.mode ("mock" or "http")."""
    p = config.providers
    stats = ProviderStats()
    if p.mode == "mock":
        chat: ChatProvider
        if chat_override is not None:
            chat = chat_override
        elif p.chat_mock == "ingest":
            chat = MockEnrichmentChat(stats=stats)
        else:
            chat = DemoChatProvider(stats=stats)
        return ProviderSet(
            layout=MockLayoutDetector(
                dpi=config.ingestion.dpi,
                confidence_threshold=config.ingestion.confidence_threshold,
                stats=stats,
            ),
            ocr=MockOcrEngine(stats=stats),
            chat=chat,
            embedder=HashEmbedder(ctx_dim=p.ctx_dim, joint_dim=p.joint_dim, stats=stats),
            stats=stats,
        )
    if p.mode != "http":
        raise ValueError(f"unknown provider mode {p.mode!r}")
    common = dict(
        timeout_s=p.timeout_s,
        api_key=p.api_key,
        max_inflight=p.max_inflight,
        backoff=tuple(p.retry_backoff_s),
        stats=stats,
    )
    return ProviderSet(
        layout=HttpLayoutDetector(
            p.layout_url,
            dpi=config.ingestion.dpi,
            confidence_threshold=config.ingestion.confidence_threshold,
            **common,
        ),
        ocr=HttpOcrEngine(p.ocr_url, **common),
        chat=chat_override or HttpChatProvider(p.chat_url, **common),
        embedder=HttpEmbedder(p.embed_url, **common),
        stats=stats,
    )


__all__ = [
    "ProviderSet",
    "build_providers",
    "ProviderStats",
    "LayoutDetector",
    "LayoutRegion",
    "MockLayoutDetector",
    "HttpLayoutDetector",
    "OcrEngine",
    "MockOcrEngine",
    "HttpOcrEngine",
    "ChatProvider",
    "HttpChatProvider",
    "ScriptedChatProvider",
    "MockEnrichmentChat",
    "DemoChatProvider",
    "Embedder",
    "HashEmbedder",
    "HttpEmbedder",
]
