"""Shared fixtures: synthetic documents, mock providers, built indices."""

from __future__ import annotations

import pytest

from mudoc import fixtures
from mudoc.config import AppConfig
from mudoc.ingestion.pipeline import ingest_document
from mudoc.providers import ProviderSet, ProviderStats, build_providers
from mudoc.providers.chat import MockEnrichmentChat
from mudoc.providers.embeddings import HashEmbedder
from mudoc.providers.layout import MockLayoutDetector
from mudoc.providers.ocr import MockOcrEngine


def make_config(**overrides) -> AppConfig:
    config = AppConfig()
    config.providers.mode = "mock"
    config.providers.chat_mock = "ingest"
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        setattr(getattr(config, section), key, value)
    return config


def mock_providers(config: AppConfig | None = None, chat=None) -> ProviderSet:
    config = config or make_config()
    stats = ProviderStats()
    return ProviderSet(
        layout=MockLayoutDetector(
            dpi=config.ingestion.dpi,
            confidence_threshold=config.ingestion.confidence_threshold,
            stats=stats,
        ),
        ocr=MockOcrEngine(stats=stats),
        chat=chat if chat is not None else MockEnrichmentChat(stats=stats),
        embedder=HashEmbedder(
            ctx_dim=config.providers.ctx_dim, joint_dim=config.providers.joint_dim, stats=stats
        ),
        stats=stats,
    )


@pytest.fixture(scope="session")
def sample_doc() -> fixtures.FixtureDoc:
    return fixtures.sample_document(n_pages=5, n_figures=2, seed=11)


@pytest.fixture(scope="session")
def sample_index(sample_doc, tmp_path_factory):
    """A fully built index over the 5-page sample document."""
    config = make_config()
    providers = mock_providers(config)
    out = tmp_path_factory.mktemp("index") / "sample"
    index, report = ingest_document(sample_doc.pdf_bytes, out, config, providers, doc_id="sample")
    return index


@pytest.fixture()
def config() -> AppConfig:
    return make_config()


class EventCollector:
    """Callable sink capturing orchestrator events in order."""

    def __init__(self) -> None:
        self.events = []

    def __call__(self, event) -> None:
        self.events.append(event)

    def by_type(self, event_type: str):
        return [e for e in self.events if e.event_type == event_type]

    @property
    def types(self) -> list[str]:
        return [e.event_type for e in self.events]


@pytest.fixture()
def collector() -> EventCollector:
    return EventCollector()
