"""Application configuration.

One self-describing config object with a section per subsystem. All
tunable constants live here with their defaults; a JSON file can
override any subset, environment variables can override provider
endpoints, and CLI flags override both.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class ProviderConfig:
    """How to reach the four external model services."""

    mode: str = "mock"  # "mock" or "http"
    layout_url: str = ""
    ocr_url: str = ""
    chat_url: str = ""
    embed_url: str = ""
    api_key: str = ""
    timeout_s: float = 60.0
    max_inflight: int = 4
    retry_backoff_s: tuple[float, ...] = (0.5, 1.0, 2.0)
    # Mock embedding dims: a DPR-like text space and a CLIP-like joint space.
    ctx_dim: int = 768
    joint_dim: int = 512
    chat_mock: str = "demo"  # mock chat behavior: "demo" or "ingest"

    def apply_env(self) -> None:
        self.layout_url = os.environ.get("MUDOC_LAYOUT_URL", self.layout_url)
        self.ocr_url = os.environ.get("MUDOC_OCR_URL", self.ocr_url)
        self.chat_url = os.environ.get("MUDOC_CHAT_URL", self.chat_url)
        self.embed_url = os.environ.get("MUDOC_EMBED_URL", self.embed_url)
        self.api_key = os.environ.get("MUDOC_API_KEY", self.api_key)
        if "MUDOC_TIMEOUT_S" in os.environ:
            self.timeout_s = float(os.environ["MUDOC_TIMEOUT_S"])


@dataclass
class IngestionConfig:
    dpi: int = 200
    chunk_size: int = 2000
    chunk_overlap: int = 500
    summary_threshold: int = 1000
    confidence_threshold: float = 0.5
    separator: str = "\n\n"
    caption_max_chars: int = 300


@dataclass
class RetrievalConfig:
    top_k: int = 5


@dataclass
class OrchestratorConfig:
    context_budget_chars: int = 65_536
    max_tool_calls: int = 6
    map_threshold: float = 0.60
    min_paragraph_chars: int = 100
    min_snippet_chars: int = 100


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8007
    cors_origin: str = "*"
    session_log_path: str = ""  # empty disables the append-only log
    load_mmap: bool = False  # memory-map embedding matrices on load


@dataclass
class AppConfig:
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    ingestion: IngestionConfig = field(default_factory=IngestionConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    orchestrator: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    server: ServerConfig = field(default_factory=ServerConfig)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["providers"]["retry_backoff_s"] = list(self.providers.retry_backoff_s)
        return d

    def config_hash(self) -> str:
        """Stable hash of everything that affects index content.

        Server/orchestrator settings do not participate: rebuilding an
        index must not be triggered by, say, a port change.
        """
        payload = {
            "ingestion": dataclasses.asdict(self.ingestion),
            "embed": {
                "mode": self.providers.mode,
                "ctx_dim": self.providers.ctx_dim,
                "joint_dim": self.providers.joint_dim,
            },
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _merge_section(obj: Any, data: dict[str, Any]) -> None:
    for key, value in data.items():
        if not hasattr(obj, key):
            raise KeyError(f"unknown config key: {key}")
        if key == "retry_backoff_s":
            value = tuple(float(v) for v in value)
        setattr(obj, key, value)


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> AppConfig:
    """Build the effective config: defaults <- file <- env <- overrides.

    ``overrides`` maps dotted keys ("ingestion.dpi") to values, as
    produced by CLI flags.
    """
    cfg = AppConfig()
    if path:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        for section, data in raw.items():
            if not hasattr(cfg, section):
                raise KeyError(f"unknown config section: {section}")
            _merge_section(getattr(cfg, section), data)
    cfg.providers.apply_env()
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        _merge_section(getattr(cfg, section), {key: value})
    return cfg
