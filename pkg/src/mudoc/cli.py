"""Operator entry points: ingest, verify, query, serve.

Exit codes form a stable contract: 0 success, 1 input error, 2 provider
failure (checkpoints kept), 3 corrupt index.
"""

from __future__ import annotations

import json
import sys
from collections import Counter
from pathlib import Path

import click

from .config import AppConfig, load_config
from .errors import CorruptIndex, IoError, MalformedPdf, MudocError, ProviderUnavailable, VersionMismatch
from .index.store import load_index, verify_index
from .ingestion.pipeline import ingest_document
from .providers import build_providers

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PROVIDER = 2
EXIT_CORRUPT = 3


def _echo_config(config: AppConfig) -> None:
    click.echo("effective config: " + json.dumps(config.to_dict(), sort_keys=True), err=True)


def _load(config_path: str | None, overrides: dict | None = None) -> AppConfig:
    config = load_config(config_path, overrides)
    _echo_config(config)
    return config


@click.group()
def main() -> None:
    """Multimodal document chat toolkit."""


@main.command()
@click.argument("pdf", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path), help="Index directory to write.")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--doc-id", default=None, help="Stable document id; defaults to the PDF filename stem.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable summary on stdout.")
def ingest(pdf: Path, out_dir: Path, config_path: Path | None, doc_id: str | None, as_json: bool) -> None:
    """Build the retrieval index for PDF."""
    config = _load(config_path, {"providers.chat_mock": "ingest"} if config_path is None else None)
    if config.providers.mode == "mock":
        config.providers.chat_mock = "ingest"
    try:
        pdf_bytes = pdf.read_bytes()
    except OSError as exc:
        click.echo(f"cannot read {pdf}: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    providers = build_providers(config)
    if doc_id is None:
        doc_id = "".join(c if c.isalnum() or c in "-_" else "-" for c in pdf.stem) or None
    try:
        index, report = ingest_document(pdf_bytes, out_dir, config, providers, doc_id=doc_id)
    except MalformedPdf as exc:
        click.echo(f"malformed PDF: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except (ProviderUnavailable, MudocError) as exc:
        click.echo(f"build failed, checkpoint kept: {exc}", err=True)
        sys.exit(EXIT_PROVIDER)

    by_class = Counter(s.region_class for s in index.snippets)
    summary = report.to_json()
    summary["snippets_by_class"] = dict(sorted(by_class.items()))
    summary["out_dir"] = str(out_dir)
    if as_json:
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        click.echo(f"doc_id:     {index.doc_id}")
        click.echo(f"pages:      {index.manifest.counts.get('pages', 0)}")
        click.echo(f"snippets:   {len(index.snippets)} {dict(sorted(by_class.items()))}")
        click.echo(f"chunks:     {len(index.chunks)}")
        click.echo(f"figures:    {len(index.figures)}")
        click.echo(f"warnings:   {len(report.warnings)}")
        for w in report.warnings:
            click.echo(f"  - {w}")
        click.echo(f"stages:     {len(report.stages_executed)} executed ({', '.join(report.stages_executed) or 'none'})")
        click.echo(f"calls:      {sum(report.provider_calls.values())} provider calls {report.provider_calls}")
    sys.exit(EXIT_OK)


def _verify_impl(index_dir: Path, as_json: bool) -> None:
    if not index_dir.is_dir():
        click.echo(f"not a directory: {index_dir}", err=True)
        sys.exit(EXIT_INPUT)
    violations = verify_index(index_dir)
    if as_json:
        click.echo(json.dumps({"ok": not violations, "violations": violations}))
    else:
        if violations:
            click.echo(f"{len(violations)} violation(s):")
            for v in violations:
                click.echo(f"  - {v}")
        else:
            click.echo("index ok")
    sys.exit(EXIT_OK if not violations else EXIT_CORRUPT)


@main.command()
@click.argument("index_dir", type=click.Path(path_type=Path))
@click.option("--json", "as_json", is_flag=True)
def verify(index_dir: Path, as_json: bool) -> None:
    """Validate every invariant of an index directory."""
    _verify_impl(index_dir, as_json)


@main.group(name="index")
def index_group() -> None:
    """Index maintenance commands."""


@index_group.command(name="verify")
@click.argument("index_dir", type=click.Path(path_type=Path))
@click.option("--json", "as_json", is_flag=True)
def index_verify(index_dir: Path, as_json: bool) -> None:
    """Alias of `mudoc verify`."""
    _verify_impl(index_dir, as_json)


@main.command()
@click.argument("query_text")
@click.option("--index", "index_dirs", multiple=True, required=True, type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(["text", "image"]), default="text")
@click.option("--k", default=5, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
def query(query_text: str, index_dirs: tuple[Path, ...], mode: str, k: int, config_path: Path | None) -> None:
    """Debug retrieval: rank chunks or figures for a query."""
    from .retrieval.scoring import retrieve_images, retrieve_text

    config = _load(config_path)
    providers = build_providers(config)
    try:
        indices = [load_index(d, mmap=config.server.load_mmap) for d in index_dirs]
    except (CorruptIndex, VersionMismatch) as exc:
        click.echo(f"corrupt index: {exc}", err=True)
        sys.exit(EXIT_CORRUPT)
    except IoError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_INPUT)
    try:
        if mode == "text":
            chunk_pages = {c.chunk_id: c.first_page for idx in indices for c in idx.chunks}
            for rank, hit in enumerate(retrieve_text(query_text, indices, providers.embedder, k), 1):
                click.echo(f"{rank}\t{hit.chunk_id}\t{hit.score:.6f}\t{hit.best_variant}\t{chunk_pages[hit.chunk_id]}")
        else:
            fig_pages = {
                f.figure_id: idx.snippet(f.snippet_id).page_index for idx in indices for f in idx.figures
            }
            for rank, hit in enumerate(retrieve_images(query_text, indices, providers.embedder, k), 1):
                click.echo(
                    f"{rank}\t{hit.figure_id}\t{hit.score:.6f}\t"
                    f"dpr={hit.dpr_max:.6f},clip={hit.clip_max:.6f}\t{fig_pages[hit.figure_id]}"
                )
    except ProviderUnavailable as exc:
        click.echo(f"provider failure: {exc}", err=True)
        sys.exit(EXIT_PROVIDER)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--index", "index_dirs", multiple=True, required=True, type=click.Path(path_type=Path))
@click.option("--port", default=None, type=int)
@click.option("--host", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--ui", "ui_dir", type=click.Path(path_type=Path), default=None, help="Built web UI to serve at /.")
def serve(index_dirs: tuple[Path, ...], port: int | None, host: str | None, config_path: Path | None, ui_dir: Path | None) -> None:
    """Run the chat server over one or more index directories."""
    import uvicorn

    from .server.app import create_app

    overrides: dict = {}
    if port is not None:
        overrides["server.port"] = port
    if host is not None:
        overrides["server.host"] = host
    config = _load(config_path, overrides)
    try:
        indices = {
            idx.doc_id: idx
            for idx in (load_index(d, mmap=config.server.load_mmap) for d in index_dirs)
        }
    except (CorruptIndex, VersionMismatch) as exc:
        click.echo(f"corrupt index: {exc}", err=True)
        sys.exit(EXIT_CORRUPT)
    except IoError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_INPUT)
    providers = build_providers(config)
    app = create_app(indices, providers, config, ui_dir=ui_dir)
    click.echo(f"serving {sorted(indices)} on {config.server.host}:{config.server.port}", err=True)
    uvicorn.run(app, host=config.server.host, port=config.server.port, log_level="warning")


if __name__ == "__main__":
    main()
