"""PDF -> index build pipeline.

Stage flow: pages -> snippets -> chunks -> enrich -> embed -> finalize.
Each stage checkpoints its output under a sibling work directory
(<out>.work), so a crashed or provider-failed build resumes where it
stopped, and a finished index makes a rerun a no-op with zero provider
calls. The finished index directory is produced by an atomic swap.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from ..config import AppConfig
from ..errors import IoError, MalformedPdf
from ..index.matrix import EmbeddingMatrix, read_matrix, write_matrix
from ..index.records import DocumentSnippet, FigureRecord, Manifest, TextChunk
from ..index.store import DocumentIndex, family_of, load_index, save_index
from ..pdfio import open_pdf
from ..prompts import load_template
from ..providers import ProviderSet
from .chunking import build_chunks
from .enrich import clean_and_summarize, describe_figure, page_context

STAGES = ("pages", "snippets", "chunks", "enrich", "embed")


@dataclass
class PageRaster:
    """One rasterized page; raw_text is filled after snippet OCR."""

    page_index: int
    image: Image.Image
    raw_text: str = ""
    width_pt: float = 0.0
    height_pt: float = 0.0


@dataclass
class IngestReport:
    doc_id: str = ""
    stages_executed: list[str] = field(default_factory=list)
    provider_calls: dict[str, int] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "stages_executed": self.stages_executed,
            "provider_calls": self.provider_calls,
            "counts": self.counts,
            "warnings": self.warnings,
        }


def paginate(pdf_bytes: bytes, dpi: int = 200) -> list[PageRaster]:
    """Rasterize every page; page count and raster geometry follow the PDF."""
    doc = open_pdf(pdf_bytes)
    rasters = []
    for page in doc.pages:
        rasters.append(
            PageRaster(
                page_index=page.index,
                image=page.raster(dpi),
                width_pt=page.width_pt,
                height_pt=page.height_pt,
            )
        )
    return rasters


def extract_snippets(
    doc_id: str,
    pages: list[PageRaster],
    providers: ProviderSet,
    dpi: int = 200,
) -> tuple[list[DocumentSnippet], dict[str, bytes], list[str]]:
    """Detect, crop, and OCR regions in reading order across pages.

    Returns (snippets, crop bytes keyed by index-relative path,
    warnings). A page whose layout detection fails is skipped with a
    warning; OCR failures abort the build.
    """
    scale = dpi / 72.0
    snippets: list[DocumentSnippet] = []
    crops: dict[str, bytes] = {}
    warnings: list[str] = []
    figure_seq = 0

    def detect(page: PageRaster):
        return providers.layout.detect(page.image, page.page_index)

    with ThreadPoolExecutor(max_workers=4) as pool:
        detections = list(pool.map(lambda p: _guard(detect, p), pages))

    for page, result in zip(pages, detections):
        if isinstance(result, Exception):
            warnings.append(f"page {page.page_index} skipped: layout detection failed: {result}")
            continue
        rank = 0
        for region in result:
            x0, y0, x1, y1 = region.bbox
            px = (round(x0 * scale), round(y0 * scale), round(x1 * scale), round(y1 * scale))
            if px[2] <= px[0] or px[3] <= px[1]:
                continue
            crop = page.image.crop(px)
            snippet_id = f"{doc_id}-p{page.page_index}-r{rank}"
            if region.region_class == "figure":
                image_ref = f"figures/{doc_id}-f{figure_seq}.png"
                figure_seq += 1
                raw_text = ""
            else:
                image_ref = f"snips/{snippet_id}.png"
                raw_text = providers.ocr.recognize(crop)
            buf = io.BytesIO()
            crop.save(buf, format="PNG")
            crops[image_ref] = buf.getvalue()
            snippets.append(
                DocumentSnippet(
                    snippet_id=snippet_id,
                    doc_id=doc_id,
                    page_index=page.page_index,
                    bbox=region.bbox,
                    region_class=region.region_class,
                    image_ref=image_ref,
                    raw_text=raw_text,
                )
            )
            rank += 1
    return snippets, crops, warnings


def _guard(fn, arg):
    try:
        return fn(arg)
    except Exception as exc:  # per-page isolation; classified by caller
        return exc


def page_texts_from_snippets(snippets: list[DocumentSnippet], n_pages: int) -> list[str]:
    texts: list[list[str]] = [[] for _ in range(n_pages)]
    for snip in snippets:
        if snip.region_class != "figure" and snip.raw_text:
            texts[snip.page_index].append(snip.raw_text)
    return ["\n".join(parts) for parts in texts]


class _Workspace:
    """Checkpointed staging area next to the output directory."""

    def __init__(self, out_dir: Path, content_hash: str, config_hash: str, doc_id: str):
        self.root = out_dir.parent / (out_dir.name + ".work")
        self.meta = {"content_hash": content_hash, "config_hash": config_hash, "doc_id": doc_id, "completed": []}
        self._lock_path = self.root / ".lock"

    def open(self) -> None:
        state_path = self.root / "build.json"
        if state_path.is_file():
            try:
                state = json.loads(state_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                state = {}
            if (
                state.get("content_hash") == self.meta["content_hash"]
                and state.get("config_hash") == self.meta["config_hash"]
                and state.get("doc_id") == self.meta["doc_id"]
            ):
                self.meta = state
            else:
                shutil.rmtree(self.root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._acquire_lock()
        self._save_state()

    def _acquire_lock(self) -> None:
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid_text = self._lock_path.read_text(encoding="ascii").strip()
            if pid_text.isdigit() and _pid_alive(int(pid_text)):
                raise IoError(f"index build already in progress (pid {pid_text})") from None
            self._lock_path.unlink()
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))

    def release(self) -> None:
        if self._lock_path.exists():
            self._lock_path.unlink()

    def discard(self) -> None:
        if self.root.exists():
            shutil.rmtree(self.root)

    def done(self, stage: str) -> bool:
        return stage in self.meta["completed"]

    def mark(self, stage: str) -> None:
        if stage not in self.meta["completed"]:
            self.meta["completed"].append(stage)
        self._save_state()

    def _save_state(self) -> None:
        (self.root / "build.json").write_text(json.dumps(self.meta, indent=1), encoding="utf-8")

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def write_json(self, rel: str, obj) -> None:
        self.path(rel).write_text(json.dumps(obj, sort_keys=True), encoding="utf-8")

    def read_json(self, rel: str):
        return json.loads((self.root / rel).read_text(encoding="utf-8"))


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except OSError:
        return False
    return True


def ingest_document(
    pdf_bytes: bytes,
    out_dir: str | Path,
    config: AppConfig,
    providers: ProviderSet,
    doc_id: str | None = None,
) -> tuple[DocumentIndex, IngestReport]:
    """Build (or reuse) the persistent index for one PDF.

    Idempotent per (pdf content hash, config hash): a finished index is
    returned untouched with zero provider calls; an interrupted build
    resumes from its last completed stage.
    """
    if not pdf_bytes:
        raise MalformedPdf("empty input")
    out = Path(out_dir)
    content_hash = hashlib.sha256(pdf_bytes).hexdigest()
    config_hash = config.config_hash()
    doc_id = doc_id or f"doc-{content_hash[:12]}"
    report = IngestReport(doc_id=doc_id)

    if (out / "manifest.json").is_file():
        existing = load_index(out)
        if (
            existing.manifest.content_hash == content_hash
            and existing.manifest.config_hash == config_hash
            and existing.manifest.doc_id == doc_id
        ):
            report.counts = dict(existing.manifest.counts)
            report.warnings = list(existing.manifest.warnings)
            report.provider_calls = providers.stats.snapshot()
            return existing, report

    ws = _Workspace(out, content_hash, config_hash, doc_id)
    ws.open()
    try:
        index = _run_stages(pdf_bytes, out, config, providers, doc_id, ws, report)
    except Exception:
        # Keep the workspace: completed stages are resumable checkpoints.
        ws.release()
        raise
    ws.release()
    ws.discard()
    report.provider_calls = providers.stats.snapshot()
    report.counts = dict(index.manifest.counts)
    report.warnings = list(index.manifest.warnings)
    return index, report


def _run_stages(
    pdf_bytes: bytes,
    out: Path,
    config: AppConfig,
    providers: ProviderSet,
    doc_id: str,
    ws: _Workspace,
    report: IngestReport,
) -> DocumentIndex:
    ing = config.ingestion
    warnings: list[str] = list(ws.meta.get("warnings", []))

    # Stage: pages
    if not ws.done("pages"):
        rasters = paginate(pdf_bytes, ing.dpi)
        meta = []
        for pr in rasters:
            pr.image.save(ws.path(f"assets/pages/{pr.page_index}.png"), format="PNG")
            meta.append({"index": pr.page_index, "width_pt": pr.width_pt, "height_pt": pr.height_pt})
        ws.write_json("pages.json", meta)
        ws.mark("pages")
        report.stages_executed.append("pages")
    pages_meta = ws.read_json("pages.json")

    def load_pages() -> list[PageRaster]:
        out_pages = []
        for m in pages_meta:
            img = Image.open(ws.path(f"assets/pages/{m['index']}.png")).convert("RGB")
            out_pages.append(PageRaster(m["index"], img, "", m["width_pt"], m["height_pt"]))
        return out_pages

    # Stage: snippets (layout + OCR + crops)
    if not ws.done("snippets"):
        pages = load_pages()
        snippets, crops, stage_warnings = extract_snippets(doc_id, pages, providers, ing.dpi)
        warnings.extend(stage_warnings)
        for rel, data in crops.items():
            ws.path(f"assets/{rel}").write_bytes(data)
        ws.write_json("snippets.json", [s.to_json() for s in snippets])
        ws.write_json(
            "page_texts.json", page_texts_from_snippets(snippets, len(pages_meta))
        )
        ws.meta["warnings"] = warnings
        ws.mark("snippets")
        report.stages_executed.append("snippets")
    snippets = [DocumentSnippet.from_json(d) for d in ws.read_json("snippets.json")]
    page_texts = ws.read_json("page_texts.json")

    # Stage: chunks (pure, but checkpointed so later stages never recompute)
    if not ws.done("chunks"):
        chunks = build_chunks(snippets, doc_id, ing.chunk_size, ing.chunk_overlap, ing.separator)
        ws.write_json("chunks_raw.json", [c.to_json() for c in chunks])
        ws.mark("chunks")
        report.stages_executed.append("chunks")
    raw_chunks = [TextChunk.from_json(d) for d in ws.read_json("chunks_raw.json")]

    # Stage: enrich (cleaning, summaries, captions)
    if not ws.done("enrich"):
        enriched: list[TextChunk] = []
        for chunk in raw_chunks:
            ctx = page_context(page_texts, chunk.first_page)
            cleaned, summary, w = clean_and_summarize(
                providers.chat, chunk.raw_text, ctx, ing.summary_threshold
            )
            warnings.extend(f"{chunk.chunk_id}: {msg}" for msg in w)
            enriched.append(
                TextChunk(
                    chunk_id=chunk.chunk_id,
                    doc_id=chunk.doc_id,
                    snippet_ids=chunk.snippet_ids,
                    raw_text=chunk.raw_text,
                    cleaned_text=cleaned,
                    summary_text=summary,
                    first_page=chunk.first_page,
                )
            )
        figures: list[FigureRecord] = []
        for snip in snippets:
            if snip.region_class != "figure":
                continue
            figure_id = snip.image_ref.rsplit("/", 1)[1]
            crop_png = ws.path(f"assets/{snip.image_ref}").read_bytes()
            ctx = page_context(page_texts, snip.page_index)
            caption, description, w = describe_figure(
                providers.chat, snip, crop_png, ctx, ing.caption_max_chars
            )
            warnings.extend(w)
            figures.append(
                FigureRecord(
                    figure_id=figure_id,
                    doc_id=doc_id,
                    snippet_id=snip.snippet_id,
                    caption=caption,
                    description=description,
                )
            )
        ws.write_json("chunks.json", [c.to_json() for c in enriched])
        ws.write_json("figures.json", [f.to_json() for f in figures])
        ws.meta["warnings"] = warnings
        ws.mark("enrich")
        report.stages_executed.append("enrich")
    chunks = [TextChunk.from_json(d) for d in ws.read_json("chunks.json")]
    figures = [FigureRecord.from_json(d) for d in ws.read_json("figures.json")]

    # Stage: embed
    if not ws.done("embed"):
        matrices = _embed_all(chunks, snippets, figures, ws, providers, config)
        for key, mat in sorted(matrices.items()):
            write_matrix(ws.path(f"emb/{key}.f32"), mat)
        ws.mark("embed")
        report.stages_executed.append("embed")

    # Finalize: assemble, save atomically, clear workspace.
    matrices = {}
    for path in sorted((ws.root / "emb").glob("*.f32")):
        key = path.name[: -len(".f32")]
        matrices[key] = read_matrix(path, family=family_of(key))

    embedder = providers.embedder
    manifest = Manifest(
        doc_id=doc_id,
        content_hash=hashlib.sha256(pdf_bytes).hexdigest(),
        config_hash=config.config_hash(),
        warnings=warnings,
        embedding_dims={
            "ctx_text": embedder.dim("ctx_text"),
            "query_text": embedder.dim("query_text"),
            "joint_text": embedder.dim("joint_text"),
            "joint_image": embedder.dim("joint_image"),
        },
        page_sizes_pt=[[m["width_pt"], m["height_pt"]] for m in pages_meta],
        dpi=ing.dpi,
        prompt_hashes={
            name: load_template(f"{name}_v1.txt")[1] for name in ("clean", "summarize", "caption")
        },
    )
    assets: dict[str, bytes] = {"document.pdf": pdf_bytes}
    assets_root = ws.root / "assets"
    for path in sorted(assets_root.rglob("*")):
        if path.is_file():
            assets[str(path.relative_to(assets_root))] = path.read_bytes()
    index = DocumentIndex(
        manifest=manifest,
        snippets=snippets,
        chunks=chunks,
        figures=figures,
        matrices=matrices,
        pending_assets=assets,
    )
    save_index(index, out)
    index.pending_assets = {}
    report.stages_executed.append("finalize")
    return index


def _embed_all(
    chunks: list[TextChunk],
    snippets: list[DocumentSnippet],
    figures: list[FigureRecord],
    ws: _Workspace,
    providers: ProviderSet,
    config: AppConfig,
) -> dict[str, EmbeddingMatrix]:
    """Embed every stored representation; fan out, join deterministically."""
    embedder = providers.embedder
    jobs: list[tuple[str, str, object, str]] = []  # (matrix key, record id, payload, family)
    for chunk in chunks:
        jobs.append(("chunk.raw.ctx_text", chunk.chunk_id, chunk.raw_text, "ctx_text"))
        jobs.append(("chunk.cleaned.ctx_text", chunk.chunk_id, chunk.cleaned_text, "ctx_text"))
        if chunk.summary_text is not None:
            jobs.append(("chunk.summary.ctx_text", chunk.chunk_id, chunk.summary_text, "ctx_text"))
    for snip in snippets:
        if snip.region_class != "figure" and snip.raw_text:
            jobs.append(("snippet.raw.ctx_text", snip.snippet_id, snip.raw_text, "ctx_text"))
    snippet_by_id = {s.snippet_id: s for s in snippets}
    for fig in figures:
        crop = Image.open(ws.path(f"assets/{snippet_by_id[fig.snippet_id].image_ref}")).convert("RGB")
        jobs.append(("figure.image.joint_image", fig.figure_id, crop, "joint_image"))
        jobs.append(("figure.caption.joint_text", fig.figure_id, fig.caption, "joint_text"))
        jobs.append(("figure.caption.ctx_text", fig.figure_id, fig.caption, "ctx_text"))
        if fig.description:
            jobs.append(("figure.description.joint_text", fig.figure_id, fig.description, "joint_text"))
            jobs.append(("figure.description.ctx_text", fig.figure_id, fig.description, "ctx_text"))

    def run(job):
        key, rid, payload, family = job
        return embedder.embed(payload, family)

    with ThreadPoolExecutor(max_workers=config.providers.max_inflight) as pool:
        vectors = list(pool.map(run, jobs))

    matrices: dict[str, EmbeddingMatrix] = {}
    for (key, rid, _payload, family), vec in zip(jobs, vectors):
        mat = matrices.get(key)
        if mat is None:
            mat = matrices[key] = EmbeddingMatrix(family=family, dim=int(vec.shape[0]))
        mat.add(rid, vec)
    return matrices
