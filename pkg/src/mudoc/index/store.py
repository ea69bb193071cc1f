"""The persistent document index: directory format, save/load, verify.

Directory layout (all paths relative to the index root):

    manifest.json        build metadata, counts, dims, file hashes
    manifest.sha256      hex digest of manifest.json's exact bytes
    snippets.jsonl       one DocumentSnippet per line
    chunks.jsonl         one TextChunk per line
    figures.jsonl        one FigureRecord per line
    document.pdf         the ingested source document
    pages/<n>.png        page rasters (kept for UI fallback rendering)
    snips/<id>.png       per-snippet crops
    figures/<figure_id>  figure crops (figure ids end in .png)
    emb/<kind>.<variant>.<family>.f32   embedding matrices

The index is immutable after build: save performs an atomic directory
swap, load never writes, and every file is covered by a content hash
recorded in the manifest (the manifest itself by the sidecar digest).
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import CorruptIndex, DimMismatch, IoError, UnknownId, VersionMismatch
from .matrix import EmbeddingMatrix, read_matrix, write_matrix
from .records import FORMAT_VERSION, DocumentSnippet, FigureRecord, Manifest, SourceAnchor, TextChunk

MATRIX_KEYS = (
    "chunk.raw.ctx_text",
    "chunk.cleaned.ctx_text",
    "chunk.summary.ctx_text",
    "snippet.raw.ctx_text",
    "figure.image.joint_image",
    "figure.caption.joint_text",
    "figure.description.joint_text",
    "figure.caption.ctx_text",
    "figure.description.ctx_text",
)


def family_of(key: str) -> str:
    return key.rsplit(".", 1)[1]


@dataclass
class DocumentIndex:
    """In-memory view of one ingested document."""

    manifest: Manifest
    snippets: list[DocumentSnippet] = field(default_factory=list)
    chunks: list[TextChunk] = field(default_factory=list)
    figures: list[FigureRecord] = field(default_factory=list)
    matrices: dict[str, EmbeddingMatrix] = field(default_factory=dict)
    root: Path | None = None
    pending_assets: dict[str, bytes] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._snippets_by_id = {s.snippet_id: s for s in self.snippets}
        self._chunks_by_id = {c.chunk_id: c for c in self.chunks}
        self._figures_by_id = {f.figure_id: f for f in self.figures}

    @property
    def doc_id(self) -> str:
        return self.manifest.doc_id

    def reindex(self) -> None:
        self.__post_init__()

    def snippet(self, snippet_id: str) -> DocumentSnippet:
        try:
            return self._snippets_by_id[snippet_id]
        except KeyError:
            raise UnknownId(snippet_id) from None

    def figure(self, figure_id: str) -> FigureRecord:
        try:
            return self._figures_by_id[figure_id]
        except KeyError:
            raise UnknownId(figure_id) from None

    def has_record(self, record_id: str) -> bool:
        return (
            record_id in self._snippets_by_id
            or record_id in self._chunks_by_id
            or record_id in self._figures_by_id
        )

    def matrix(self, key: str) -> EmbeddingMatrix | None:
        return self.matrices.get(key)

    def anchor_for(self, record_id: str) -> SourceAnchor:
        """Resolve any record id to its page and bounding box."""
        if record_id in self._figures_by_id:
            snip = self.snippet(self._figures_by_id[record_id].snippet_id)
            return SourceAnchor(self.doc_id, snip.page_index, snip.bbox, "figure")
        if record_id in self._chunks_by_id:
            chunk = self._chunks_by_id[record_id]
            snip = self.snippet(chunk.snippet_ids[0])
            return SourceAnchor(self.doc_id, snip.page_index, snip.bbox, "text_snippet")
        if record_id in self._snippets_by_id:
            snip = self._snippets_by_id[record_id]
            kind = "figure" if snip.region_class == "figure" else "text_snippet"
            return SourceAnchor(self.doc_id, snip.page_index, snip.bbox, kind)
        raise UnknownId(record_id)

    def asset_bytes(self, rel_path: str) -> bytes:
        """Binary asset by index-relative path, from memory or disk."""
        if rel_path in self.pending_assets:
            return self.pending_assets[rel_path]
        if self.root is None:
            raise IoError(f"no backing directory for asset {rel_path}")
        target = (self.root / rel_path).resolve()
        if not str(target).startswith(str(self.root.resolve())):
            raise UnknownId(rel_path)
        try:
            return target.read_bytes()
        except FileNotFoundError:
            raise UnknownId(rel_path) from None

    def content_equal(self, other: "DocumentIndex") -> bool:
        """Structural equality, ignoring timestamps and disk location."""
        if (
            self.snippets != other.snippets
            or self.chunks != other.chunks
            or self.figures != other.figures
        ):
            return False
        if set(self.matrices) != set(other.matrices):
            return False
        for key, mat in self.matrices.items():
            if not mat.equals(other.matrices[key]):
                return False
        a, b = self.manifest, other.manifest
        return (
            a.doc_id == b.doc_id
            and a.content_hash == b.content_hash
            and a.config_hash == b.config_hash
            and a.file_hashes == b.file_hashes
            and a.index_hash == b.index_hash
        )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _jsonl(records) -> bytes:
    lines = [json.dumps(r.to_json(), sort_keys=True, separators=(",", ":")) for r in records]
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def save_index(index: DocumentIndex, out_dir: str | Path) -> str:
    """Write the index atomically; returns the overall index hash."""
    out = Path(out_dir)
    for key, mat in index.matrices.items():
        fam = family_of(key)
        want = index.manifest.embedding_dims.get(fam)
        if want is not None and mat.dim != want:
            raise DimMismatch(f"matrix {key} has dim {mat.dim}, family {fam} is {want}")
        index.manifest.embedding_dims.setdefault(fam, mat.dim)

    tmp = out.parent / f".{out.name}.tmp-{os.getpid()}"
    try:
        if tmp.exists():
            shutil.rmtree(tmp)
        (tmp / "emb").mkdir(parents=True)
        files: dict[str, bytes] = {
            "snippets.jsonl": _jsonl(index.snippets),
            "chunks.jsonl": _jsonl(index.chunks),
            "figures.jsonl": _jsonl(index.figures),
        }
        for rel, data in index.pending_assets.items():
            files[rel] = data
        for rel, data in files.items():
            path = tmp / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        hashes = {rel: _sha256(data) for rel, data in files.items()}
        for key, mat in sorted(index.matrices.items()):
            rel = f"emb/{key}.f32"
            write_matrix(tmp / rel, mat)
            hashes[rel] = _sha256((tmp / rel).read_bytes())

        index.manifest.format_version = FORMAT_VERSION
        index.manifest.counts = {
            "snippets": len(index.snippets),
            "chunks": len(index.chunks),
            "figures": len(index.figures),
            "pages": len(index.manifest.page_sizes_pt),
        }
        index.manifest.file_hashes = dict(sorted(hashes.items()))
        index.manifest.index_hash = _sha256(
            "".join(f"{k}:{v}\n" for k, v in sorted(hashes.items())).encode("ascii")
        )
        index.manifest.created_at = datetime.now(timezone.utc).isoformat()
        manifest_bytes = json.dumps(index.manifest.to_json(), sort_keys=True, indent=1).encode("utf-8")
        (tmp / "manifest.json").write_bytes(manifest_bytes)
        (tmp / "manifest.sha256").write_text(_sha256(manifest_bytes) + "\n", encoding="ascii")

        if out.exists():
            old = out.parent / f".{out.name}.old-{os.getpid()}"
            if old.exists():
                shutil.rmtree(old)
            os.replace(out, old)
            os.replace(tmp, out)
            shutil.rmtree(old)
        else:
            os.replace(tmp, out)
    except OSError as exc:
        raise IoError(f"cannot write index at {out}: {exc}") from exc
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
    index.root = out
    return index.manifest.index_hash


def _read_manifest(root: Path) -> Manifest:
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise CorruptIndex(f"{root}: manifest.json missing")
    raw = mpath.read_bytes()
    sidecar = root / "manifest.sha256"
    if not sidecar.is_file():
        raise CorruptIndex(f"{root}: manifest.sha256 missing")
    if sidecar.read_text(encoding="ascii").strip() != _sha256(raw):
        raise CorruptIndex(f"{root}: manifest digest mismatch")
    try:
        manifest = Manifest.from_json(json.loads(raw))
    except (json.JSONDecodeError, TypeError, KeyError) as exc:
        raise CorruptIndex(f"{root}: unreadable manifest: {exc}") from exc
    if manifest.format_version > FORMAT_VERSION:
        raise VersionMismatch(
            f"index format {manifest.format_version} is newer than supported {FORMAT_VERSION}"
        )
    return manifest


def _load_jsonl(path: Path, parse) -> list:
    out = []
    if not path.is_file():
        raise CorruptIndex(f"{path.name} missing")
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(parse(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptIndex(f"{path.name}:{line_no}: bad record: {exc}") from exc
    return out


def load_index(index_dir: str | Path, mmap: bool = False, verify_hashes: bool = True) -> DocumentIndex:
    """Load and validate an index directory."""
    root = Path(index_dir)
    if not root.is_dir():
        raise IoError(f"index directory not found: {root}")
    manifest = _read_manifest(root)
    if verify_hashes:
        for rel, want in manifest.file_hashes.items():
            path = root / rel
            if not path.is_file():
                raise CorruptIndex(f"{rel} missing")
            if _sha256(path.read_bytes()) != want:
                raise CorruptIndex(f"{rel}: content hash mismatch")
    snippets = _load_jsonl(root / "snippets.jsonl", DocumentSnippet.from_json)
    chunks = _load_jsonl(root / "chunks.jsonl", TextChunk.from_json)
    figures = _load_jsonl(root / "figures.jsonl", FigureRecord.from_json)
    matrices: dict[str, EmbeddingMatrix] = {}
    for rel in manifest.file_hashes:
        if not rel.startswith("emb/") or not rel.endswith(".f32"):
            continue
        key = rel[len("emb/") : -len(".f32")]
        fam = family_of(key)
        mat = read_matrix(root / rel, family=fam, mmap=mmap)
        want = manifest.embedding_dims.get(fam)
        if want is not None and mat.dim != want and len(mat) > 0:
            raise CorruptIndex(f"{rel}: dim {mat.dim} != family dim {want}")
        matrices[key] = mat
    return DocumentIndex(
        manifest=manifest,
        snippets=snippets,
        chunks=chunks,
        figures=figures,
        matrices=matrices,
        root=root,
    )


def verify_index(index_dir: str | Path, chunk_size: int = 2000, chunk_overlap: int = 500, summary_threshold: int = 1000) -> list[str]:
    """Run every index invariant; returns violation strings (empty = ok)."""
    root = Path(index_dir)
    violations: list[str] = []
    try:
        manifest = _read_manifest(root)
    except (CorruptIndex, VersionMismatch) as exc:
        return [str(exc)]

    for rel, want in manifest.file_hashes.items():
        path = root / rel
        if not path.is_file():
            violations.append(f"missing file: {rel}")
        elif _sha256(path.read_bytes()) != want:
            violations.append(f"hash mismatch: {rel}")
    recorded = _sha256("".join(f"{k}:{v}\n" for k, v in sorted(manifest.file_hashes.items())).encode("ascii"))
    if recorded != manifest.index_hash:
        violations.append("index hash does not match file hash table")
    on_disk = {
        str(p.relative_to(root))
        for p in root.rglob("*")
        if p.is_file() and p.name not in ("manifest.json", "manifest.sha256")
    }
    for extra in sorted(on_disk - set(manifest.file_hashes)):
        violations.append(f"unexpected file: {extra}")
    if violations:
        return violations

    try:
        index = load_index(root, verify_hashes=False)
    except (CorruptIndex, VersionMismatch) as exc:
        return [str(exc)]

    snippet_ids = {s.snippet_id for s in index.snippets}
    figure_snippets = [s for s in index.snippets if s.region_class == "figure"]
    for snip in index.snippets:
        if snip.region_class == "figure" and snip.raw_text != "":
            violations.append(f"figure snippet {snip.snippet_id} carries OCR text")
        if snip.image_ref not in manifest.file_hashes:
            violations.append(f"snippet {snip.snippet_id}: crop {snip.image_ref} not stored")
    if len(snippet_ids) != len(index.snippets):
        violations.append("duplicate snippet ids")

    flagged = " ".join(manifest.warnings)
    for chunk in index.chunks:
        if len(chunk.raw_text) > chunk_size:
            violations.append(f"chunk size: {chunk.chunk_id} has {len(chunk.raw_text)} chars")
        has_summary = chunk.summary_text is not None
        if has_summary != (len(chunk.raw_text) > summary_threshold) and chunk.chunk_id not in flagged:
            violations.append(f"summary predicate violated for {chunk.chunk_id}")
        for sid in chunk.snippet_ids:
            if sid not in snippet_ids:
                violations.append(f"chunk {chunk.chunk_id} references unknown snippet {sid}")
    for prev, curr in zip(index.chunks, index.chunks[1:]):
        shared = _common_overlap(prev.raw_text, curr.raw_text)
        if shared < chunk_overlap and len(curr.raw_text) >= chunk_overlap:
            violations.append(f"chunk overlap: {prev.chunk_id} -> {curr.chunk_id} shares {shared} chars")

    if len(index.figures) != len(figure_snippets):
        violations.append(
            f"figure records ({len(index.figures)}) != figure snippets ({len(figure_snippets)})"
        )
    for fig in index.figures:
        if fig.snippet_id not in snippet_ids:
            violations.append(f"figure {fig.figure_id} references unknown snippet {fig.snippet_id}")

    known = snippet_ids | {c.chunk_id for c in index.chunks} | {f.figure_id for f in index.figures}
    for key, mat in index.matrices.items():
        for rid in mat.ids:
            if rid not in known:
                violations.append(f"matrix {key} row {rid} resolves to no record")
        fam_dim = manifest.embedding_dims.get(family_of(key))
        if fam_dim is not None and len(mat) > 0 and mat.dim != fam_dim:
            violations.append(f"matrix {key} dim {mat.dim} != family dim {fam_dim}")
    return violations


def _common_overlap(a: str, b: str) -> int:
    """Longest suffix of a that is a prefix of b."""
    limit = min(len(a), len(b))
    for k in range(limit, 0, -1):
        if a[-k:] == b[:k]:
            return k
    return 0
