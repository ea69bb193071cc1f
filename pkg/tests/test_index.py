"""Index persistence: round trips, hashing, corruption, anchors."""

from __future__ import annotations

import json
import random
import struct
import time

import numpy as np
import pytest

from mudoc.errors import CorruptIndex, DimMismatch, UnknownId, VersionMismatch
from mudoc.index.matrix import EmbeddingMatrix, read_matrix, write_matrix
from mudoc.index.records import DocumentSnippet, FigureRecord, Manifest, TextChunk
from mudoc.index.store import DocumentIndex, load_index, save_index, verify_index


def random_index(seed: int, n_chunks: int = 6, n_figures: int = 2, dim: int = 32) -> DocumentIndex:
    rng = random.Random(seed)
    nprng = np.random.default_rng(seed)
    doc = f"doc{seed}"
    snippets = []
    chunks = []
    figures = []
    for i in range(n_chunks):
        snippets.append(
            DocumentSnippet(
                snippet_id=f"{doc}-p0-r{i}",
                doc_id=doc,
                page_index=rng.randint(0, 3),
                bbox=(10.0 * i, 20.0, 10.0 * i + 9.0, 40.0),
                region_class="text",
                image_ref=f"snips/{doc}-p0-r{i}.png",
                raw_text="x" * rng.randint(200, 1400),
            )
        )
    for i in range(n_figures):
        snippets.append(
            DocumentSnippet(
                snippet_id=f"{doc}-p1-r{i}",
                doc_id=doc,
                page_index=1,
                bbox=(5.0, 50.0 * i + 5.0, 95.0, 50.0 * i + 45.0),
                region_class="figure",
                image_ref=f"figures/{doc}-f{i}.png",
                raw_text="",
            )
        )
        figures.append(
            FigureRecord(
                figure_id=f"{doc}-f{i}.png",
                doc_id=doc,
                snippet_id=f"{doc}-p1-r{i}",
                caption=f"caption {i}",
                description=f"longer description {i}",
            )
        )
    prev_tail = ""
    for i in range(n_chunks):
        body = prev_tail + "".join(rng.choice("abcdef ") for _ in range(900))
        chunks.append(
            TextChunk(
                chunk_id=f"{doc}-c{i}",
                doc_id=doc,
                snippet_ids=(f"{doc}-p0-r{i}",),
                raw_text=body[:1400],
                cleaned_text=body[:1400].strip(),
                summary_text="s" * 30 if len(body[:1400]) > 1000 else None,
                first_page=snippets[i].page_index,
            )
        )
        prev_tail = body[:1400][-500:]

    def unit(n):
        v = nprng.standard_normal(n)
        return (v / np.linalg.norm(v)).astype(np.float32)

    matrices = {}
    for key, ids in (
        ("chunk.raw.ctx_text", [c.chunk_id for c in chunks]),
        ("chunk.cleaned.ctx_text", [c.chunk_id for c in chunks]),
        ("chunk.summary.ctx_text", [c.chunk_id for c in chunks if c.summary_text]),
        ("snippet.raw.ctx_text", [s.snippet_id for s in snippets if s.region_class != "figure"]),
        ("figure.caption.ctx_text", [f.figure_id for f in figures]),
        ("figure.description.ctx_text", [f.figure_id for f in figures]),
        ("figure.image.joint_image", [f.figure_id for f in figures]),
        ("figure.caption.joint_text", [f.figure_id for f in figures]),
        ("figure.description.joint_text", [f.figure_id for f in figures]),
    ):
        fam = key.rsplit(".", 1)[1]
        d = dim if fam in ("ctx_text", "query_text") else dim // 2
        mat = EmbeddingMatrix(family=fam, dim=d)
        for rid in ids:
            mat.add(rid, unit(d))
        matrices[key] = mat

    assets = {"document.pdf": b"%PDF-1.3 fake body %%EOF"}
    for snip in snippets:
        assets[snip.image_ref] = b"\x89PNG-fake-" + snip.snippet_id.encode()
    for p in range(4):
        assets[f"pages/{p}.png"] = b"\x89PNG-page-" + str(p).encode()

    manifest = Manifest(
        doc_id=doc,
        content_hash="c" * 64,
        config_hash="k" * 64,
        embedding_dims={"ctx_text": dim, "query_text": dim, "joint_text": dim // 2, "joint_image": dim // 2},
        page_sizes_pt=[[612.0, 792.0]] * 4,
        dpi=200,
    )
    return DocumentIndex(
        manifest=manifest,
        snippets=snippets,
        chunks=chunks,
        figures=figures,
        matrices=matrices,
        pending_assets=assets,
    )


def test_save_load_round_trip(tmp_path):
    index = random_index(1)
    save_index(index, tmp_path / "idx")
    loaded = load_index(tmp_path / "idx")
    assert loaded.content_equal(index)
    assert loaded.manifest.counts["chunks"] == len(index.chunks)


def test_index_hash_changes_iff_content_changes(tmp_path):
    a = random_index(7)
    b = random_index(7)
    hash_a = save_index(a, tmp_path / "a")
    hash_b = save_index(b, tmp_path / "b")
    assert hash_a == hash_b  # identical build inputs, identical hash

    c = random_index(7)
    vec = c.matrices["chunk.raw.ctx_text"].vectors.copy()
    vec[0, 0] += 1e-3  # flip one value in one vector
    mat = EmbeddingMatrix(family="ctx_text", dim=vec.shape[1], ids=list(c.matrices["chunk.raw.ctx_text"].ids))
    mat._dense = vec
    c.matrices["chunk.raw.ctx_text"] = mat
    hash_c = save_index(c, tmp_path / "c")
    assert hash_c != hash_a


def test_mixed_dims_rejected(tmp_path):
    index = random_index(3, dim=32)
    bad = EmbeddingMatrix(family="ctx_text", dim=64)
    bad.add("doc3-c0", np.ones(64, dtype=np.float32))
    index.matrices["chunk.raw.ctx_text"] = bad
    with pytest.raises(DimMismatch):
        save_index(index, tmp_path / "idx")


def test_matrix_add_rejects_wrong_dim():
    mat = EmbeddingMatrix(family="ctx_text", dim=512)
    with pytest.raises(DimMismatch):
        mat.add("id", np.ones(64, dtype=np.float32))


def test_truncated_matrix_file_is_corrupt(tmp_path):
    index = random_index(4)
    save_index(index, tmp_path / "idx")
    target = tmp_path / "idx" / "emb" / "chunk.raw.ctx_text.f32"
    target.write_bytes(target.read_bytes()[:-40])
    with pytest.raises(CorruptIndex):
        load_index(tmp_path / "idx")


def test_zero_figure_index_valid(tmp_path):
    index = random_index(5, n_figures=0)
    save_index(index, tmp_path / "idx")
    loaded = load_index(tmp_path / "idx")
    assert loaded.figures == []
    assert len(loaded.matrix("figure.image.joint_image")) == 0
    assert verify_index(tmp_path / "idx") == []


def test_version_gate(tmp_path):
    mat = EmbeddingMatrix(family="ctx_text", dim=4)
    mat.add("a", np.ones(4, dtype=np.float32))
    path = tmp_path / "m.f32"
    write_matrix(path, mat)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(VersionMismatch):
        read_matrix(path, family="ctx_text")


def test_manifest_version_gate(tmp_path):
    index = random_index(6)
    save_index(index, tmp_path / "idx")
    mpath = tmp_path / "idx" / "manifest.json"
    data = json.loads(mpath.read_text())
    data["format_version"] = 99
    raw = json.dumps(data, sort_keys=True, indent=1).encode()
    mpath.write_bytes(raw)
    import hashlib

    (tmp_path / "idx" / "manifest.sha256").write_text(hashlib.sha256(raw).hexdigest() + "\n")
    with pytest.raises(VersionMismatch):
        load_index(tmp_path / "idx")


def test_anchor_resolution(tmp_path):
    index = random_index(8)
    fig = index.figures[0]
    anchor = index.anchor_for(fig.figure_id)
    snip = index.snippet(fig.snippet_id)
    assert anchor.kind == "figure"
    assert anchor.page_index == snip.page_index
    assert anchor.bbox == snip.bbox

    chunk = index.chunks[0]
    anchor = index.anchor_for(chunk.chunk_id)
    first = index.snippet(chunk.snippet_ids[0])
    assert anchor.kind == "text_snippet"
    assert anchor.page_index == first.page_index

    snippet_anchor = index.anchor_for(index.snippets[0].snippet_id)
    assert snippet_anchor.bbox == index.snippets[0].bbox

    with pytest.raises(UnknownId):
        index.anchor_for("nope")


def test_chunk_spanning_pages_anchors_to_first(sample_index):
    spanning = [c for c in sample_index.chunks if len({
        sample_index.snippet(s).page_index for s in c.snippet_ids
    }) > 1]
    assert spanning, "fixture should contain at least one page-spanning chunk"
    chunk = spanning[0]
    anchor = sample_index.anchor_for(chunk.chunk_id)
    assert anchor.page_index == sample_index.snippet(chunk.snippet_ids[0]).page_index


def test_immutability_of_loaded_index(tmp_path):
    index = random_index(9)
    save_index(index, tmp_path / "idx")
    before = {p.name: p.stat().st_mtime_ns for p in (tmp_path / "idx").rglob("*") if p.is_file()}
    loaded = load_index(tmp_path / "idx")
    loaded.anchor_for(loaded.chunks[0].chunk_id)
    loaded.asset_bytes("document.pdf")
    after = {p.name: p.stat().st_mtime_ns for p in (tmp_path / "idx").rglob("*") if p.is_file()}
    assert before == after


def test_large_index_loads_fast(tmp_path):
    """10k chunk vectors at 768 dims load well under the 2 s budget."""
    dim = 768
    n = 10_000
    mat = EmbeddingMatrix(family="ctx_text", dim=dim)
    vecs = np.random.default_rng(0).standard_normal((n, dim)).astype(np.float32)
    mat.ids = [f"d-c{i}" for i in range(n)]
    mat._dense = vecs
    path = tmp_path / "big.f32"
    write_matrix(path, mat)
    t0 = time.perf_counter()
    loaded = read_matrix(path, family="ctx_text")
    elapsed = time.perf_counter() - t0
    assert len(loaded) == n and loaded.vectors.shape == (n, dim)
    assert elapsed < 2.0
    t0 = time.perf_counter()
    mapped = read_matrix(path, family="ctx_text", mmap=True)
    assert mapped.vectors.shape == (n, dim)
    assert time.perf_counter() - t0 < 2.0
