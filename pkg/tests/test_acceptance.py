"""Acceptance suite: the eight primary criteria, one test each.

Every test prints a single PASS line (visible with `pytest -s` or in a
captured log) carrying its runtime; tolerances and budgets are pinned
here and nowhere else. All criteria run with mocked providers and no
web UI.
"""

from __future__ import annotations

import json
import math
import random
import time

import numpy as np
import pytest
from click.testing import CliRunner
from starlette.testclient import TestClient

from mudoc import fixtures
from mudoc.cli import main as cli_main
from mudoc.index.store import load_index, save_index
from mudoc.ingestion.chunking import chunk_spans, needs_summary
from mudoc.orchestrator.context import build_context
from mudoc.orchestrator.rendering import map_paragraphs, render_response
from mudoc.providers.chat import ChatMessage, ChatOutcome, ScriptedChatProvider
from mudoc.retrieval.scoring import rank_chunks, rank_figures
from mudoc.server.app import create_app
from mudoc.server.sse import parse_sse_stream

from .conftest import make_config, mock_providers
from .test_chunking import snippets_from_lengths
from .test_index import random_index

SCORE_TOL = 1e-9
SELF_SIM_TOL = 1e-6
BUDGET_CHARS = 65_536


def report(criterion: int, description: str, t0: float) -> None:
    print(f"ACCEPTANCE {criterion} PASS - {description} ({time.perf_counter() - t0:.2f}s)")


# -- 1. chunking --------------------------------------------------------------


def test_criterion_1_chunking_suite():
    t0 = time.perf_counter()
    rng = random.Random(20240501)
    for doc_no in range(50):
        lengths = [rng.randint(10, 6000) for _ in range(rng.randint(1, 40))]
        snippets = snippets_from_lengths(lengths)
        spans = chunk_spans(snippets)
        doc = "\n\n".join(s.raw_text for s in snippets if s.raw_text)
        covered = bytearray(len(doc))
        for span in spans:
            assert len(span.raw_text) <= 2000
            assert span.raw_text == doc[span.start : span.end]
            covered[span.start : span.end] = b"\x01" * (span.end - span.start)
        assert all(covered), f"doc {doc_no}: coverage gap"
        for prev, curr in zip(spans, spans[1:]):
            shared = prev.end - curr.start
            tail = len(doc) - curr.start
            assert shared >= 500 or tail < 500, f"doc {doc_no}: overlap {shared}"
            assert prev.raw_text[-shared:] == curr.raw_text[:shared]
    assert not needs_summary("x" * 1000) and needs_summary("x" * 1001)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"chunking suite took {elapsed:.2f}s"
    report(1, "50 documents: size/overlap/coverage plus 1000/1001 boundary", t0)


# -- 2. text retrieval exactness ----------------------------------------------


def _oracle_text(variant_rows: dict[str, list[tuple[str, np.ndarray]]], q: np.ndarray, k: int):
    best: dict[str, float] = {}
    qf = q.astype(np.float64)
    qn = math.sqrt(float(np.dot(qf, qf)))
    for rows in variant_rows.values():
        for cid, vec in rows:
            v = vec.astype(np.float64)
            s = float(np.dot(v, qf)) / (math.sqrt(float(np.dot(v, v))) * qn)
            if cid not in best or s > best[cid]:
                best[cid] = s
    return sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def test_criterion_2_text_retrieval_exactness():
    from .test_retrieval import index_with_chunks

    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    pyrng = random.Random(77)
    for instance in range(100):
        dim = int(rng.integers(64, 769))
        n = int(rng.integers(1, 2001))
        pool = [None] * max(1, n // 10)
        vectors: dict[str, dict[str, np.ndarray]] = {"raw": {}, "cleaned": {}, "summary": {}}

        def unit() -> np.ndarray:
            v = rng.standard_normal(dim)
            return (v / np.linalg.norm(v)).astype(np.float32)

        pool = [unit() for _ in range(max(1, n // 10))]
        for i in range(n):
            cid = f"d-c{i:05d}"
            vectors["raw"][cid] = pyrng.choice(pool) if pyrng.random() < 0.2 else unit()
            if pyrng.random() < 0.8:
                vectors["cleaned"][cid] = vectors["raw"][cid] if pyrng.random() < 0.5 else unit()
            if pyrng.random() < 0.3:
                vectors["summary"][cid] = unit()
        index = index_with_chunks(vectors)
        q = unit()
        hits = rank_chunks(q, [index], k=5)
        expected = _oracle_text(
            {v: list(by.items()) for v, by in vectors.items()}, q, 5
        )
        assert [h.chunk_id for h in hits] == [cid for cid, _ in expected], f"instance {instance}"
        for hit, (_, score) in zip(hits, expected):
            assert abs(hit.score - score) <= SCORE_TOL
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"retrieval exactness took {elapsed:.2f}s"
    report(2, "100 randomized instances equal brute force, ties included", t0)


# -- 3. image scoring -----------------------------------------------------------


def test_criterion_3_image_scoring():
    from .test_retrieval import _oracle_rank_figures, figure_index

    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    pyrng = random.Random(99)
    n = 1000
    dims = (96, 48)
    vectors: dict[str, dict[str, np.ndarray]] = {
        "figure.caption.ctx_text": {},
        "figure.description.ctx_text": {},
        "figure.image.joint_image": {},
        "figure.caption.joint_text": {},
        "figure.description.joint_text": {},
    }

    def unit(d: int) -> np.ndarray:
        v = rng.standard_normal(d)
        return (v / np.linalg.norm(v)).astype(np.float32)

    for i in range(n):
        fid = f"d-f{i:04d}.png"
        vectors["figure.caption.ctx_text"][fid] = unit(dims[0])
        vectors["figure.image.joint_image"][fid] = unit(dims[1])
        if pyrng.random() < 0.5:
            vectors["figure.description.ctx_text"][fid] = unit(dims[0])
            vectors["figure.description.joint_text"][fid] = unit(dims[1])
        if pyrng.random() < 0.7:
            vectors["figure.caption.joint_text"][fid] = unit(dims[1])
    index = figure_index(vectors, n)
    q_ctx = unit(dims[0]).astype(np.float64)
    q_joint = unit(dims[1]).astype(np.float64)
    hits = rank_figures(q_ctx, q_joint, [index], k=n)
    expected = _oracle_rank_figures(vectors, q_ctx, q_joint, n, n)
    assert [h.figure_id for h in hits] == [fid for fid, _ in expected]
    for hit, (_, score) in zip(hits, expected):
        assert abs(hit.score - score) <= SCORE_TOL
        assert abs(hit.score - (hit.dpr_max + hit.clip_max) / 2.0) <= SCORE_TOL
    report(3, "1000 figures: mean-of-maxima and ranking equal the oracle", t0)


# -- 4. context budget -----------------------------------------------------------


def test_criterion_4_context_budget():
    t0 = time.perf_counter()
    system = ChatMessage(role="system", content="sys")
    rng = random.Random(4242)
    for _ in range(120):
        history: list[ChatMessage] = []
        while len(history) < rng.randint(1, 500):
            n = rng.randint(50, 5000)
            if rng.random() < 0.25:
                history.append(
                    ChatMessage(role="assistant", tool_name="search_text", tool_query="q", content="c" * (n // 10))
                )
                history.append(ChatMessage(role="tool_result", content="r" * n, tool_name="search_text"))
                if rng.random() < 0.5:
                    history.append(ChatMessage(role="image_attachment", content="i" * (n // 2)))
            else:
                history.append(ChatMessage(role=rng.choice(["user", "assistant"]), content="m" * n))
        context, flags = build_context(history, system)
        body = context[1:]
        assert context[0] is system
        if body:
            assert history[len(history) - len(body) :] == body, "not a contiguous suffix"
        total = sum(m.char_len for m in body)
        if "oversize_message" in flags:
            assert len(body) == 1
        else:
            assert total <= BUDGET_CHARS
        for i, m in enumerate(body):
            if m.role in ("tool_result", "image_attachment"):
                assert any(b.role == "assistant" and b.tool_name for b in body[:i]), "orphaned group member"
    # Boundary: a history summing to exactly 65,536 is fully included.
    exact = [ChatMessage(role="user", content="x" * 65_000), ChatMessage(role="assistant", content="y" * 536)]
    context, flags = build_context(exact, system)
    assert len(context) - 1 == 2 and not flags
    assert sum(m.char_len for m in context[1:]) == BUDGET_CHARS
    report(4, "randomized histories: suffix, budget, group integrity, exact boundary", t0)


# -- 5. render + mapping ----------------------------------------------------------


def test_criterion_5_render_and_mapping(sample_index):
    t0 = time.perf_counter()
    providers = mock_providers()
    fids = [f.figure_id for f in sample_index.figures]
    paras = [
        "First paragraph introducing the retrieved material in enough words to matter for mapping purposes.",
        "Second paragraph, also long enough to be considered for source mapping by the pipeline.",
        "Third one.",
        "Fourth and final paragraph wrapping up the response with a conclusion sentence.",
    ]
    final_text = (
        f"{paras[0]}\n\n<img src=\"{fids[0]}\">\n\n{paras[1]}\n\n<img src=\"{fids[1]}\">\n\n"
        f"{paras[2]}\n\n<img src=\"unknown-figure.png\">\n\n{paras[3]}"
    )
    blocks = render_response(final_text, [sample_index])
    kinds = [b.kind for b in blocks]
    assert kinds == ["paragraph", "figure", "paragraph", "figure", "paragraph", "paragraph", "paragraph"]
    assert blocks[1].figure_id == fids[0] and blocks[3].figure_id == fids[1]
    unknown = blocks[5]
    assert unknown.flagged and unknown.text == '<img src="unknown-figure.png">'
    assert [b.text for b in blocks if b.kind == "paragraph" and not b.flagged] == paras

    mapped = map_paragraphs(blocks, [sample_index], providers.embedder, threshold=0.0)
    short = next(b for b in mapped if b.text == "Third one.")
    assert short.anchor is None and short.map_score is None  # < 100 chars, never mapped

    snippet = next(s for s in sample_index.snippets if len(s.raw_text) >= 100)
    echo = render_response(snippet.raw_text, [sample_index])
    echo = map_paragraphs(echo, [sample_index], providers.embedder)
    assert echo[0].map_score == pytest.approx(1.0, abs=SELF_SIM_TOL)
    assert echo[0].anchor is not None and echo[0].anchor.bbox == snippet.bbox

    previous: set[int] | None = None
    for threshold in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        trial = map_paragraphs(
            render_response(final_text, [sample_index]),
            [sample_index],
            providers.embedder,
            threshold=threshold,
        )
        now = {i for i, b in enumerate(trial) if b.kind == "paragraph" and b.anchor is not None}
        if previous is not None:
            assert now <= previous, f"mapped set grew when threshold rose to {threshold}"
        previous = now
    report(5, "block sequence exact, degradation graceful, mapping rules hold", t0)


# -- 6. end-to-end scripted turn ---------------------------------------------------


def test_criterion_6_end_to_end_scripted_turn(sample_index):
    t0 = time.perf_counter()
    fid = sample_index.figures[0].figure_id
    final = f"Grounded answer paragraph.\n\n<img src=\"{fid}\">\n\nClosing paragraph."
    script = [
        ChatOutcome.call("search_text", "concept learning"),
        ChatOutcome.call("search_images", "concept diagram"),
        ChatOutcome.final(final),
    ]
    config = make_config()
    providers = mock_providers(config, chat=ScriptedChatProvider(script))
    app = create_app({sample_index.doc_id: sample_index}, providers, config)
    client = TestClient(app)
    sid = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    response = client.post(f"/api/sessions/{sid}/messages", json={"text": "teach me"})
    assert response.status_code == 200
    records = parse_sse_stream(response.text)

    statuses = [d["text"] for t, d in records if t == "status"]
    assert statuses == [
        "Gathering information",
        "Retrieving text for concept learning",
        "Retrieving images for concept diagram",
        "Generating a response",
    ]
    seqs = [d["seq"] for _, d in records]
    assert all(b > a for a, b in zip(seqs, seqs[1:])), "seq not strictly increasing"
    types = [t for t, _ in records]
    assert types[-1] == "done" and types.count("done") == 1
    tokens = "".join(d["text"] for t, d in records if t == "token")
    assert tokens == final, "token concatenation must equal the final text"
    blocks = [d["block"] for t, d in records if t == "block"]
    figure_blocks = [b for b in blocks if b["kind"] == "figure"]
    assert len(figure_blocks) == 1
    assert figure_blocks[0]["figure_id"] == fid
    assert figure_blocks[0]["caption"] == sample_index.figures[0].caption
    anchors = next(d["anchors"] for t, d in records if t == "anchors")
    assert anchors, "at least the figure block must be anchored"
    for entry in anchors:
        if entry["record_id"]:
            via_get = client.get(f"/api/anchors/{entry['record_id']}")
            assert via_get.status_code == 200
            assert via_get.json() == entry["anchor"]
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"scripted turn took {elapsed:.2f}s"
    report(6, "SSE sequence, statuses, token fidelity, figure block, GET anchors", t0)


# -- 7. index round trip ------------------------------------------------------------


def test_criterion_7_index_round_trip_and_corruption(tmp_path):
    t0 = time.perf_counter()
    for seed in range(20):
        index = random_index(seed, n_chunks=3 + seed % 5, n_figures=seed % 3)
        out = tmp_path / f"idx{seed}"
        save_index(index, out)
        loaded = load_index(out)
        assert loaded.content_equal(index), f"round trip failed for seed {seed}"

    runner = CliRunner()
    index = random_index(999)
    out = tmp_path / "target"
    save_index(index, out)
    files = sorted(p for p in out.rglob("*") if p.is_file())
    assert len(files) > 10
    for victim in files:
        original = victim.read_bytes()
        corrupted = bytearray(original)
        corrupted[0] ^= 0x01
        victim.write_bytes(bytes(corrupted))
        result = runner.invoke(cli_main, ["verify", str(out)])
        assert result.exit_code == 3, f"{victim.name}: corruption not detected"
        victim.write_bytes(original)
    assert runner.invoke(cli_main, ["verify", str(out)]).exit_code == 0
    report(7, "20 round trips equal; single-file corruption always exits 3", t0)


# -- 8. idempotent ingest --------------------------------------------------------------


def test_criterion_8_idempotent_ingest(tmp_path):
    t0 = time.perf_counter()
    doc = fixtures.sample_document(n_pages=3, n_figures=1, seed=5)
    pdf = tmp_path / "doc.pdf"
    pdf.write_bytes(doc.pdf_bytes)
    runner = CliRunner()
    first = runner.invoke(cli_main, ["ingest", str(pdf), "--out", str(tmp_path / "idx"), "--json"])
    assert first.exit_code == 0, first.output
    first_summary = json.loads(first.output.strip().splitlines()[-1])
    assert sum(first_summary["provider_calls"].values()) > 0
    second = runner.invoke(cli_main, ["ingest", str(pdf), "--out", str(tmp_path / "idx"), "--json"])
    assert second.exit_code == 0, second.output
    summary = json.loads(second.output.strip().splitlines()[-1])
    assert sum(summary["provider_calls"].values()) == 0, "second run must make zero provider calls"
    assert summary["stages_executed"] == []
    report(8, "second ingest run executes zero provider calls", t0)
