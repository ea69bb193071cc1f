"""HTTP surface: sessions, SSE streams, assets, anchors, concurrency."""

from __future__ import annotations

import threading
import time

import pytest
from starlette.testclient import TestClient

from mudoc.providers.chat import ChatOutcome, ScriptedChatProvider
from mudoc.server.app import create_app
from mudoc.server.sse import parse_sse_stream

from .conftest import make_config, mock_providers


def make_client(sample_index, script=None, config=None):
    config = config or make_config()
    chat = ScriptedChatProvider(script) if script is not None else None
    providers = mock_providers(config, chat=chat)
    app = create_app({sample_index.doc_id: sample_index}, providers, config)
    return TestClient(app), providers


def test_health(sample_index):
    client, _ = make_client(sample_index)
    r = client.get("/api/health")
    assert r.status_code == 200
    assert r.json()["docs"] == [sample_index.doc_id]


def test_session_create_valid_doc(sample_index):
    client, _ = make_client(sample_index)
    r = client.post("/api/sessions", json={"doc_id": sample_index.doc_id})
    assert r.status_code == 201
    assert r.json()["session_id"].startswith("s-")


def test_session_create_unknown_doc_404(sample_index):
    client, _ = make_client(sample_index)
    assert client.post("/api/sessions", json={"doc_id": "ghost"}).status_code == 404


def test_session_ids_distinct(sample_index):
    client, _ = make_client(sample_index)
    a = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    b = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    assert a != b


def test_message_to_unknown_session_404(sample_index):
    client, _ = make_client(sample_index)
    assert client.post("/api/sessions/nope/messages", json={"text": "hi"}).status_code == 404


def test_empty_message_400(sample_index):
    client, _ = make_client(sample_index)
    sid = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    assert client.post(f"/api/sessions/{sid}/messages", json={"text": "   "}).status_code == 400


def stream_turn(client, sid, text):
    r = client.post(f"/api/sessions/{sid}/messages", json={"text": text})
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/event-stream")
    return parse_sse_stream(r.text)


def test_full_sse_sequence(sample_index):
    fid = sample_index.figures[0].figure_id
    script = [
        ChatOutcome.call("search_text", "alpha"),
        ChatOutcome.call("search_images", "beta"),
        ChatOutcome.final(f'Here it is.\n\n<img src="{fid}">\n\nThe end.'),
    ]
    client, _ = make_client(sample_index, script=script)
    sid = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    records = stream_turn(client, sid, "find me a figure")
    types = [t for t, _ in records]
    assert types[0] == "status"
    assert types[-1] == "done"
    assert types.count("done") == 1 and "error" not in types
    statuses = [d["text"] for t, d in records if t == "status"]
    assert statuses == [
        "Gathering information",
        "Retrieving text for alpha",
        "Retrieving images for beta",
        "Generating a response",
    ]
    seqs = [d["seq"] for _, d in records]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
    tokens = "".join(d["text"] for t, d in records if t == "token")
    assert tokens == f'Here it is.\n\n<img src="{fid}">\n\nThe end.'
    blocks = [d["block"] for t, d in records if t == "block"]
    assert [b["kind"] for b in blocks] == ["paragraph", "figure", "paragraph"]
    fig_block = blocks[1]
    assert fig_block["figure_id"] == fid
    assert fig_block["caption"] == sample_index.figures[0].caption
    assert fig_block["anchor"]["kind"] == "figure"


def test_second_post_during_turn_409(sample_index):
    class SlowChat:
        def complete(self, messages, tools_enabled=True, on_token=None):
            time.sleep(0.4)
            return ChatOutcome.final("slow answer")

    config = make_config()
    providers = mock_providers(config, chat=SlowChat())
    app = create_app({sample_index.doc_id: sample_index}, providers, config)
    client = TestClient(app)
    sid = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]

    codes = {}

    def long_turn():
        codes["first"] = client.post(f"/api/sessions/{sid}/messages", json={"text": "go"}).status_code

    t = threading.Thread(target=long_turn)
    t.start()
    time.sleep(0.1)
    codes["second"] = client.post(f"/api/sessions/{sid}/messages", json={"text": "again"}).status_code
    t.join()
    assert codes["first"] == 200
    assert codes["second"] == 409


def test_disconnect_mid_turn_completes_server_side(sample_index):
    class SlowChat:
        def complete(self, messages, tools_enabled=True, on_token=None):
            time.sleep(0.3)
            if on_token:
                on_token("late answer")
            return ChatOutcome.final("late answer")

    config = make_config()
    providers = mock_providers(config, chat=SlowChat())
    app = create_app({sample_index.doc_id: sample_index}, providers, config)
    client = TestClient(app)
    sid = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    session = app.state.sessions.get(sid)
    with client.stream("POST", f"/api/sessions/{sid}/messages", json={"text": "go"}) as r:
        assert r.status_code == 200
        # Abandon the stream immediately; the turn must still finish.
    deadline = time.time() + 5
    while time.time() < deadline and session.turn_counter == 0:
        time.sleep(0.05)
    assert session.turn_counter == 1
    assert [m.role for m in session.history] == ["user", "assistant"]


def test_pdf_and_figure_bytes_identical_to_store(sample_index):
    client, _ = make_client(sample_index)
    r = client.get(f"/api/docs/{sample_index.doc_id}/pdf")
    assert r.status_code == 200
    assert r.content == sample_index.asset_bytes("document.pdf")
    fid = sample_index.figures[0].figure_id
    snippet = sample_index.snippet(sample_index.figures[0].snippet_id)
    r = client.get(f"/api/figures/{fid}")
    assert r.status_code == 200
    assert r.content == sample_index.asset_bytes(snippet.image_ref)


def test_asset_routes_stateless_and_etagged(sample_index):
    client, _ = make_client(sample_index)
    fid = sample_index.figures[0].figure_id
    r1 = client.get(f"/api/figures/{fid}")
    r2 = client.get(f"/api/figures/{fid}")
    assert r1.content == r2.content and r1.headers["etag"] == r2.headers["etag"]
    r304 = client.get(f"/api/figures/{fid}", headers={"If-None-Match": r1.headers["etag"]})
    assert r304.status_code == 304


def test_page_raster_served(sample_index):
    client, _ = make_client(sample_index)
    r = client.get(f"/api/docs/{sample_index.doc_id}/pages/0")
    assert r.status_code == 200
    assert r.content[:4] == b"\x89PNG"
    assert client.get(f"/api/docs/{sample_index.doc_id}/pages/99").status_code == 404


def test_anchor_endpoint_matches_index(sample_index):
    client, _ = make_client(sample_index)
    fid = sample_index.figures[0].figure_id
    want = sample_index.anchor_for(fid).to_json()
    r = client.get(f"/api/anchors/{fid}")
    assert r.status_code == 200
    assert r.json() == want
    chunk_id = sample_index.chunks[0].chunk_id
    assert client.get(f"/api/anchors/{chunk_id}").json() == sample_index.anchor_for(chunk_id).to_json()


def test_unknown_ids_404(sample_index):
    client, _ = make_client(sample_index)
    assert client.get("/api/figures/ghost.png").status_code == 404
    assert client.get("/api/anchors/ghost").status_code == 404
    assert client.get("/api/docs/ghost/pdf").status_code == 404


def test_config_endpoint_serves_ui_templates(sample_index):
    client, _ = make_client(sample_index)
    body = client.get("/api/config").json()
    assert body["prompt_templates"]["summarize"] == 'Summarize the following passage: "{selection}"'
    assert body["prompt_templates"]["eli10"] == (
        'Explain the following passage like I\'m 10 years old: "{selection}"'
    )
    assert body["highlight_seconds"] == 3.0


def test_error_event_on_provider_failure(sample_index):
    from mudoc.errors import ProviderUnavailable

    class Exploder:
        def complete(self, messages, tools_enabled=True, on_token=None):
            raise ProviderUnavailable("dead backend")

    config = make_config()
    providers = mock_providers(config, chat=Exploder())
    app = create_app({sample_index.doc_id: sample_index}, providers, config)
    client = TestClient(app)
    sid = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    records = stream_turn(client, sid, "boom")
    types = [t for t, _ in records]
    assert types[-1] == "error"
    assert types.count("error") == 1 and "done" not in types
    session = app.state.sessions.get(sid)
    assert session.history == []


def test_turn_events_append_to_session_log(sample_index, tmp_path):
    config = make_config()
    config.server.session_log_path = str(tmp_path / "sessions.log")
    client, _ = make_client(sample_index, script=[ChatOutcome.final("logged")], config=config)
    sid = client.post("/api/sessions", json={"doc_id": sample_index.doc_id}).json()["session_id"]
    stream_turn(client, sid, "hello")
    lines = (tmp_path / "sessions.log").read_text().strip().splitlines()
    assert any('"session_created"' in line for line in lines)
    assert any('"turn_event"' in line for line in lines)
