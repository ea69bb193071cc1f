"""Marker codec round trips and page scanning."""

from __future__ import annotations

import pytest
from PIL import Image

from mudoc.providers import pixelcode


def test_encode_decode_round_trip():
    img = pixelcode.encode_region(120, 60, "text", "alpha beta gamma", confidence=0.75)
    marker = pixelcode.decode_region(img)
    assert marker is not None
    assert marker.payload == "alpha beta gamma"
    assert marker.region_class == "text"
    assert marker.width == 120 and marker.height == 60
    assert marker.confidence == pytest.approx(0.75, abs=1 / 255)


def test_unicode_payload_survives():
    text = "naïve Bézier curves — ∑ of ∞ pieces"
    img = pixelcode.encode_region(200, 40, "table", text)
    assert pixelcode.decode_region(img).payload == text


def test_scan_finds_all_markers_on_composite_page():
    page = Image.new("RGB", (800, 600), (255, 255, 255))
    page.paste(pixelcode.encode_region(200, 50, "title", "T"), (40, 20))
    page.paste(pixelcode.encode_region(300, 100, "text", "body"), (40, 100))
    page.paste(pixelcode.encode_region(150, 120, "figure", "fig seed"), (400, 300))
    markers = pixelcode.scan_markers(page)
    assert len(markers) == 3
    classes = {m.region_class for m in markers}
    assert classes == {"title", "text", "figure"}


def test_blank_image_has_no_markers():
    assert pixelcode.scan_markers(Image.new("RGB", (200, 200), (255, 255, 255))) == []


def test_payload_too_large_rejected():
    with pytest.raises(ValueError):
        pixelcode.encode_region(10, 2, "text", "x" * 1000)


def test_unknown_class_rejected():
    with pytest.raises(ValueError):
        pixelcode.encode_region(100, 40, "header", "x")


def test_long_payload_wraps_rows():
    text = "word " * 400  # 2000 chars, needs many rows
    img = pixelcode.encode_region(64, 40, "text", text)
    assert pixelcode.decode_region(img).payload == text
