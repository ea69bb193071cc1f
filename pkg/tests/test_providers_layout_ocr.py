"""Layout detection and OCR contracts against generator ground truth."""

from __future__ import annotations

import pytest
from PIL import Image

from mudoc import fixtures
from mudoc.pdfio import open_pdf
from mudoc.providers.layout import LayoutRegion, MockLayoutDetector, reading_order
from mudoc.providers.ocr import MockOcrEngine

CLASS_SET = {"title", "text", "figure", "list", "table"}


def _raster(pages, dpi=200):
    doc = fixtures.build_pdf(pages, dpi)
    return [p.raster(dpi) for p in open_pdf(doc.pdf_bytes).pages]


def test_blank_page_yields_no_regions():
    (img,) = _raster([fixtures.PageSpec()])
    assert MockLayoutDetector().detect(img, 0) == []


def test_text_and_figure_regions_within_ten_points():
    text_spec = fixtures.region("text", (72, 100, 400, 220), "alpha beta", dpi=200)
    fig_spec = fixtures.region("figure", (72, 300, 300, 420), "a chart", dpi=200)
    (img,) = _raster([fixtures.PageSpec(regions=[text_spec, fig_spec])])
    regions = MockLayoutDetector(dpi=200).detect(img, 0)
    assert [r.region_class for r in regions] == ["text", "figure"]
    for got, want in zip(regions, [text_spec, fig_spec]):
        for a, b in zip(got.bbox, want.bbox):
            assert abs(a - b) <= 10.0


def test_every_class_in_the_five_class_set(sample_doc):
    pdf = open_pdf(sample_doc.pdf_bytes)
    det = MockLayoutDetector(dpi=sample_doc.dpi)
    for page in pdf.pages:
        for region in det.detect(page.raster(sample_doc.dpi), page.index):
            assert region.region_class in CLASS_SET


def test_low_confidence_regions_dropped():
    keep = fixtures.region("text", (72, 100, 300, 160), "keep", dpi=200, confidence=0.9)
    drop = fixtures.region("text", (72, 200, 300, 260), "drop", dpi=200, confidence=0.3)
    (img,) = _raster([fixtures.PageSpec(regions=[keep, drop])])
    regions = MockLayoutDetector(dpi=200, confidence_threshold=0.5).detect(img, 0)
    assert len(regions) == 1
    assert regions[0].confidence > 0.5


def test_reading_order_merges_rows_within_tolerance():
    def r(x0, y0):
        return LayoutRegion(0, (x0, y0, x0 + 50, y0 + 30), "text", 1.0)

    right_first = r(300, 100)
    left_slightly_lower = r(50, 105)  # same visual row (within 10 pt)
    below = r(50, 200)
    ordered = reading_order([below, right_first, left_slightly_lower])
    assert ordered == [left_slightly_lower, right_first, below]


def test_region_validation():
    with pytest.raises(ValueError):
        LayoutRegion(0, (10, 10, 5, 20), "text", 1.0)
    with pytest.raises(ValueError):
        LayoutRegion(0, (0, 0, 10, 10), "banner", 1.0)
    with pytest.raises(ValueError):
        LayoutRegion(0, (0, 0, 10, 10), "text", 1.5)


def test_ocr_blank_image_gives_empty_string():
    assert MockOcrEngine().recognize(Image.new("RGB", (100, 50), (255, 255, 255))) == ""


def test_ocr_render_read_round_trip():
    img = fixtures.text_image("Hello World", dpi=300)
    assert MockOcrEngine().recognize(img) == "Hello World"


def test_ocr_two_paragraphs_order_preserved():
    text = "First paragraph of prose.\n\nSecond paragraph, following the first."
    out = MockOcrEngine().recognize(fixtures.text_image(text))
    assert out == text
    assert out.index("First") < out.index("Second")


def test_detectors_deterministic(sample_doc):
    pdf = open_pdf(sample_doc.pdf_bytes)
    det = MockLayoutDetector(dpi=sample_doc.dpi)
    img = pdf.pages[0].raster(sample_doc.dpi)
    assert det.detect(img, 0) == det.detect(img, 0)
