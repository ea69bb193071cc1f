"""Layout detection: regions of interest on a rasterized page.

Detectors return regions in PDF points with a top-down y axis (origin
at the page's top-left), already filtered by confidence and sorted into
reading order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from PIL import Image

from ..errors import DecodeError
from .base import HttpAdapter, ProviderStats, image_to_b64
from .pixelcode import REGION_CLASSES, scan_markers

ROW_MERGE_TOLERANCE_PT = 10.0


@dataclass(frozen=True)
class LayoutRegion:
    page_index: int
    bbox: tuple[float, float, float, float]  # (x0, y0, x1, y1), top-down points
    region_class: str
    confidence: float

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate bbox {self.bbox}")
        if self.region_class not in REGION_CLASSES:
            raise ValueError(f"unknown region class {self.region_class!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")


class LayoutDetector(Protocol):
    def detect(self, page_image: Image.Image, page_index: int) -> list[LayoutRegion]: ...


def reading_order(regions: list[LayoutRegion]) -> list[LayoutRegion]:
    """Top-to-bottom, left-to-right, merging rows within 10 points."""
    ordered = sorted(regions, key=lambda r: (r.bbox[1], r.bbox[0]))
    rows: list[float] = []
    keyed = []
    for r in ordered:
        y = r.bbox[1]
        if not rows or y > rows[-1] + ROW_MERGE_TOLERANCE_PT:
            rows.append(y)
        keyed.append((len(rows) - 1, r.bbox[0], r))
    keyed.sort(key=lambda t: (t[0], t[1]))
    return [t[2] for t in keyed]


class MockLayoutDetector:
    """Decodes pixel-coded markers from synthetic pages."""

    def __init__(self, dpi: int = 200, confidence_threshold: float = 0.5, stats: ProviderStats | None = None):
        self.dpi = dpi
        self.confidence_threshold = confidence_threshold
        self._stats = stats

    def detect(self, page_image: Image.Image, page_index: int) -> list[LayoutRegion]:
        if self._stats is not None:
            self._stats.bump("layout")
        if page_image.width < 1 or page_image.height < 1:
            raise DecodeError("empty page image")
        scale = 72.0 / self.dpi
        regions = []
        for m in scan_markers(page_image):
            if m.confidence < self.confidence_threshold:
                continue
            bbox = (m.x * scale, m.y * scale, (m.x + m.width) * scale, (m.y + m.height) * scale)
            regions.append(LayoutRegion(page_index, bbox, m.region_class, m.confidence))
        return reading_order(regions)


class HttpLayoutDetector(HttpAdapter):
    """POSTs the page raster to a detection service.

    Wire contract: POST /detect {"image_b64", "page_index"} ->
    {"regions": [{"bbox_px": [x0,y0,x1,y1], "class": str, "confidence": float}]}
    with pixel coordinates relative to the posted image.
    """

    def __init__(self, base_url: str, dpi: int = 200, confidence_threshold: float = 0.5, **kw):
        super().__init__(base_url, stats_key="layout", **kw)
        self.dpi = dpi
        self.confidence_threshold = confidence_threshold

    def detect(self, page_image: Image.Image, page_index: int) -> list[LayoutRegion]:
        body = self.post_json("/detect", {"image_b64": image_to_b64(page_image), "page_index": page_index})
        scale = 72.0 / self.dpi
        regions = []
        for item in body.get("regions", []):
            if item.get("confidence", 0.0) < self.confidence_threshold:
                continue
            x0, y0, x1, y1 = item["bbox_px"]
            regions.append(
                LayoutRegion(
                    page_index,
                    (x0 * scale, y0 * scale, x1 * scale, y1 * scale),
                    item["class"],
                    float(item["confidence"]),
                )
            )
        return reading_order(regions)
