"""Text recognition over snippet crops."""

from __future__ import annotations

from typing import Protocol

from PIL import Image

from ..errors import DecodeError
from .base import HttpAdapter, ProviderStats, image_to_b64
from .pixelcode import decode_region


class OcrEngine(Protocol):
    def recognize(self, snippet_image: Image.Image) -> str: ...


class MockOcrEngine:
    """Reads the pixel-coded payload; blank imagery yields ""."""

    def __init__(self, stats: ProviderStats | None = None):
        self._stats = stats

    def recognize(self, snippet_image: Image.Image) -> str:
        if self._stats is not None:
            self._stats.bump("ocr")
        if snippet_image.width < 1 or snippet_image.height < 1:
            raise DecodeError("empty snippet image")
        marker = decode_region(snippet_image)
        return marker.payload if marker else ""


class HttpOcrEngine(HttpAdapter):
    """POST /ocr {"image_b64"} -> {"text": str}."""

    def __init__(self, base_url: str, **kw):
        super().__init__(base_url, stats_key="ocr", **kw)

    def recognize(self, snippet_image: Image.Image) -> str:
        body = self.post_json("/ocr", {"image_b64": image_to_b64(snippet_image)})
        return str(body.get("text", ""))
