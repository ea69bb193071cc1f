"""Synthetic PDF and image fixtures.

Builds reproducible PDFs whose layout regions carry pixel-coded markers
(see providers.pixelcode), so the mock provider stack can run the full
pipeline without any external model. Used by the test suite and by
``python -m mudoc.fixtures`` to produce a demo document.

Region geometry is snapped to the pixel lattice of the generation dpi,
which keeps markers bit-exact through the embed -> rasterize round trip.
"""

from __future__ import annotations

import io
import random
import sys
from dataclasses import dataclass, field

from PIL import Image

from .providers import pixelcode


@dataclass
class RegionSpec:
    """Ground truth for one synthetic layout region (top-down PDF points)."""

    region_class: str
    bbox: tuple[float, float, float, float]
    text: str
    confidence: float = 1.0


@dataclass
class PageSpec:
    width_pt: float = 612.0
    height_pt: float = 792.0
    regions: list[RegionSpec] = field(default_factory=list)


@dataclass
class FixtureDoc:
    pdf_bytes: bytes
    pages: list[PageSpec]
    dpi: int


def snap(value_pt: float, dpi: int) -> float:
    """Snap a point coordinate onto the raster pixel lattice."""
    return round(value_pt * dpi / 72.0) * 72.0 / dpi


def region(
    region_class: str,
    bbox: tuple[float, float, float, float],
    text: str,
    dpi: int = 200,
    confidence: float = 1.0,
) -> RegionSpec:
    snapped = (snap(bbox[0], dpi), snap(bbox[1], dpi), snap(bbox[2], dpi), snap(bbox[3], dpi))
    return RegionSpec(region_class, snapped, text, confidence)


def build_pdf(pages: list[PageSpec], dpi: int = 200) -> FixtureDoc:
    """Render page specs into a deterministic PDF."""
    from reportlab.lib.utils import ImageReader
    from reportlab.pdfgen import canvas as rl_canvas

    buf = io.BytesIO()
    first = pages[0] if pages else PageSpec()
    c = rl_canvas.Canvas(buf, pagesize=(first.width_pt, first.height_pt), invariant=1)
    for page in pages:
        c.setPageSize((page.width_pt, page.height_pt))
        for spec in page.regions:
            x0, y0, x1, y1 = spec.bbox
            w_px = round((x1 - x0) * dpi / 72.0)
            h_px = round((y1 - y0) * dpi / 72.0)
            img = pixelcode.encode_region(w_px, h_px, spec.region_class, spec.text, spec.confidence)
            # PDF user space is bottom-up; specs are top-down.
            c.drawImage(ImageReader(img), x0, page.height_pt - y1, width=x1 - x0, height=y1 - y0)
        c.showPage()
    c.save()
    return FixtureDoc(pdf_bytes=buf.getvalue(), pages=pages, dpi=dpi)


def text_image(text: str, dpi: int = 300) -> Image.Image:
    """A standalone marker image 'rendering' the given text (for OCR tests)."""
    width = 240
    height = max(10, (len(text.encode("utf-8")) + pixelcode.HEADER_LEN) // (3 * width) + 8)
    return pixelcode.encode_region(width, height, "text", text)


_WORDS = (
    "incremental concept learning agents reason over structured cases "
    "analogy frames scripts planning diagnosis explanation memory retrieval "
    "classification logic production systems semantic networks version spaces"
).split()


def _sentence(rng: random.Random, n_words: int) -> str:
    words = [rng.choice(_WORDS) for _ in range(n_words)]
    return " ".join(words).capitalize() + "."


def paragraph_text(rng: random.Random, approx_chars: int) -> str:
    out: list[str] = []
    total = 0
    while total < approx_chars:
        s = _sentence(rng, rng.randint(6, 14))
        out.append(s)
        total += len(s) + 1
    return " ".join(out)[: max(approx_chars, 1)].rstrip()


def sample_document(
    n_pages: int = 5,
    n_figures: int = 2,
    seed: int = 0,
    dpi: int = 200,
    page_size: tuple[float, float] = (612.0, 792.0),
) -> FixtureDoc:
    """A deterministic multi-page document with text blocks and figures.

    Figures are distributed over the first ``n_figures`` pages; every
    page gets a title and two text blocks of varying length.
    """
    rng = random.Random(seed)
    width, height = page_size
    pages: list[PageSpec] = []
    for p in range(n_pages):
        regions = [
            region("title", (72, 54, width - 72, 90), f"Chapter {p + 1}: {_sentence(rng, 4)}", dpi)
        ]
        y = 110.0
        for _ in range(2):
            block_h = rng.choice([120, 160, 220])
            text = paragraph_text(rng, rng.randint(300, 1400))
            regions.append(region("text", (72, y, width - 72, y + block_h), text, dpi))
            y += block_h + 18
        if p < n_figures:
            caption_seed = f"Diagram of {rng.choice(_WORDS)} and {rng.choice(_WORDS)}"
            regions.append(region("figure", (150, y, width - 150, y + 140), caption_seed, dpi))
        pages.append(PageSpec(width_pt=width, height_pt=height, regions=regions))
    return build_pdf(pages, dpi)


def main(argv: list[str]) -> int:
    out = argv[0] if argv else "sample.pdf"
    doc = sample_document()
    with open(out, "wb") as fh:
        fh.write(doc.pdf_bytes)
    print(f"wrote {out}: {len(doc.pages)} pages, {sum(len(p.regions) for p in doc.pages)} regions")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
