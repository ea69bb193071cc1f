"""Page enumeration and best-effort rasterization.

Pages are rendered onto a white canvas at a caller-chosen dpi. Image
XObjects are decoded and pasted at their transformed positions; vector
art and text runs are ignored (the ingestion pipeline works from
embedded page imagery, and OCR is an external provider's concern).
Axis-aligned placements render exactly; rotated/skewed placements fall
back to their bounding box.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from PIL import Image

from ..errors import DecodeError, MalformedPdf
from .objects import Name, PdfFile, Ref, Stream, _Lexer

Matrix = tuple[float, float, float, float, float, float]

IDENTITY: Matrix = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

_MAX_PAGES = 5000
_MAX_FORM_DEPTH = 8


def _mat_mul(m: Matrix, n: Matrix) -> Matrix:
    """Compose: apply m, then n."""
    a1, b1, c1, d1, e1, f1 = m
    a2, b2, c2, d2, e2, f2 = n
    return (
        a1 * a2 + b1 * c2,
        a1 * b2 + b1 * d2,
        c1 * a2 + d1 * c2,
        c1 * b2 + d1 * d2,
        e1 * a2 + f1 * c2 + e2,
        e1 * b2 + f1 * d2 + f2,
    )


def _apply(m: Matrix, x: float, y: float) -> tuple[float, float]:
    a, b, c, d, e, f = m
    return (a * x + c * y + e, b * x + d * y + f)


@dataclass
class PdfPage:
    index: int
    width_pt: float
    height_pt: float
    _doc: "PdfDocument"
    _node: dict

    def raster(self, dpi: int) -> Image.Image:
        return self._doc._rasterize(self, dpi)


class PdfDocument:
    """Parsed PDF exposing page geometry and page rasters."""

    def __init__(self, data: bytes):
        self.pdf = PdfFile(data)
        root = self.pdf.resolve(self.pdf.trailer.get("Root"))
        if not isinstance(root, dict):
            raise MalformedPdf("unresolvable document catalog")
        pages_node = self.pdf.resolve(root.get("Pages"))
        if not isinstance(pages_node, dict):
            raise MalformedPdf("missing page tree")
        self._pages: list[PdfPage] = []
        self._walk_pages(pages_node, inherited={}, seen=set())
        if not self._pages:
            raise MalformedPdf("document has no pages")

    def __len__(self) -> int:
        return len(self._pages)

    @property
    def pages(self) -> list[PdfPage]:
        return list(self._pages)

    def _walk_pages(self, node: dict, inherited: dict, seen: set) -> None:
        node_id = id(node)
        if node_id in seen or len(self._pages) > _MAX_PAGES:
            raise MalformedPdf("malformed page tree")
        seen.add(node_id)
        merged = dict(inherited)
        for key in ("MediaBox", "Resources", "Rotate"):
            if key in node:
                merged[key] = node[key]
        ntype = str(self.pdf.resolve(node.get("Type", "")))
        kids = self.pdf.resolve(node.get("Kids"))
        if ntype == "Pages" or isinstance(kids, list):
            for kid in kids or []:
                child = self.pdf.resolve(kid)
                if isinstance(child, dict):
                    self._walk_pages(child, merged, seen)
            return
        box = [float(self.pdf.resolve(v)) for v in self.pdf.resolve(merged.get("MediaBox", [0, 0, 612, 792]))]
        node = dict(node)
        node.setdefault("Resources", merged.get("Resources"))
        self._pages.append(
            PdfPage(
                index=len(self._pages),
                width_pt=abs(box[2] - box[0]),
                height_pt=abs(box[3] - box[1]),
                _doc=self,
                _node=node | {"_MediaBox": box},
            )
        )

    # -- rasterization --------------------------------------------------------

    def _rasterize(self, page: PdfPage, dpi: int) -> Image.Image:
        scale = dpi / 72.0
        w_px = max(1, round(page.width_pt * scale))
        h_px = max(1, round(page.height_pt * scale))
        canvas = Image.new("RGB", (w_px, h_px), (255, 255, 255))
        box = page._node["_MediaBox"]
        # User space -> top-down pixels: scale and flip y.
        base: Matrix = (scale, 0.0, 0.0, -scale, -box[0] * scale, box[3] * scale)
        content = self._page_content(page._node)
        resources = self.pdf.resolve(page._node.get("Resources")) or {}
        if content:
            self._run_content(content, resources, base, canvas, depth=0)
        return canvas

    def _page_content(self, node: dict) -> bytes:
        contents = self.pdf.resolve(node.get("Contents"))
        parts: list[bytes] = []
        items = contents if isinstance(contents, list) else [contents]
        for item in items:
            obj = self.pdf.resolve(item)
            if isinstance(obj, Stream):
                parts.append(obj.data(self.pdf.resolve))
        return b"\n".join(parts)

    def _run_content(self, content: bytes, resources: dict, ctm: Matrix, canvas: Image.Image, depth: int) -> None:
        if depth > _MAX_FORM_DEPTH:
            return
        xobjects = self.pdf.resolve(resources.get("XObject")) or {}
        lex = _Lexer(content)
        stack: list[Matrix] = []
        operands: list = []
        while True:
            lex.skip_ws()
            if lex.pos >= len(lex.buf):
                return
            c = lex.peek()
            if c in b"/<([+-.0123456789":
                try:
                    operands.append(lex.parse_object())
                except Exception:
                    return
                continue
            op = lex.read_token()
            if not op:
                return
            if op == b"q":
                stack.append(ctm)
            elif op == b"Q":
                ctm = stack.pop() if stack else ctm
            elif op == b"cm" and len(operands) >= 6:
                vals = [float(v) for v in operands[-6:]]
                ctm = _mat_mul(tuple(vals), ctm)  # type: ignore[arg-type]
            elif op == b"Do" and operands:
                name = operands[-1]
                xobj = self.pdf.resolve(xobjects.get(str(name))) if isinstance(name, Name) else None
                if isinstance(xobj, Stream):
                    self._draw_xobject(xobj, ctm, canvas, depth)
            elif op == b"BI":
                # Inline image: skip to EI, keeping the scan resynchronized.
                end = lex.buf.find(b"EI", lex.pos)
                lex.pos = len(lex.buf) if end < 0 else end + 2
            operands = []

    def _draw_xobject(self, xobj: Stream, ctm: Matrix, canvas: Image.Image, depth: int) -> None:
        subtype = str(self.pdf.resolve(xobj.info.get("Subtype", "")))
        if subtype == "Form":
            mtx = self.pdf.resolve(xobj.info.get("Matrix")) or [1, 0, 0, 1, 0, 0]
            inner = _mat_mul(tuple(float(v) for v in mtx), ctm)  # type: ignore[arg-type]
            res = self.pdf.resolve(xobj.info.get("Resources")) or {}
            try:
                self._run_content(xobj.data(self.pdf.resolve), res, inner, canvas, depth + 1)
            except DecodeError:
                pass
            return
        if subtype != "Image":
            return
        try:
            img = self._decode_image(xobj)
        except DecodeError:
            return
        # The image occupies the CTM-transformed unit square.
        corners = [_apply(ctm, x, y) for x, y in ((0, 0), (1, 0), (0, 1), (1, 1))]
        xs = [p[0] for p in corners]
        ys = [p[1] for p in corners]
        x0, y0 = round(min(xs)), round(min(ys))
        x1, y1 = round(max(xs)), round(max(ys))
        w, h = x1 - x0, y1 - y0
        if w <= 0 or h <= 0:
            return
        if img.size != (w, h):
            img = img.resize((w, h), Image.Resampling.NEAREST)
        canvas.paste(img, (x0, y0))

    def _decode_image(self, xobj: Stream) -> Image.Image:
        resolve = self.pdf.resolve
        filters = resolve(xobj.info.get("Filter"))
        names = [str(resolve(f)) for f in (filters if isinstance(filters, list) else [filters] if filters else [])]
        data = xobj.data(resolve)
        if names and names[-1] in ("DCTDecode", "JPXDecode"):
            try:
                return Image.open(io.BytesIO(data)).convert("RGB")
            except Exception as exc:
                raise DecodeError(f"embedded JPEG unreadable: {exc}") from exc
        width = int(resolve(xobj.info.get("Width", 0)) or 0)
        height = int(resolve(xobj.info.get("Height", 0)) or 0)
        bpc = int(resolve(xobj.info.get("BitsPerComponent", 8)) or 8)
        if width <= 0 or height <= 0:
            raise DecodeError("image without dimensions")
        ncomp, palette = self._colorspace(resolve(xobj.info.get("ColorSpace")))
        if bpc != 8:
            raise DecodeError(f"unsupported bit depth {bpc}")
        expected = width * height * ncomp
        if len(data) < expected:
            raise DecodeError("truncated image data")
        raw = data[:expected]
        if palette is not None:
            img = Image.frombytes("P", (width, height), raw)
            img.putpalette(palette)
            return img.convert("RGB")
        if ncomp == 1:
            return Image.frombytes("L", (width, height), raw).convert("RGB")
        return Image.frombytes("RGB", (width, height), raw)

    def _colorspace(self, cs) -> tuple[int, bytes | None]:
        cs = self.pdf.resolve(cs)
        if isinstance(cs, list) and cs:
            head = str(self.pdf.resolve(cs[0]))
            if head == "Indexed":
                base_n, _ = self._colorspace(cs[1])
                lookup = self.pdf.resolve(cs[3])
                table = lookup.data(self.pdf.resolve) if isinstance(lookup, Stream) else bytes(lookup)
                if base_n == 3:
                    return 1, table
                return 1, b"".join(bytes([b, b, b]) for b in table)
            if head == "ICCBased":
                stream = self.pdf.resolve(cs[1])
                n = int(self.pdf.resolve(stream.info.get("N", 3))) if isinstance(stream, Stream) else 3
                return (n if n in (1, 3) else 3), None
        name = str(cs) if cs is not None else "DeviceRGB"
        if name == "DeviceGray":
            return 1, None
        if name == "DeviceCMYK":
            raise DecodeError("CMYK images unsupported")
        return 3, None


def open_pdf(data: bytes) -> PdfDocument:
    """Parse PDF bytes; raises MalformedPdf for unusable input."""
    if isinstance(data, Ref):  # defensive; callers pass bytes
        raise MalformedPdf("expected PDF bytes")
    return PdfDocument(bytes(data))
