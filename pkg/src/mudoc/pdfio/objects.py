"""Minimal PDF object model: lexer, xref resolution, stream filters.

Covers the subset of PDF 1.3-1.4 emitted by common writers for
image-and-text pages: classic cross-reference tables (with /Prev
chains), direct and indirect stream lengths, and the Flate, ASCII85,
ASCIIHex, RunLength and DCT filters. Cross-reference *streams* and
object streams are not parsed; when the xref table is unusable the
loader falls back to a brute-force scan of "N G obj" headers, which
recovers most non-compressed documents.
"""

from __future__ import annotations

import base64
import re
import zlib
from dataclasses import dataclass
from typing import Any, NamedTuple

from ..errors import DecodeError, MalformedPdf

_WHITESPACE = b"\x00\t\n\x0c\r "
_DELIMITERS = b"()<>[]{}/%"


class Ref(NamedTuple):
    num: int
    gen: int


class Name(str):
    """A PDF name token (/Foo), distinct from a string value."""


@dataclass
class Stream:
    info: dict
    raw: bytes

    def data(self, resolve) -> bytes:
        """Apply the filter chain, leaving DCT (JPEG) data intact."""
        return apply_filters(self.info, self.raw, resolve)


class _Lexer:
    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def skip_ws(self) -> None:
        buf, n = self.buf, len(self.buf)
        while self.pos < n:
            c = buf[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == 0x25:  # '%' comment
                end = buf.find(b"\n", self.pos)
                self.pos = n if end < 0 else end + 1
            else:
                return

    def peek(self) -> int:
        return self.buf[self.pos] if self.pos < len(self.buf) else -1

    def read_token(self) -> bytes:
        """Read a bare keyword token (obj, endobj, stream, R, true...)."""
        self.skip_ws()
        start = self.pos
        buf, n = self.buf, len(self.buf)
        while self.pos < n and buf[self.pos] not in _WHITESPACE and buf[self.pos] not in _DELIMITERS:
            self.pos += 1
        return buf[start : self.pos]

    def parse_object(self) -> Any:
        self.skip_ws()
        c = self.peek()
        if c < 0:
            raise MalformedPdf("unexpected end of data")
        if c == 0x3C:  # '<'
            if self.buf[self.pos : self.pos + 2] == b"<<":
                return self._parse_dict_or_stream()
            return self._parse_hex_string()
        if c == 0x28:  # '('
            return self._parse_literal_string()
        if c == 0x5B:  # '['
            return self._parse_array()
        if c == 0x2F:  # '/'
            return self._parse_name()
        if c in b"+-.0123456789":
            return self._parse_number_or_ref()
        token = self.read_token()
        if token == b"true":
            return True
        if token == b"false":
            return False
        if token == b"null":
            return None
        raise MalformedPdf(f"unexpected token {token[:20]!r}")

    def _parse_dict_or_stream(self) -> Any:
        self.pos += 2
        d: dict = {}
        while True:
            self.skip_ws()
            if self.buf[self.pos : self.pos + 2] == b">>":
                self.pos += 2
                break
            key = self._parse_name()
            d[str(key)] = self.parse_object()
        save = self.pos
        self.skip_ws()
        if self.buf[self.pos : self.pos + 6] == b"stream":
            self.pos += 6
            if self.buf[self.pos : self.pos + 2] == b"\r\n":
                self.pos += 2
            elif self.peek() in (0x0A, 0x0D):
                self.pos += 1
            return _RawStreamMarker(d, self.pos)
        self.pos = save
        return d

    def _parse_array(self) -> list:
        self.pos += 1
        items = []
        while True:
            self.skip_ws()
            if self.peek() == 0x5D:  # ']'
                self.pos += 1
                return items
            items.append(self.parse_object())

    def _parse_name(self) -> Name:
        if self.peek() != 0x2F:
            raise MalformedPdf("expected name")
        self.pos += 1
        out = bytearray()
        buf, n = self.buf, len(self.buf)
        while self.pos < n:
            c = buf[self.pos]
            if c in _WHITESPACE or c in _DELIMITERS:
                break
            if c == 0x23 and self.pos + 2 < n:  # '#xx'
                out.append(int(buf[self.pos + 1 : self.pos + 3], 16))
                self.pos += 3
            else:
                out.append(c)
                self.pos += 1
        return Name(out.decode("latin-1"))

    def _parse_literal_string(self) -> bytes:
        self.pos += 1
        out = bytearray()
        depth = 1
        buf, n = self.buf, len(self.buf)
        while self.pos < n:
            c = buf[self.pos]
            self.pos += 1
            if c == 0x5C:  # backslash
                if self.pos >= n:
                    break
                e = buf[self.pos]
                self.pos += 1
                mapping = {0x6E: 10, 0x72: 13, 0x74: 9, 0x62: 8, 0x66: 12}
                if e in mapping:
                    out.append(mapping[e])
                elif e in b"01234567":
                    digits = bytes([e])
                    while len(digits) < 3 and self.pos < n and buf[self.pos] in b"01234567":
                        digits += bytes([buf[self.pos]])
                        self.pos += 1
                    out.append(int(digits, 8) & 0xFF)
                elif e in (0x0A, 0x0D):
                    if e == 0x0D and self.pos < n and buf[self.pos] == 0x0A:
                        self.pos += 1
                else:
                    out.append(e)
            elif c == 0x28:
                depth += 1
                out.append(c)
            elif c == 0x29:
                depth -= 1
                if depth == 0:
                    return bytes(out)
                out.append(c)
            else:
                out.append(c)
        raise MalformedPdf("unterminated string")

    def _parse_hex_string(self) -> bytes:
        self.pos += 1
        end = self.buf.find(b">", self.pos)
        if end < 0:
            raise MalformedPdf("unterminated hex string")
        hexdata = re.sub(rb"\s", b"", self.buf[self.pos : end])
        self.pos = end + 1
        if len(hexdata) % 2:
            hexdata += b"0"
        return bytes.fromhex(hexdata.decode("ascii"))

    def _parse_number_or_ref(self) -> Any:
        token = self.read_token()
        save = self.pos
        try:
            if b"." in token:
                return float(token)
            value = int(token)
        except ValueError as exc:
            raise MalformedPdf(f"bad number {token!r}") from exc
        # Lookahead for "gen R" making this an indirect reference.
        self.skip_ws()
        if self.peek() in b"0123456789":
            token2 = self.read_token()
            self.skip_ws()
            if self.buf[self.pos : self.pos + 1] == b"R" and (
                self.pos + 1 >= len(self.buf)
                or self.buf[self.pos + 1] in _WHITESPACE
                or self.buf[self.pos + 1] in _DELIMITERS
            ):
                self.pos += 1
                return Ref(value, int(token2))
        self.pos = save
        return value


@dataclass
class _RawStreamMarker:
    info: dict
    data_start: int


class PdfFile:
    """Random-access view of a parsed PDF: objects, trailer, pages."""

    def __init__(self, data: bytes):
        if not data.startswith(b"%PDF-"):
            raise MalformedPdf("missing %PDF header")
        self.data = data
        self._offsets: dict[int, int] = {}
        self.trailer: dict = {}
        self._cache: dict[int, Any] = {}
        try:
            self._load_xref()
        except MalformedPdf:
            self._offsets.clear()
            self.trailer = {}
        if not self._offsets or "Root" not in self.trailer:
            self._brute_scan()
        if "Encrypt" in self.trailer:
            raise MalformedPdf("encrypted PDFs are not supported")
        if "Root" not in self.trailer:
            raise MalformedPdf("no document catalog")

    # -- xref ---------------------------------------------------------------

    def _load_xref(self) -> None:
        tail = self.data[-2048:]
        m = None
        for m in re.finditer(rb"startxref\s+(\d+)", tail):
            pass
        if m is None:
            raise MalformedPdf("startxref not found")
        offset = int(m.group(1))
        seen = set()
        while offset and offset not in seen:
            seen.add(offset)
            offset = self._parse_xref_section(offset)

    def _parse_xref_section(self, offset: int) -> int:
        if offset >= len(self.data):
            raise MalformedPdf("xref offset out of range")
        lex = _Lexer(self.data, offset)
        lex.skip_ws()
        if self.data[lex.pos : lex.pos + 4] != b"xref":
            raise MalformedPdf("cross-reference streams are not supported")
        lex.pos += 4
        while True:
            lex.skip_ws()
            if self.data[lex.pos : lex.pos + 7] == b"trailer":
                lex.pos += 7
                break
            start = lex.read_token()
            count = lex.read_token()
            try:
                first, n = int(start), int(count)
            except ValueError as exc:
                raise MalformedPdf("bad xref subsection") from exc
            for i in range(n):
                lex.skip_ws()
                entry = self.data[lex.pos : lex.pos + 18]
                if len(entry) < 18:
                    raise MalformedPdf("truncated xref entry")
                if entry[17:18] == b"n":
                    num = first + i
                    if num not in self._offsets:
                        self._offsets[num] = int(entry[0:10])
                lex.pos += 18
        trailer = lex.parse_object()
        if not isinstance(trailer, dict):
            raise MalformedPdf("bad trailer")
        for key, value in trailer.items():
            self.trailer.setdefault(key, value)
        prev = trailer.get("Prev")
        return int(prev) if isinstance(prev, (int, float)) else 0

    def _brute_scan(self) -> None:
        for m in re.finditer(rb"(?m)^(\d+)\s+(\d+)\s+obj\b", self.data):
            self._offsets.setdefault(int(m.group(1)), m.start())
        if "Root" not in self.trailer:
            for m in re.finditer(rb"/Root\s+(\d+)\s+(\d+)\s+R", self.data):
                self.trailer["Root"] = Ref(int(m.group(1)), int(m.group(2)))
        if "Encrypt" not in self.trailer:
            for m in re.finditer(rb"/Encrypt\s+(\d+)\s+(\d+)\s+R", self.data):
                self.trailer["Encrypt"] = Ref(int(m.group(1)), int(m.group(2)))

    # -- object access ------------------------------------------------------

    def resolve(self, obj: Any) -> Any:
        while isinstance(obj, Ref):
            obj = self._load_object(obj.num)
        return obj

    def _load_object(self, num: int) -> Any:
        if num in self._cache:
            return self._cache[num]
        offset = self._offsets.get(num)
        if offset is None:
            return None
        lex = _Lexer(self.data, offset)
        lex.read_token()  # object number
        lex.read_token()  # generation
        if lex.read_token() != b"obj":
            raise MalformedPdf(f"object {num} not at recorded offset")
        obj = lex.parse_object()
        if isinstance(obj, _RawStreamMarker):
            obj = self._materialize_stream(obj)
        self._cache[num] = obj
        return obj

    def _materialize_stream(self, marker: _RawStreamMarker) -> Stream:
        length = self.resolve(marker.info.get("Length"))
        start = marker.data_start
        if isinstance(length, (int, float)) and start + int(length) <= len(self.data):
            raw = self.data[start : start + int(length)]
        else:
            end = self.data.find(b"endstream", start)
            if end < 0:
                raise MalformedPdf("unterminated stream")
            raw = self.data[start:end].rstrip(b"\r\n")
        return Stream(marker.info, raw)


# -- filters ------------------------------------------------------------------


def apply_filters(info: dict, raw: bytes, resolve) -> bytes:
    filters = resolve(info.get("Filter"))
    if filters is None:
        return raw
    if not isinstance(filters, list):
        filters = [filters]
    parms = resolve(info.get("DecodeParms"))
    if not isinstance(parms, list):
        parms = [parms] * len(filters)
    data = raw
    for f, parm in zip(filters, parms):
        name = str(resolve(f))
        parm = resolve(parm) or {}
        if name == "FlateDecode":
            try:
                data = zlib.decompress(data)
            except zlib.error as exc:
                raise DecodeError(f"flate decode failed: {exc}") from exc
            data = _undo_predictor(data, parm, resolve)
        elif name == "ASCII85Decode":
            text = bytes(data).strip()
            if text.endswith(b"~>"):
                text = text[:-2]
            if text.startswith(b"<~"):
                text = text[2:]
            try:
                data = base64.a85decode(re.sub(rb"\s", b"", text))
            except ValueError as exc:
                raise DecodeError(f"ascii85 decode failed: {exc}") from exc
        elif name == "ASCIIHexDecode":
            text = re.sub(rb"\s", b"", bytes(data)).rstrip(b">")
            if len(text) % 2:
                text += b"0"
            data = bytes.fromhex(text.decode("ascii"))
        elif name == "RunLengthDecode":
            data = _run_length_decode(data)
        elif name in ("DCTDecode", "JPXDecode"):
            # Terminal image codecs; the raster layer hands them to PIL.
            return data
        else:
            raise DecodeError(f"unsupported filter {name}")
    return data


def _undo_predictor(data: bytes, parm: dict, resolve) -> bytes:
    predictor = int(resolve(parm.get("Predictor", 1)) or 1)
    if predictor <= 1:
        return data
    colors = int(resolve(parm.get("Colors", 1)) or 1)
    bpc = int(resolve(parm.get("BitsPerComponent", 8)) or 8)
    columns = int(resolve(parm.get("Columns", 1)) or 1)
    if predictor < 10:
        raise DecodeError(f"unsupported predictor {predictor}")
    bpp = max(1, colors * bpc // 8)
    row_len = (columns * colors * bpc + 7) // 8
    out = bytearray()
    prev = bytearray(row_len)
    pos = 0
    while pos < len(data):
        ftype = data[pos]
        row = bytearray(data[pos + 1 : pos + 1 + row_len])
        pos += 1 + row_len
        if ftype == 1:
            for i in range(bpp, len(row)):
                row[i] = (row[i] + row[i - bpp]) & 0xFF
        elif ftype == 2:
            for i in range(len(row)):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif ftype == 3:
            for i in range(len(row)):
                left = row[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:
            for i in range(len(row)):
                a = row[i - bpp] if i >= bpp else 0
                b = prev[i]
                c = prev[i - bpp] if i >= bpp else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
                row[i] = (row[i] + pred) & 0xFF
        elif ftype != 0:
            raise DecodeError(f"bad PNG filter type {ftype}")
        out.extend(row)
        prev = row
    return bytes(out)


def _run_length_decode(data: bytes) -> bytes:
    out = bytearray()
    i = 0
    while i < len(data):
        n = data[i]
        if n == 128:
            break
        if n < 128:
            out.extend(data[i + 1 : i + 2 + n])
            i += 2 + n
        else:
            out.extend(data[i + 1 : i + 2] * (257 - n))
            i += 2
    return bytes(out)
