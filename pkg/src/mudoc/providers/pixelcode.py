"""Pixel-embedded region markers for the mock provider stack.

Synthetic test pages carry a small machine-readable marker at the
top-left corner of every layout region. The marker encodes the region
class, a detection confidence, the region's pixel extent, and a UTF-8
payload (the region's "text"). Markers are plain RGB pixel data, so
they survive lossless PDF embedding and rasterization unchanged, and
they stay decodable after cropping because the byte stream is packed
row-major *within the region*.

Byte layout, packed 3 bytes per pixel starting at the region's (0, 0):

    magic      6 bytes   (never a valid UTF-8 sequence)
    version    1 byte
    class_id   1 byte    index into REGION_CLASSES
    confidence 1 byte    0..255 -> 0.0..1.0
    width_px   2 bytes   LE, region width in pixels
    height_px  2 bytes   LE, region height in pixels
    payload_len 4 bytes  LE
    payload    N bytes   UTF-8

The mock layout engine scans a page raster for magic hits; the mock OCR
and captioning engines decode the payload from a cropped region.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

MAGIC = bytes([0xA5, 0x3C, 0x96, 0x5A, 0xC3, 0x69])
CODEC_VERSION = 1
HEADER_LEN = len(MAGIC) + 1 + 1 + 1 + 2 + 2 + 4  # 17 bytes

REGION_CLASSES = ("title", "text", "figure", "list", "table")


@dataclass(frozen=True)
class Marker:
    """One decoded region marker, in pixel coordinates of the scanned image."""

    x: int
    y: int
    width: int
    height: int
    region_class: str
    confidence: float
    payload: str


def encode_region(
    width: int,
    height: int,
    region_class: str,
    payload: str,
    confidence: float = 1.0,
) -> Image.Image:
    """Render a region image carrying a marker plus filler texture.

    The caller places the returned image at the region's bbox; the
    marker then sits exactly at the bbox's top-left corner.
    """
    if region_class not in REGION_CLASSES:
        raise ValueError(f"unknown region class: {region_class}")
    if width < 8 or height < 2:
        raise ValueError("region too small to carry a marker")
    data = payload.encode("utf-8")
    capacity = width * height * 3 - HEADER_LEN
    if len(data) > capacity:
        raise ValueError(f"payload of {len(data)} bytes exceeds region capacity {capacity}")

    arr = _filler(width, height, region_class)
    stream = (
        MAGIC
        + struct.pack("<BBB", CODEC_VERSION, REGION_CLASSES.index(region_class), int(round(confidence * 255)))
        + struct.pack("<HHI", width, height, len(data))
        + data
    )
    flat = arr.reshape(-1)
    flat[: len(stream)] = np.frombuffer(stream, dtype=np.uint8)
    return Image.fromarray(arr, "RGB")


def _filler(width: int, height: int, region_class: str) -> np.ndarray:
    """Visually plausible backdrop; avoids byte values used by MAGIC."""
    arr = np.full((height, width, 3), 250, dtype=np.uint8)
    if region_class == "figure":
        yy, xx = np.mgrid[0:height, 0:width]
        arr[..., 0] = 200 - (40 * yy // max(height, 1))
        arr[..., 1] = 210
        arr[..., 2] = 180 + (40 * xx // max(width, 1)) % 60
    else:
        # Gray line texture, mimicking rows of text.
        for row in range(2, height - 1, 4):
            arr[row, 1 : width - 1] = (120, 120, 120)
    return arr


def scan_markers(image: Image.Image) -> list[Marker]:
    """Find and decode every marker in an image.

    Returns markers in scan order (top-to-bottom, left-to-right of the
    marker anchor pixel). Invalid or truncated candidates are skipped.
    """
    rgb = image.convert("RGB")
    arr = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = arr.shape
    if w < 2:
        return []
    m = MAGIC
    hit = (
        (arr[:, :-1, 0] == m[0])
        & (arr[:, :-1, 1] == m[1])
        & (arr[:, :-1, 2] == m[2])
        & (arr[:, 1:, 0] == m[3])
        & (arr[:, 1:, 1] == m[4])
        & (arr[:, 1:, 2] == m[5])
    )
    markers: list[Marker] = []
    for y, x in np.argwhere(hit):
        marker = _decode_at(arr, int(x), int(y))
        if marker is not None:
            markers.append(marker)
    return markers


def decode_region(image: Image.Image) -> Marker | None:
    """Decode the marker of an image cropped exactly to one region."""
    found = scan_markers(image)
    return found[0] if found else None


def _decode_at(arr: np.ndarray, x: int, y: int) -> Marker | None:
    h, w, _ = arr.shape
    header_px = (HEADER_LEN + 2) // 3
    if x + header_px > w:
        return None
    header = arr[y, x : x + header_px].tobytes()[:HEADER_LEN]
    if header[: len(MAGIC)] != MAGIC:
        return None
    version, class_id, conf = struct.unpack_from("<BBB", header, len(MAGIC))
    rw, rh, plen = struct.unpack_from("<HHI", header, len(MAGIC) + 3)
    if version != CODEC_VERSION or class_id >= len(REGION_CLASSES):
        return None
    if rw < 8 or x + rw > w or y + rh > h:
        return None
    region = arr[y : y + rh, x : x + rw].reshape(-1)
    stream = region[: HEADER_LEN + plen]
    if stream.size < HEADER_LEN + plen:
        return None
    try:
        payload = stream[HEADER_LEN:].tobytes().decode("utf-8")
    except UnicodeDecodeError:
        return None
    return Marker(
        x=x,
        y=y,
        width=int(rw),
        height=int(rh),
        region_class=REGION_CLASSES[class_id],
        confidence=conf / 255.0,
        payload=payload,
    )
