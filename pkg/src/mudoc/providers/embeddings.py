"""Embedding adapters for the two encoder families.

Four embedding families exist: an asymmetric text-retrieval pair
(ctx_text for passages, query_text for queries) and a joint
image-text pair (joint_image, joint_text). Vectors leave the adapter
unit-normalized, so downstream cosine reduces to a dot product.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Union

import numpy as np
from PIL import Image

from ..errors import ModalityMismatch, ProviderUnavailable
from .base import HttpAdapter, ProviderStats, image_to_b64

TEXT_FAMILIES = ("ctx_text", "query_text", "joint_text")
IMAGE_FAMILIES = ("joint_image",)
ALL_FAMILIES = TEXT_FAMILIES + IMAGE_FAMILIES

Payload = Union[str, Image.Image]


class Embedder(Protocol):
    def embed(self, payload: Payload, family: str) -> np.ndarray: ...

    def dim(self, family: str) -> int: ...


def _check_modality(payload: Payload, family: str) -> None:
    if family not in ALL_FAMILIES:
        raise ModalityMismatch(f"unknown embedding family {family!r}")
    if family in IMAGE_FAMILIES and not isinstance(payload, Image.Image):
        raise ModalityMismatch(f"{family} takes an image, got {type(payload).__name__}")
    if family in TEXT_FAMILIES and not isinstance(payload, str):
        raise ModalityMismatch(f"{family} takes text, got {type(payload).__name__}")


def normalize(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ProviderUnavailable("backend returned a non-finite embedding")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ProviderUnavailable("backend returned a zero embedding")
    return (v / norm).astype(np.float32)


class HashEmbedder:
    """Deterministic stand-in encoders.

    Text entering the DPR-like space hashes to the same direction for
    the ctx and query encoders, so an exact textual match scores 1.0;
    unrelated inputs land near-orthogonal, which is all the ranking
    tests need. Images hash their raw pixels, so a stored crop re-embeds
    identically after a PNG round trip.
    """

    _SPACE = {"ctx_text": "dpr", "query_text": "dpr", "joint_text": "clip", "joint_image": "clip"}

    def __init__(self, ctx_dim: int = 768, joint_dim: int = 512, stats: ProviderStats | None = None):
        self._dims = {"dpr": ctx_dim, "clip": joint_dim}
        self._stats = stats

    def dim(self, family: str) -> int:
        return self._dims[self._SPACE[family]]

    def embed(self, payload: Payload, family: str) -> np.ndarray:
        _check_modality(payload, family)
        if self._stats is not None:
            self._stats.bump("embed")
        space = self._SPACE[family]
        if isinstance(payload, Image.Image):
            rgb = payload.convert("RGB")
            material = f"{rgb.width}x{rgb.height}|".encode("ascii") + rgb.tobytes()
        else:
            material = payload.encode("utf-8")
        digest = hashlib.sha256(space.encode("ascii") + b"\x00" + material).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return normalize(rng.standard_normal(self._dims[space]))


class HttpEmbedder(HttpAdapter):
    """POST /embed {"family", "text" | "image_b64"} -> {"vector": [...]}."""

    def __init__(self, base_url: str, **kw):
        super().__init__(base_url, stats_key="embed", **kw)
        self._dims: dict[str, int] = {}

    def dim(self, family: str) -> int:
        if family not in self._dims:
            probe = self.embed("dimension probe" if family in TEXT_FAMILIES else Image.new("RGB", (4, 4)), family)
            self._dims[family] = int(probe.shape[0])
        return self._dims[family]

    def embed(self, payload: Payload, family: str) -> np.ndarray:
        _check_modality(payload, family)
        if isinstance(payload, Image.Image):
            body = self.post_json("/embed", {"family": family, "image_b64": image_to_b64(payload)})
        else:
            body = self.post_json("/embed", {"family": family, "text": payload})
        vec = normalize(np.asarray(body["vector"], dtype=np.float64))
        self._dims.setdefault(family, int(vec.shape[0]))
        return vec
