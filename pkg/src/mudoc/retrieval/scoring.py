"""Dense retrieval scoring.

Text chunks score as the maximum cosine over their stored variants
(raw, cleaned, summary). Figures score as the mean of two maxima: the
text-retrieval similarity over caption/description context embeddings,
and the joint-space similarity over the image itself plus caption and
description text embeddings. Both searches are exact exhaustive scans
with a total ordering (score descending, id ascending), so results are
oracle-comparable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import DimMismatch, ZeroVector
from ..index.store import DocumentIndex
from ..providers.embeddings import Embedder

logger = logging.getLogger(__name__)

CHUNK_VARIANTS = ("raw", "cleaned", "summary")


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    score: float
    best_variant: str


@dataclass(frozen=True)
class ScoredFigure:
    figure_id: str
    score: float
    dpr_max: float
    clip_max: float


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a| |b|); rejects mixed dims and zero vectors."""
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.shape[0] != bv.shape[0]:
        raise DimMismatch(f"cosine over dims {av.shape[0]} and {bv.shape[0]}")
    if not (np.all(np.isfinite(av)) and np.all(np.isfinite(bv))):
        raise ZeroVector("cosine over non-finite vector")
    na = math.sqrt(float(av @ av))
    nb = math.sqrt(float(bv @ bv))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine over zero vector")
    return float(av @ bv) / (na * nb)


def _sims(matrix_vectors: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Cosine of the query against every row, in float64."""
    rows = matrix_vectors.astype(np.float64, copy=False)
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if rows.shape[0] == 0:
        return np.zeros(0)
    if rows.shape[1] != q.shape[0]:
        raise DimMismatch(f"query dim {q.shape[0]} vs matrix dim {rows.shape[1]}")
    qn = math.sqrt(float(q @ q))
    if qn == 0.0:
        raise ZeroVector("zero query vector")
    norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    norms[norms == 0.0] = np.inf  # degenerate rows never win
    return (rows @ q) / (norms * qn)


def rank_chunks(
    query_vec: np.ndarray,
    indices: Sequence[DocumentIndex],
    k: int = 5,
) -> list[ScoredChunk]:
    """Exhaustive max-over-variants scan; ties broken by ascending id."""
    best: dict[str, tuple[float, str]] = {}
    for index in indices:
        for variant in CHUNK_VARIANTS:
            mat = index.matrix(f"chunk.{variant}.ctx_text")
            if mat is None or len(mat) == 0:
                continue
            sims = _sims(mat.vectors, query_vec)
            for cid, s in zip(mat.ids, sims):
                s = float(s)
                if cid not in best or s > best[cid][0]:
                    best[cid] = (s, variant)
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[0]))
    return [ScoredChunk(cid, score, variant) for cid, (score, variant) in ranked[: max(k, 0)]]


def rank_figures(
    query_ctx_vec: np.ndarray,
    query_joint_vec: np.ndarray,
    indices: Sequence[DocumentIndex],
    k: int = 5,
) -> list[ScoredFigure]:
    """Mean of the two per-family maxima; one-sided figures are skipped."""
    dpr: dict[str, float] = {}
    clip: dict[str, float] = {}
    all_ids: list[str] = []
    seen: set[str] = set()
    for index in indices:
        for fig in index.figures:
            if fig.figure_id not in seen:
                seen.add(fig.figure_id)
                all_ids.append(fig.figure_id)
        for key, sink, qvec in (
            ("figure.caption.ctx_text", dpr, query_ctx_vec),
            ("figure.description.ctx_text", dpr, query_ctx_vec),
            ("figure.image.joint_image", clip, query_joint_vec),
            ("figure.caption.joint_text", clip, query_joint_vec),
            ("figure.description.joint_text", clip, query_joint_vec),
        ):
            mat = index.matrix(key)
            if mat is None or len(mat) == 0:
                continue
            sims = _sims(mat.vectors, qvec)
            for fid, s in zip(mat.ids, sims):
                s = float(s)
                if fid not in sink or s > sink[fid]:
                    sink[fid] = s
    scored: list[ScoredFigure] = []
    for fid in all_ids:
        if fid not in dpr or fid not in clip:
            logger.warning("figure %s lacks a representation side; excluded from retrieval", fid)
            continue
        scored.append(ScoredFigure(fid, (dpr[fid] + clip[fid]) / 2.0, dpr[fid], clip[fid]))
    scored.sort(key=lambda f: (-f.score, f.figure_id))
    return scored[: max(k, 0)]


def _as_list(index_or_indices) -> list[DocumentIndex]:
    if isinstance(index_or_indices, DocumentIndex):
        return [index_or_indices]
    return list(index_or_indices)


def retrieve_text(
    query: str,
    index: DocumentIndex | Iterable[DocumentIndex],
    embedder: Embedder,
    k: int = 5,
) -> list[ScoredChunk]:
    if not query:
        raise ValueError("query must be non-empty")
    qvec = embedder.embed(query, "query_text")
    return rank_chunks(qvec, _as_list(index), k)


def retrieve_images(
    query: str,
    index: DocumentIndex | Iterable[DocumentIndex],
    embedder: Embedder,
    k: int = 5,
) -> list[ScoredFigure]:
    if not query:
        raise ValueError("query must be non-empty")
    q_ctx = embedder.embed(query, "query_text")
    q_joint = embedder.embed(query, "joint_text")
    return rank_figures(q_ctx, q_joint, _as_list(index), k)
