"""Row-aligned embedding matrices and their flat binary file format.

File layout (little-endian throughout):

    magic      4 bytes   b"MDEM"
    version    u32       format version
    rows       u32
    dim        u32
    ids        rows x (u32 length + UTF-8 bytes)
    vectors    rows x dim x f32, row-major

The id list and the float block are row-aligned: ids[i] owns row i.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CorruptIndex, DimMismatch, VersionMismatch

MAGIC = b"MDEM"
MATRIX_FORMAT_VERSION = 1


@dataclass
class EmbeddingMatrix:
    """Vectors for one (record kind, variant, family) combination."""

    family: str
    dim: int
    ids: list[str] = field(default_factory=list)
    _rows: list[np.ndarray] = field(default_factory=list)
    _dense: np.ndarray | None = None

    def add(self, record_id: str, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float32).reshape(-1)
        if vec.shape[0] != self.dim:
            raise DimMismatch(f"vector of dim {vec.shape[0]} in {self.family} matrix of dim {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise DimMismatch(f"non-finite vector for {record_id}")
        if self._dense is not None and not self._rows:
            self._rows = [row for row in self._dense]
        self.ids.append(record_id)
        self._rows.append(vec)
        self._dense = None

    @property
    def vectors(self) -> np.ndarray:
        if self._dense is None:
            if self._rows:
                self._dense = np.vstack(self._rows).astype(np.float32)
            else:
                self._dense = np.zeros((0, self.dim), dtype=np.float32)
        return self._dense

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, record_id: str) -> np.ndarray:
        return self.vectors[self.ids.index(record_id)]

    def equals(self, other: "EmbeddingMatrix") -> bool:
        return (
            self.family == other.family
            and self.dim == other.dim
            and self.ids == other.ids
            and np.array_equal(self.vectors, other.vectors)
        )


def write_matrix(path: Path, matrix: EmbeddingMatrix) -> None:
    vectors = matrix.vectors
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", MATRIX_FORMAT_VERSION, len(matrix.ids), matrix.dim))
        for record_id in matrix.ids:
            raw = record_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(vectors, dtype="<f4").tobytes())


def read_matrix(path: Path, family: str, mmap: bool = False) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16 or header[:4] != MAGIC:
            raise CorruptIndex(f"{path.name}: bad matrix header")
        version, rows, dim = struct.unpack("<III", header[4:16])
        if version > MATRIX_FORMAT_VERSION:
            raise VersionMismatch(f"{path.name}: format version {version} is newer than supported")
        ids: list[str] = []
        for _ in range(rows):
            lraw = fh.read(4)
            if len(lraw) < 4:
                raise CorruptIndex(f"{path.name}: truncated id table")
            (ln,) = struct.unpack("<I", lraw)
            raw = fh.read(ln)
            if len(raw) < ln:
                raise CorruptIndex(f"{path.name}: truncated id table")
            ids.append(raw.decode("utf-8"))
        float_offset = fh.tell()
    expected = rows * dim * 4
    actual = path.stat().st_size - float_offset
    if actual < expected:
        raise CorruptIndex(f"{path.name}: truncated vector block ({actual} < {expected} bytes)")
    if mmap and rows > 0:
        data = np.memmap(path, dtype="<f4", mode="r", offset=float_offset, shape=(rows, dim))
        dense = np.asarray(data)
    else:
        with open(path, "rb") as fh:
            fh.seek(float_offset)
            dense = np.frombuffer(fh.read(expected), dtype="<f4").reshape(rows, dim).copy()
    matrix = EmbeddingMatrix(family=family, dim=dim, ids=ids)
    matrix._dense = dense.astype(np.float32, copy=False)
    matrix._rows = []
    return matrix
