"""Word embedding tables: loading/saving, lookup with fallbacks, identical-
word seed mining, and orthogonal Procrustes alignment between languages."""

from __future__ import annotations

import logging
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .svd import jacobi_svd

log = logging.getLogger(__name__)

_DIGITS = re.compile(r"\d")

CACHE_MAGIC = b"XLNEMB1\x00"


class EmbeddingError(Exception):
    pass


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    unk_vector: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.unk_vector is None:
            self.unk_vector = np.zeros(self.dim)
        for word, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise EmbeddingError(f"vector for {word!r} has shape {vec.shape}, want ({self.dim},)")

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, word: str) -> bool:
        return word in self.vectors


def lookup(table: EmbeddingTable, word: str) -> np.ndarray:
    """Fallback chain: exact form, lowercased form, digit-normalized form
    (digits -> #), unk vector."""
    for candidate in (word, word.lower(), _DIGITS.sub("#", word)):
        vec = table.vectors.get(candidate)
        if vec is not None:
            return vec
    return table.unk_vector


def load_embeddings(
    source: Union[str, Path, TextIO, Iterable[str]],
    expected_dim: Optional[int] = None,
) -> EmbeddingTable:
    """Read `word v1 ... vd` text lines; an optional `count dim` header is
    recognized on the first line. Duplicate words keep the first row."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return load_embeddings(fh, expected_dim)

    vectors: dict[str, np.ndarray] = {}
    dim: Optional[int] = expected_dim
    for lineno, line in enumerate(source, start=1):
        fields = line.split()
        if not fields:
            continue
        if lineno == 1 and len(fields) == 2:
            try:
                int(fields[0]), int(fields[1])
            except ValueError:
                pass
            else:
                header_dim = int(fields[1])
                if expected_dim is not None and header_dim != expected_dim:
                    raise EmbeddingError(
                        f"line 1: header dim {header_dim} != expected {expected_dim}"
                    )
                dim = header_dim
                continue
        word, values = fields[0], fields[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise EmbeddingError(f"line {lineno}: expected {dim} values, got {len(values)}")
        if word in vectors:
            log.warning("duplicate word %r at line %d; keeping first", word, lineno)
            continue
        vectors[word] = np.array([float(v) for v in values])
    return EmbeddingTable(dim if dim is not None else 0, vectors)


def save_embeddings(table: EmbeddingTable, path: Union[str, Path], header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(table)} {table.dim}\n")
        for word, vec in table.vectors.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def write_cache(table: EmbeddingTable, path: Union[str, Path]) -> None:
    """Binary cache: magic, uint32 dim, uint32 count, then per word a
    uint32 byte length + UTF-8 bytes + dim little-endian float64s."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<II", table.dim, len(table)))
        for word, vec in table.vectors.items():
            raw = word.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(vec.astype("<f8").tobytes())


def read_cache(path: Union[str, Path]) -> EmbeddingTable:
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise EmbeddingError(f"bad cache magic {magic!r}")
        dim, count = struct.unpack("<II", fh.read(8))
        vectors = {}
        for _ in range(count):
            (wlen,) = struct.unpack("<I", fh.read(4))
            word = fh.read(wlen).decode("utf-8")
            vectors[word] = np.frombuffer(fh.read(8 * dim), dtype="<f8").copy()
    return EmbeddingTable(dim, vectors)


@dataclass(frozen=True)
class SeedLexicon:
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.pairs:
            raise EmbeddingError("no seeds")
        if len({s for s, _ in self.pairs}) != len(self.pairs):
            raise EmbeddingError("duplicate source words in seed lexicon")

    def __len__(self) -> int:
        return len(self.pairs)


def mine_identical_seeds(src: EmbeddingTable, tgt: EmbeddingTable) -> SeedLexicon:
    """Words spelled identically in both vocabularies, case-sensitive,
    in lexicographic order."""
    shared = sorted(set(src.vectors) & set(tgt.vectors))
    if not shared:
        raise EmbeddingError("no seeds: vocabularies share no identical words")
    return SeedLexicon(tuple((w, w) for w in shared))


@dataclass(frozen=True)
class OrthogonalMap:
    matrix: np.ndarray

    def __post_init__(self):
        w = self.matrix
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise EmbeddingError("mapping must be a square matrix")
        err = np.linalg.norm(w.T @ w - np.eye(w.shape[0]))
        if err >= 1e-8:
            raise EmbeddingError(f"matrix is not orthogonal (||W'W - I|| = {err:.3e})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def inverse(self) -> "OrthogonalMap":
        return OrthogonalMap(self.matrix.T.copy())


def procrustes_align(x: np.ndarray, y: np.ndarray) -> OrthogonalMap:
    """Orthogonal W minimizing ||X W - Y||_F, closed form W = U V' from the
    SVD of X'Y. Rows of X and Y are paired seed vectors (target, source)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise EmbeddingError(f"shape mismatch: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise EmbeddingError("non-finite values in alignment input")
    u, _, v = jacobi_svd(x.T @ y)
    return OrthogonalMap(u @ v.T)


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return m / norms


def align_tables(src: EmbeddingTable, tgt: EmbeddingTable, seeds: Optional[SeedLexicon] = None) -> OrthogonalMap:
    """Map the target space onto the source space using identical-word
    seeds; seed vectors are unit-normalized before the fit."""
    if src.dim != tgt.dim:
        raise EmbeddingError(f"dimension mismatch: src {src.dim} vs tgt {tgt.dim}")
    if seeds is None:
        seeds = mine_identical_seeds(src, tgt)
    x = _unit_rows(np.stack([tgt.vectors[t] for _, t in seeds.pairs]))
    y = _unit_rows(np.stack([src.vectors[s] for s, _ in seeds.pairs]))
    return procrustes_align(x, y)


def apply_mapping(table: EmbeddingTable, mapping: OrthogonalMap) -> EmbeddingTable:
    """Rotate every vector (and the unk vector) into the aligned space."""
    if table.dim != mapping.dim:
        raise EmbeddingError(f"dimension mismatch: table {table.dim} vs map {mapping.dim}")
    w = mapping.matrix
    return EmbeddingTable(
        table.dim,
        {word: vec @ w for word, vec in table.vectors.items()},
        table.unk_vector @ w,
    )
