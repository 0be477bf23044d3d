"""Sparse document-by-feature matrices.

Two feature families drive the simulation: BM25-saturated term weights
computed from corpus tokens, and learned sparse vectors produced offline by
a masked-language-model encoder and shipped as a JSONL interchange file
(``{"doc_id": str, "vector": {feature_index: weight}}``). Both end up in the
same row-compressed layout, aligned to collection document order.
"""

from __future__ import annotations

import json
import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import CorpusFormatError, LabeledCollection

# Vocabulary size of the released encoder checkpoint this pipeline targets.
DEFAULT_VOCAB_SIZE = 30522

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_CACHE_MAGIC = b"TARSPMX1"
_CACHE_VERSION = 1


def default_top_s(vocab_size: int) -> int:
    """Top-s pruning cap: 10% of the feature space (3052 for vocab 30522)."""
    return max(1, math.floor(0.10 * vocab_size))


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable row-compressed document×feature matrix for one feature family."""

    csr: sp.csr_matrix
    family: str

    @property
    def n_rows(self) -> int:
        return self.csr.shape[0]

    @property
    def n_cols(self) -> int:
        return self.csr.shape[1]

    def row_entries(self, i: int) -> list[tuple[int, float]]:
        """Sorted (feature_index, weight) pairs of row i."""
        start, end = self.csr.indptr[i], self.csr.indptr[i + 1]
        return list(zip(self.csr.indices[start:end].tolist(), self.csr.data[start:end].tolist()))

    def nnz_per_row(self) -> np.ndarray:
        return np.diff(self.csr.indptr)


def _build_matrix(
    rows: Iterable[Sequence[tuple[int, float]]], n_rows: int, n_cols: int, family: str
) -> SparseMatrix:
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    indices: list[int] = []
    data: list[float] = []
    for i, entries in enumerate(rows):
        for j, w in entries:
            indices.append(j)
            data.append(w)
        indptr[i + 1] = len(indices)
    csr = sp.csr_matrix(
        (np.asarray(data, dtype=np.float32), np.asarray(indices, dtype=np.int32), indptr),
        shape=(n_rows, n_cols),
    )
    return SparseMatrix(csr=csr, family=family)


def bm25_weight(tf: float, dl: float, avgdl: float, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> float:
    """Saturated term-frequency weight tf / (tf + k1*((1-b) + b*dl/avgdl)).

    Bounded in [0, 1), monotone in tf. The IDF factor is deliberately absent:
    the downstream learner re-weights features itself.
    """
    if avgdl <= 0:
        raise ValueError("avgdl must be positive (empty collection?)")
    if tf < 0 or dl < 0:
        raise ValueError("tf and dl must be nonnegative")
    if k1 <= 0 or not 0 <= b <= 1:
        raise ValueError("require k1 > 0 and 0 <= b <= 1")
    if tf == 0:
        return 0.0
    return tf / (tf + k1 * ((1.0 - b) + b * dl / avgdl))


def build_vocabulary(collection: LabeledCollection) -> dict[str, int]:
    """Token -> column index, assigned in first-appearance order over the corpus."""
    vocab: dict[str, int] = {}
    for doc in collection.documents:
        for tok in doc.tokens:
            if tok not in vocab:
                vocab[tok] = len(vocab)
    return vocab


def encode_bm25(
    collection: LabeledCollection, k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> SparseMatrix:
    """BM25-saturated weights for every document over the corpus vocabulary."""
    vocab = build_vocabulary(collection)
    avgdl = collection.avg_doc_length
    rows: list[list[tuple[int, float]]] = []
    for doc in collection.documents:
        if not doc.tokens:
            rows.append([])
            continue
        counts = Counter(doc.tokens)
        entries = [(vocab[t], bm25_weight(tf, doc.length, avgdl, k1, b)) for t, tf in counts.items()]
        entries.sort(key=lambda e: e[0])
        rows.append(entries)
    return _build_matrix(rows, collection.n_docs, len(vocab), family="bm25")


def prune_top_s(entries: Sequence[tuple[int, float]], s: int) -> list[tuple[int, float]]:
    """Keep the s highest-weight entries (ties -> lower feature index); sorted by index."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if len(entries) <= s:
        return sorted(entries, key=lambda e: e[0])
    ranked = sorted(entries, key=lambda e: (-e[1], e[0]))[:s]
    ranked.sort(key=lambda e: e[0])
    return ranked


def load_sparse_vectors(
    vectors_path: str | Path,
    collection: LabeledCollection,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    top_s: int | None = None,
    l2_normalize: bool = False,
) -> SparseMatrix:
    """Load the learned-sparse interchange JSONL, prune each row to top-s.

    Every collection document must appear in the file; rows are aligned to
    collection order regardless of file order. ``top_s=None`` applies the
    10%-of-vocabulary default; ``l2_normalize`` rescales each row to unit L2
    norm after pruning (off by default, raw weights are the reference
    behavior).
    """
    s = default_top_s(vocab_size) if top_s is None else top_s
    if s < 1:
        raise ValueError("top_s must be >= 1")
    by_id: dict[str, list[tuple[int, float]]] = {}
    known = {d.doc_id for d in collection.documents}
    with open(vectors_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{vectors_path}: malformed JSON on line {lineno}: {exc}") from exc
            doc_id = str(obj.get("doc_id"))
            if doc_id not in known:
                raise CorpusFormatError(f"unknown doc_id {doc_id} (line {lineno})")
            if doc_id in by_id:
                raise CorpusFormatError(f"duplicate vector for doc_id {doc_id} (line {lineno})")
            vector = obj.get("vector")
            if not isinstance(vector, dict):
                raise CorpusFormatError(f"{vectors_path}: line {lineno}: missing vector map")
            entries: list[tuple[int, float]] = []
            for key, weight in vector.items():
                idx = int(key)
                w = float(weight)
                if idx < 0 or idx >= vocab_size:
                    raise CorpusFormatError(
                        f"{vectors_path}: line {lineno}: feature index {idx} out of range [0, {vocab_size})"
                    )
                if w < 0:
                    raise CorpusFormatError(f"{vectors_path}: line {lineno}: negative weight {w} for index {idx}")
                entries.append((idx, w))
            by_id[doc_id] = prune_top_s(entries, s)

    missing = [d.doc_id for d in collection.documents if d.doc_id not in by_id]
    if missing:
        raise CorpusFormatError(f"no vector for {missing[0]} ({len(missing)} document(s) missing)")

    rows = [by_id[d.doc_id] for d in collection.documents]
    matrix = _build_matrix(rows, collection.n_docs, vocab_size, family="splade")
    if l2_normalize:
        matrix = l2_normalize_rows(matrix)
    return matrix


def l2_normalize_rows(matrix: SparseMatrix) -> SparseMatrix:
    """Rescale every nonzero row to unit L2 norm."""
    csr = matrix.csr.copy().astype(np.float64)
    norms = np.sqrt(np.asarray(csr.multiply(csr).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    csr = sp.diags(scale) @ csr
    return SparseMatrix(csr=csr.tocsr().astype(np.float32), family=matrix.family)


def matrix_stats(matrix: SparseMatrix) -> tuple[float, float]:
    """(average nonzeros per row, density); errors on an empty matrix."""
    if matrix.n_rows == 0:
        raise ValueError("empty matrix")
    avg_nnz = float(matrix.csr.nnz) / matrix.n_rows
    density = float(matrix.csr.nnz) / (matrix.n_rows * matrix.n_cols) if matrix.n_cols else 0.0
    return avg_nnz, density


def save_matrix_cache(matrix: SparseMatrix, path: str | Path) -> None:
    """Binary cache: versioned header plus raw CSR arrays for fast reload."""
    family = matrix.family.encode("utf-8")
    csr = matrix.csr
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<IqqqH", _CACHE_VERSION, csr.shape[0], csr.shape[1], csr.nnz, len(family)))
        fh.write(family)
        fh.write(csr.indptr.astype(np.int64).tobytes())
        fh.write(csr.indices.astype(np.int32).tobytes())
        fh.write(csr.data.astype(np.float32).tobytes())


def load_matrix_cache(path: str | Path) -> SparseMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CACHE_MAGIC))
        if magic != _CACHE_MAGIC:
            raise CorpusFormatError(f"{path}: not a matrix cache file")
        version, n_rows, n_cols, nnz, fam_len = struct.unpack("<IqqqH", fh.read(struct.calcsize("<IqqqH")))
        if version != _CACHE_VERSION:
            raise CorpusFormatError(f"{path}: unsupported cache version {version}")
        family = fh.read(fam_len).decode("utf-8")
        indptr = np.frombuffer(fh.read(8 * (n_rows + 1)), dtype=np.int64)
        indices = np.frombuffer(fh.read(4 * nnz), dtype=np.int32)
        data = np.frombuffer(fh.read(4 * nnz), dtype=np.float32)
    csr = sp.csr_matrix((data.copy(), indices.copy(), indptr.copy()), shape=(n_rows, n_cols))
    return SparseMatrix(csr=csr, family=family)


def validate_vectors_file(
    vectors_path: str | Path,
    collection: LabeledCollection | None = None,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    nnz_cap: int | None = None,
) -> list[str]:
    """Check an interchange file without building a matrix; returns error strings.

    With a collection, also checks that every document is covered. ``nnz_cap``
    (default: the 10% top-s cap) flags rows that an encoder should already
    have pruned.
    """
    cap = default_top_s(vocab_size) if nnz_cap is None else nnz_cap
    errors: list[str] = []
    seen: set[str] = set()
    known = {d.doc_id for d in collection.documents} if collection is not None else None
    with open(vectors_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(f"line {lineno}: malformed JSON: {exc}")
                continue
            doc_id = obj.get("doc_id")
            if not isinstance(doc_id, str):
                errors.append(f"line {lineno}: missing doc_id")
                continue
            if doc_id in seen:
                errors.append(f"line {lineno}: duplicate doc_id {doc_id}")
            seen.add(doc_id)
            if known is not None and doc_id not in known:
                errors.append(f"line {lineno}: unknown doc_id {doc_id}")
            vector = obj.get("vector")
            if not isinstance(vector, dict):
                errors.append(f"line {lineno}: missing vector map")
                continue
            if len(vector) > cap:
                errors.append(f"line {lineno}: {len(vector)} entries exceeds top-s cap {cap}")
            for key, weight in vector.items():
                try:
                    idx = int(key)
                except (TypeError, ValueError):
                    errors.append(f"line {lineno}: non-integer feature index {key!r}")
                    continue
                if idx < 0 or idx >= vocab_size:
                    errors.append(f"line {lineno}: feature index {idx} out of range [0, {vocab_size})")
                if not isinstance(weight, (int, float)) or weight < 0:
                    errors.append(f"line {lineno}: bad weight {weight!r} for index {idx}")
    if known is not None:
        for doc_id in sorted(known - seen):
            errors.append(f"no vector for {doc_id}")
    return errors
