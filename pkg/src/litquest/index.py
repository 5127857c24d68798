"""Sparse (Okapi BM25) and dense inner-product ranking over candidate sets.

Also defines the on-disk embedding matrix format used to plug externally
computed encoders into the same ranking path:

    little-endian: magic "RLEM", u32 version=1, u32 dim, u64 count,
    then count records of { u32 candidate_start, dim x f32 }.

BM25 uses the non-negative idf variant idf(t) = ln(1 + (N - df + 0.5) /
(df + 0.5)) so all scores are >= 0 and reproducible across implementations.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .corpus import DEFAULT_MASK, CandidateSet

DEFAULT_K1 = 0.5
DEFAULT_B = 0.9

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_EMB_MAGIC = b"RLEM"
_EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<4sIIQ")


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on any non-alphanumeric; no stemming."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class RankedList:
    """Full ranking of a candidate set: scores non-increasing, ties by start."""

    query_id: str
    starts: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.starts = np.asarray(self.starts, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.starts.shape != self.scores.shape:
            raise ValueError("starts and scores must be parallel arrays")

    def __len__(self) -> int:
        return int(self.starts.size)

    def entries(self) -> list[tuple[int, float]]:
        return [(int(s), float(v)) for s, v in zip(self.starts, self.scores)]


def _ranked(query_id: str, starts: np.ndarray, scores: np.ndarray) -> RankedList:
    # lexsort: primary key scores descending, secondary candidate_start ascending
    order = np.lexsort((starts, -scores))
    return RankedList(query_id=query_id, starts=starts[order], scores=scores[order])


# ---------------------------------------------------------------------------
# BM25


@dataclass
class Bm25Index:
    """Term statistics for one candidate set C_{b,n}."""

    book_id: str
    n: int
    k1: float
    b: float
    vocab: dict[str, int]
    df: np.ndarray
    postings: sparse.csc_matrix  # candidates x terms, raw counts
    doc_len: np.ndarray
    starts: np.ndarray
    avgdl: float

    @property
    def num_candidates(self) -> int:
        return int(self.starts.size)


def build_bm25_index(
    candidates: CandidateSet, k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> Bm25Index:
    """Tokenize every candidate and assemble the BM25 statistics."""
    if not candidates.texts:
        raise ValueError(f"empty candidate set for book {candidates.book_id!r}, n={candidates.n}")
    vocab: dict[str, int] = {}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[int] = []
    doc_len = np.zeros(len(candidates.texts), dtype=np.int64)
    for row, text in enumerate(candidates.texts):
        tokens = tokenize(text)
        doc_len[row] = len(tokens)
        counts: dict[int, int] = {}
        for tok in tokens:
            col = vocab.setdefault(tok, len(vocab))
            counts[col] = counts.get(col, 0) + 1
        for col, cnt in counts.items():
            rows.append(row)
            cols.append(col)
            vals.append(cnt)
    postings = sparse.coo_matrix(
        (vals, (rows, cols)), shape=(len(candidates.texts), max(len(vocab), 1)), dtype=np.float64
    ).tocsc()
    df = np.diff(postings.indptr).astype(np.int64)
    # punctuation-only corpora have avgdl 0; any positive value keeps the
    # normalization finite and every score is 0 regardless
    avgdl = float(doc_len.mean()) or 1.0
    return Bm25Index(
        book_id=candidates.book_id,
        n=candidates.n,
        k1=k1,
        b=b,
        vocab=vocab,
        df=df,
        postings=postings,
        doc_len=doc_len,
        starts=np.arange(len(candidates.texts), dtype=np.int64),
        avgdl=avgdl,
    )


def bm25_scores(
    index: Bm25Index,
    tokens: list[str],
    n_docs: int | None = None,
    avgdl: float | None = None,
) -> np.ndarray:
    """Okapi scores of every candidate for a tokenized query.

    Duplicate query tokens contribute once per occurrence. n_docs and avgdl
    default to the index's own statistics; overriding them supports
    frozen-statistics comparisons in tests.
    """
    n = index.num_candidates if n_docs is None else n_docs
    adl = index.avgdl if avgdl is None else avgdl
    norm = index.k1 * (1.0 - index.b + index.b * index.doc_len / adl)
    scores = np.zeros(index.num_candidates, dtype=np.float64)
    for tok in tokens:
        col = index.vocab.get(tok)
        if col is None:
            continue
        df = index.df[col]
        idf = np.log(1.0 + (n - df + 0.5) / (df + 0.5))
        lo, hi = index.postings.indptr[col], index.postings.indptr[col + 1]
        docs = index.postings.indices[lo:hi]
        freq = index.postings.data[lo:hi]
        scores[docs] += idf * freq * (index.k1 + 1.0) / (freq + norm[docs])
    return scores


def rank_bm25(
    index: Bm25Index,
    query: str,
    query_id: str = "",
    drop_mask: bool = False,
    mask_token: str = DEFAULT_MASK,
) -> RankedList:
    """Full BM25 ranking; unknown-term queries yield all-zero scores."""
    if drop_mask:
        query = query.replace(mask_token, " ")
    scores = bm25_scores(index, tokenize(query))
    return _ranked(query_id, index.starts, scores)


# ---------------------------------------------------------------------------
# Dense ranking and the embedding file format


@dataclass
class EmbeddingMatrix:
    """One vector per candidate start index, all of length dim."""

    dim: int
    ids: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.vectors.shape != (self.ids.size, self.dim):
            raise ValueError(
                f"vectors shape {self.vectors.shape} does not match "
                f"{self.ids.size} ids of dim {self.dim}"
            )
        if self.vectors.size and not np.isfinite(self.vectors).all():
            raise ValueError("embedding matrix contains non-finite values")

    def __len__(self) -> int:
        return int(self.ids.size)


def rank_dense(matrix: EmbeddingMatrix, query_vector, query_id: str = "") -> RankedList:
    """Exact inner-product ranking of every stored vector."""
    q = np.asarray(query_vector, dtype=np.float64).reshape(-1)
    if q.size != matrix.dim:
        raise ValueError(f"query vector has length {q.size}, expected {matrix.dim}")
    scores = matrix.vectors.astype(np.float64) @ q
    return _ranked(query_id, matrix.ids, scores)


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    path = Path(path)
    if matrix.ids.size and (matrix.ids.min() < 0 or matrix.ids.max() >= 2**32):
        raise ValueError("candidate start indices must fit in u32")
    record = np.dtype([("start", "<u4"), ("vec", "<f4", (matrix.dim,))])
    records = np.zeros(len(matrix), dtype=record)
    records["start"] = matrix.ids
    records["vec"] = matrix.vectors
    with open(path, "wb") as fh:
        fh.write(_EMB_HEADER.pack(_EMB_MAGIC, _EMB_VERSION, matrix.dim, len(matrix)))
        fh.write(records.tobytes())


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _EMB_HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, dim, count = _EMB_HEADER.unpack_from(blob)
    if magic != _EMB_MAGIC:
        raise ValueError(f"{path}: not an embedding file")
    if version != _EMB_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise ValueError(f"{path}: invalid dim {dim}")
    record = np.dtype([("start", "<u4"), ("vec", "<f4", (dim,))])
    body = blob[_EMB_HEADER.size :]
    expected = count * record.itemsize
    if len(body) < expected:
        raise ValueError(
            f"{path}: truncated: header promises {count} records, "
            f"found {len(body) // record.itemsize}"
        )
    if len(body) > expected:
        raise ValueError(f"{path}: {len(body) - expected} trailing bytes after {count} records")
    records = np.frombuffer(body, dtype=record, count=count)
    vectors = records["vec"].astype(np.float32)
    if vectors.size and not np.isfinite(vectors).all():
        raise ValueError(f"{path}: non-finite embedding values")
    return EmbeddingMatrix(dim=dim, ids=records["start"].astype(np.int64), vectors=vectors)
