"""Artifact directory layout plus the retrievers bound to it.

    <root>/books/<book_id>.json      book text, one sentence per array entry
    <root>/index/<book_id>.n<n>.npz  BM25 statistics
    <root>/emb/<book_id>.n<n>.emb    candidate embeddings (RLEM format)
    <root>/params.rlde               trained encoder

Artifacts are written once and treated as immutable; loads are cached, so a
store instance must not outlive an external rewrite of its directory.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from scipy import sparse

from . import encoder as enc
from . import index as idx
from .corpus import PrimarySource, build_candidate_set
from .index import Bm25Index, RankedList


class UnknownBook(ValueError):
    def __init__(self, book_id: str):
        super().__init__(f"unknown book {book_id!r}")
        self.book_id = book_id


class MissingArtifact(ValueError):
    """An operation needs an artifact that was never built."""

    def __init__(self, message: str, hint: str):
        super().__init__(f"{message} ({hint})")
        self.hint = hint


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._books: dict[str, PrimarySource] = {}
        self._indexes: dict[tuple[str, int], Bm25Index] = {}
        self._embeddings: dict[tuple[str, int], idx.EmbeddingMatrix] = {}
        self._params: enc.EncoderParams | None = None

    # -- paths

    def book_path(self, book_id: str) -> Path:
        return self.root / "books" / f"{book_id}.json"

    def index_path(self, book_id: str, n: int) -> Path:
        return self.root / "index" / f"{book_id}.n{n}.npz"

    def emb_path(self, book_id: str, n: int) -> Path:
        return self.root / "emb" / f"{book_id}.n{n}.emb"

    @property
    def params_path(self) -> Path:
        return self.root / "params.rlde"

    # -- books

    def save_book(self, book: PrimarySource) -> Path:
        path = self.book_path(book.book_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"book_id": book.book_id, "title": book.title, "sentences": list(book.sentences)}
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=1) + "\n")
        self._books[book.book_id] = book
        return path

    def has_book(self, book_id: str) -> bool:
        return book_id in self._books or self.book_path(book_id).exists()

    def load_book(self, book_id: str) -> PrimarySource:
        if book_id not in self._books:
            path = self.book_path(book_id)
            if not path.exists():
                raise UnknownBook(book_id)
            data = json.loads(path.read_text())
            self._books[book_id] = PrimarySource(
                book_id=data["book_id"], title=data["title"], sentences=tuple(data["sentences"])
            )
        return self._books[book_id]

    def list_book_ids(self) -> list[str]:
        books_dir = self.root / "books"
        if not books_dir.is_dir():
            return []
        return sorted(p.stem for p in books_dir.glob("*.json"))

    def load_books(self) -> dict[str, PrimarySource]:
        return {book_id: self.load_book(book_id) for book_id in self.list_book_ids()}

    # -- BM25 indexes

    def build_index(self, book_id: str, n: int, k1: float = idx.DEFAULT_K1,
                    b: float = idx.DEFAULT_B) -> Bm25Index:
        book = self.load_book(book_id)
        candidates = build_candidate_set(book, n)
        built = idx.build_bm25_index(candidates, k1=k1, b=b)
        self.save_index(built)
        return built

    def save_index(self, index: Bm25Index) -> Path:
        path = self.index_path(index.book_id, index.n)
        path.parent.mkdir(parents=True, exist_ok=True)
        terms = np.array(sorted(index.vocab, key=index.vocab.get))
        np.savez(
            path,
            book_id=np.array(index.book_id),
            n=np.array(index.n),
            k1=np.array(index.k1),
            b=np.array(index.b),
            terms=terms,
            df=index.df,
            data=index.postings.data,
            indices=index.postings.indices,
            indptr=index.postings.indptr,
            shape=np.array(index.postings.shape),
            doc_len=index.doc_len,
            starts=index.starts,
            avgdl=np.array(index.avgdl),
        )
        self._indexes[(index.book_id, index.n)] = index
        return path

    def has_index(self, book_id: str, n: int) -> bool:
        return (book_id, n) in self._indexes or self.index_path(book_id, n).exists()

    def load_index(self, book_id: str, n: int) -> Bm25Index:
        key = (book_id, n)
        if key not in self._indexes:
            path = self.index_path(book_id, n)
            if not path.exists():
                raise MissingArtifact(
                    f"no BM25 index for book {book_id!r} with n={n}",
                    f"build it with: litquest index --book-id {book_id} --n {n}",
                )
            with np.load(path, allow_pickle=False) as data:
                postings = sparse.csc_matrix(
                    (data["data"], data["indices"], data["indptr"]), shape=tuple(data["shape"])
                )
                self._indexes[key] = Bm25Index(
                    book_id=str(data["book_id"]),
                    n=int(data["n"]),
                    k1=float(data["k1"]),
                    b=float(data["b"]),
                    vocab={t: i for i, t in enumerate(data["terms"].tolist())},
                    df=data["df"],
                    postings=postings,
                    doc_len=data["doc_len"],
                    starts=data["starts"],
                    avgdl=float(data["avgdl"]),
                )
        return self._indexes[key]

    # -- embeddings and params

    def save_embeddings(self, book_id: str, n: int, matrix: idx.EmbeddingMatrix) -> Path:
        path = self.emb_path(book_id, n)
        path.parent.mkdir(parents=True, exist_ok=True)
        idx.save_embeddings(matrix, path)
        self._embeddings[(book_id, n)] = matrix
        return path

    def has_embeddings(self, book_id: str, n: int) -> bool:
        return (book_id, n) in self._embeddings or self.emb_path(book_id, n).exists()

    def load_embeddings(self, book_id: str, n: int) -> idx.EmbeddingMatrix:
        key = (book_id, n)
        if key not in self._embeddings:
            path = self.emb_path(book_id, n)
            if not path.exists():
                raise MissingArtifact(
                    f"no embeddings for book {book_id!r} with n={n}",
                    f"export them with: litquest export-emb --book-id {book_id} --n {n}",
                )
            self._embeddings[key] = idx.load_embeddings(path)
        return self._embeddings[key]

    def save_params(self, params: enc.EncoderParams) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        enc.save_params(params, self.params_path)
        self._params = params
        return self.params_path

    def has_params(self) -> bool:
        return self._params is not None or self.params_path.exists()

    def set_params(self, params: enc.EncoderParams) -> None:
        """Use in-memory params without touching the artifact directory."""
        self._params = params

    def load_params(self) -> enc.EncoderParams:
        if self._params is None:
            if not self.params_path.exists():
                raise MissingArtifact(
                    "no trained encoder params in the artifact directory",
                    "train one with: litquest train --data <dataset.jsonl> --out params.rlde",
                )
            self._params = enc.load_params(self.params_path)
        return self._params

    def available_n(self, book_id: str, kind: str | None = None) -> list[int]:
        """n values with a usable artifact: 'bm25', 'dense', or both (None)."""
        found = set()
        for n in range(1, 6):
            has_bm25 = self.has_index(book_id, n)
            has_dense = self.has_embeddings(book_id, n)
            if kind == "bm25" and has_bm25:
                found.add(n)
            elif kind == "dense" and has_dense:
                found.add(n)
            elif kind is None and (has_bm25 or has_dense):
                found.add(n)
        return sorted(found)


# ---------------------------------------------------------------------------
# Retrievers


class Bm25Retriever:
    def __init__(self, store: ArtifactStore, drop_mask: bool = False):
        self.store = store
        self.drop_mask = drop_mask

    def has_artifacts(self, book_id: str, n: int) -> bool:
        return self.store.has_index(book_id, n)

    def rank(self, book_id: str, n: int, query: str, query_id: str = "") -> RankedList:
        if not self.store.has_book(book_id):
            raise UnknownBook(book_id)
        index = self.store.load_index(book_id, n)
        return idx.rank_bm25(index, query, query_id=query_id, drop_mask=self.drop_mask)


class DenseRetriever:
    def __init__(self, store: ArtifactStore):
        self.store = store

    def has_artifacts(self, book_id: str, n: int) -> bool:
        return self.store.has_embeddings(book_id, n) and self.store.has_params()

    def rank(self, book_id: str, n: int, query: str, query_id: str = "") -> RankedList:
        if not self.store.has_book(book_id):
            raise UnknownBook(book_id)
        params = self.store.load_params()
        matrix = self.store.load_embeddings(book_id, n)
        features = enc.featurize(query, params.featurizer)
        return idx.rank_dense(matrix, enc.encode_context(params, features), query_id=query_id)


class RandomRetriever:
    """Uniform random permutation of the candidate set.

    Randomness is keyed on (master seed, book, n, query) rather than call
    order, so evaluation results do not depend on example ordering.
    """

    def __init__(self, store: ArtifactStore, seed: int = 0):
        self.store = store
        self.seed = seed

    def has_artifacts(self, book_id: str, n: int) -> bool:
        return self.store.has_book(book_id)

    def rank(self, book_id: str, n: int, query: str, query_id: str = "") -> RankedList:
        book = self.store.load_book(book_id)
        count = max(len(book) - n + 1, 0)
        key = f"{self.seed}|{book_id}|{n}|{query}".encode("utf-8")
        digest = hashlib.blake2b(key, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return RankedList(
            query_id=query_id,
            starts=rng.permutation(count).astype(np.int64),
            scores=np.arange(count, 0, -1, dtype=np.float64),
        )
