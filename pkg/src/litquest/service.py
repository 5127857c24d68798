"""HTTP JSON service over a read-only artifact directory.

Endpoints: GET /books, POST /query, GET /health. Prompt mode appends the
mask token to the free-form prompt (left-context-only querying); explicit
mode takes left/right sentence lists and builds the same masked context
string the evaluation harness uses, so rankings agree exactly.
"""

from __future__ import annotations

import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field, model_validator

from .corpus import DEFAULT_MASK, Example, make_context_string
from .store import ArtifactStore, Bm25Retriever, DenseRetriever, MissingArtifact, UnknownBook

MAX_K = 100


class QueryRequest(BaseModel):
    book_id: str
    prompt: str | None = None
    left: list[str] | None = None
    right: list[str] | None = None
    n: int = Field(default=1, ge=1, le=5)
    k: int = Field(default=10, ge=1, le=MAX_K)
    retriever: str = Field(default="bm25", pattern="^(bm25|dense)$")

    @model_validator(mode="after")
    def _one_query_mode(self):
        has_prompt = self.prompt is not None and self.prompt.strip() != ""
        has_context = bool(self.left) or bool(self.right)
        if has_prompt and has_context:
            raise ValueError("give either prompt or left/right context, not both")
        if not has_prompt and not has_context:
            raise ValueError("prompt or left/right context required")
        if self.left and len(self.left) > 4:
            raise ValueError("at most 4 left context sentences")
        if self.right and len(self.right) > 4:
            raise ValueError("at most 4 right context sentences")
        return self


class QueryResult(BaseModel):
    rank: int
    score: float
    start: int
    text: str
    context_before: list[str]
    context_after: list[str]


class QueryResponse(BaseModel):
    book_id: str
    n: int
    retriever: str
    query: str
    results: list[QueryResult]
    num_candidates: int
    capped: bool
    timing_ms: float


class BookInfo(BaseModel):
    book_id: str
    title: str
    sentence_count: int
    available_n: list[int]


def _build_query_text(req: QueryRequest) -> str:
    if req.prompt is not None and req.prompt.strip():
        return f"{req.prompt.strip()} {DEFAULT_MASK}"
    probe = Example(
        example_id="query",
        book_id=req.book_id,
        left=tuple(req.left or ()),
        right=tuple(req.right or ()),
        quote_start=0,
        quote_len=req.n,
        source_id="api",
    )
    return make_context_string(probe, 4, 4).text


def create_app(store: ArtifactStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="litquest", version="0.1.0")
    retrievers = {"bm25": Bm25Retriever(store), "dense": DenseRetriever(store)}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/books", response_model=list[BookInfo])
    def books() -> list[BookInfo]:
        out = []
        for book_id in store.list_book_ids():
            book = store.load_book(book_id)
            out.append(
                BookInfo(
                    book_id=book_id,
                    title=book.title,
                    sentence_count=len(book),
                    available_n=store.available_n(book_id),
                )
            )
        return out

    @app.post("/query", response_model=QueryResponse)
    def query(req: QueryRequest) -> QueryResponse:
        started = time.perf_counter()
        try:
            book = store.load_book(req.book_id)
        except UnknownBook as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        query_text = _build_query_text(req)
        try:
            ranking = retrievers[req.retriever].rank(req.book_id, req.n, query_text)
        except MissingArtifact as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        count = len(ranking)
        k = min(req.k, count)
        results = []
        for i in range(k):
            start = int(ranking.starts[i])
            end = start + req.n
            results.append(
                QueryResult(
                    rank=i + 1,
                    score=float(ranking.scores[i]),
                    start=start,
                    text=" ".join(book.sentences[start:end]),
                    context_before=list(book.sentences[max(start - 2, 0) : start]),
                    context_after=list(book.sentences[end : end + 2]),
                )
            )
        return QueryResponse(
            book_id=req.book_id,
            n=req.n,
            retriever=req.retriever,
            query=query_text,
            results=results,
            num_candidates=count,
            capped=req.k > count,
            timing_ms=(time.perf_counter() - started) * 1000.0,
        )

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
