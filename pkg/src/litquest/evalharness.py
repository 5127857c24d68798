"""Evaluation protocol: recall@k, mean rank, the 3-option proxy task,
proxy accuracy, and Fleiss kappa over rater counts.

Gold identity is the candidate start index. A candidate overlapping the
gold span by all but one sentence is still wrong; recall@1 is strict by
design.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .corpus import Example, PrimarySource, make_context_string
from .index import RankedList

DEFAULT_KS = (1, 3, 5, 10, 50, 100)
RETRIEVERS = ("bm25", "dense", "random")


class Retriever(Protocol):
    """Ranks the full candidate set C_{b,n} for a query string."""

    def rank(self, book_id: str, n: int, query: str, query_id: str = "") -> RankedList: ...

    def has_artifacts(self, book_id: str, n: int) -> bool: ...


# ---------------------------------------------------------------------------
# Metrics


def rank_of_gold(ranking: RankedList, gold_start: int) -> int:
    """1-based position of the gold start index in the ranking."""
    hits = np.nonzero(ranking.starts == gold_start)[0]
    if hits.size == 0:
        raise ValueError(f"gold candidate start {gold_start} absent from ranking")
    return int(hits[0]) + 1


def recall_at_k(gold_ranks: list[int], k: int) -> float:
    """Percentage of gold ranks at or above k, on the 0..100 scale."""
    if not gold_ranks:
        raise ValueError("no gold ranks given")
    if k < 1:
        raise ValueError("k must be positive")
    hits = sum(1 for r in gold_ranks if r <= k)
    return 100.0 * hits / len(gold_ranks)


def mean_rank(gold_ranks: list[int]) -> float:
    if not gold_ranks:
        raise ValueError("no gold ranks given")
    return float(sum(gold_ranks)) / len(gold_ranks)


# ---------------------------------------------------------------------------
# Split evaluation


@dataclass(frozen=True)
class EvalConfig:
    l_max: int = 4
    r_max: int = 4
    ks: tuple[int, ...] = DEFAULT_KS
    retriever: str = "bm25"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.l_max <= 4 or not 0 <= self.r_max <= 4:
            raise ValueError("l_max and r_max must be in 0..4")
        if self.l_max + self.r_max < 1:
            raise ValueError("l_max + r_max must be at least 1")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValueError("ks must be positive")
        if tuple(sorted(self.ks)) != tuple(self.ks):
            raise ValueError("ks must be ascending")
        if self.retriever not in RETRIEVERS:
            raise ValueError(f"retriever must be one of {RETRIEVERS}")


@dataclass
class EvalResult:
    recalls: dict[int, float]
    mean_rank: float
    num_examples: int
    avg_candidates: float
    per_example: list[dict] = field(default_factory=list)
    skipped: int = 0

    def as_dict(self) -> dict:
        return {
            "recalls": {str(k): v for k, v in self.recalls.items()},
            "mean_rank": self.mean_rank,
            "num_examples": self.num_examples,
            "avg_candidates": self.avg_candidates,
            "skipped": self.skipped,
            "per_example": self.per_example,
        }


def evaluate(examples: list[Example], retriever: Retriever, config: EvalConfig) -> EvalResult:
    """Rank the full candidate set for every example and aggregate.

    Artifact availability is checked up front so a long run cannot die
    midway; examples whose context is empty at (l_max, r_max) are skipped
    and counted. Deterministic given the retriever; example order does not
    matter because aggregation is order-free and any randomized retriever
    must key its randomness on the example, not the call sequence.
    """
    if not examples:
        raise ValueError("no examples to evaluate")
    needed = sorted({(ex.book_id, ex.quote_len) for ex in examples})
    gaps = [(b, n) for b, n in needed if not retriever.has_artifacts(b, n)]
    if gaps:
        listing = ", ".join(f"({b}, n={n})" for b, n in gaps)
        raise ValueError(f"missing retriever artifacts for: {listing}")
    ranks: list[int] = []
    per_example: list[dict] = []
    candidate_counts: list[int] = []
    skipped = 0
    for ex in examples:
        try:
            query = make_context_string(ex, config.l_max, config.r_max)
        except ValueError:
            skipped += 1
            continue
        ranking = retriever.rank(ex.book_id, ex.quote_len, query.text, query_id=ex.example_id)
        rank = rank_of_gold(ranking, ex.quote_start)
        ranks.append(rank)
        candidate_counts.append(len(ranking))
        per_example.append(
            {"example_id": ex.example_id, "gold_rank": rank, "num_candidates": len(ranking)}
        )
    if not ranks:
        raise ValueError("every example was skipped (no usable context)")
    return EvalResult(
        recalls={k: recall_at_k(ranks, k) for k in config.ks},
        mean_rank=mean_rank(ranks),
        num_examples=len(ranks),
        avg_candidates=float(np.mean(candidate_counts)),
        per_example=per_example,
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Proxy task


@dataclass(frozen=True)
class ProxyTrial:
    example_id: str
    options: tuple[str, str, str]
    gold_position: int
    seed: int

    def __post_init__(self):
        if len(set(self.options)) != 3:
            raise ValueError("options must be pairwise distinct")
        if not 0 <= self.gold_position <= 2:
            raise ValueError("gold_position must be 0..2")


def _trial_seed(master_seed: int, example_id: str) -> int:
    import hashlib

    digest = hashlib.blake2b(
        example_id.encode("utf-8"), digest_size=8, key=str(master_seed).encode("utf-8")
    ).digest()
    return int.from_bytes(digest, "little")


def build_proxy_task(
    examples: list[Example],
    retriever: Retriever,
    books: dict[str, PrimarySource],
    seed: int = 0,
    l: int = 4,
    r: int = 4,
) -> list[ProxyTrial]:
    """Gold plus the retriever's top two non-gold candidates, shuffled.

    Single-sentence examples only. Distractors are taken in rank order,
    skipping the gold start and any text duplicating an already chosen
    option; examples that cannot yield three distinct options are skipped
    with a warning. Shuffle order is keyed on (seed, example_id) so the
    trial list does not depend on example order.
    """
    trials: list[ProxyTrial] = []
    for ex in examples:
        if ex.quote_len != 1:
            raise ValueError(f"example {ex.example_id}: proxy task requires quote_len = 1")
        book = books.get(ex.book_id)
        if book is None:
            raise ValueError(f"example {ex.example_id}: unknown book {ex.book_id!r}")
        try:
            query = make_context_string(ex, l, r)
        except ValueError:
            warnings.warn(f"proxy: skipping {ex.example_id} (no usable context)")
            continue
        ranking = retriever.rank(ex.book_id, 1, query.text, query_id=ex.example_id)
        gold_text = book.sentences[ex.quote_start]
        options = [gold_text]
        for start in ranking.starts:
            if len(options) == 3:
                break
            if int(start) == ex.quote_start:
                continue
            text = book.sentences[int(start)]
            if text in options:
                continue
            options.append(text)
        if len(options) < 3:
            warnings.warn(f"proxy: skipping {ex.example_id} (fewer than 3 distinct options)")
            continue
        trial_seed = _trial_seed(seed, ex.example_id)
        perm = np.random.default_rng(trial_seed).permutation(3)
        shuffled = tuple(options[i] for i in perm)
        gold_position = int(np.nonzero(perm == 0)[0][0])
        trials.append(
            ProxyTrial(
                example_id=ex.example_id,
                options=shuffled,  # type: ignore[arg-type]
                gold_position=gold_position,
                seed=trial_seed,
            )
        )
    return trials


def proxy_accuracy(trials: list[ProxyTrial], chooser: Callable[[ProxyTrial], int]) -> float:
    """Percentage of trials where chooser picks the gold option."""
    if not trials:
        raise ValueError("no trials to score")
    correct = sum(1 for t in trials if chooser(t) == t.gold_position)
    return 100.0 * correct / len(trials)


# ---------------------------------------------------------------------------
# Inter-rater agreement


def fleiss_kappa(counts, raters_per_item: int | None = None) -> float:
    """Fleiss kappa over an items x categories matrix of rater counts."""
    m = np.asarray(counts, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least 2 items")
    row_sums = m.sum(axis=1)
    r = float(row_sums[0]) if raters_per_item is None else float(raters_per_item)
    if r < 2:
        raise ValueError("need at least 2 raters per item")
    if not np.all(row_sums == r):
        raise ValueError("every row must sum to the number of raters")
    n_items = m.shape[0]
    p_item = ((m * m).sum(axis=1) - r) / (r * (r - 1))
    p_bar = float(p_item.mean())
    p_cat = m.sum(axis=0) / (n_items * r)
    p_e = float((p_cat * p_cat).sum())
    if abs(1.0 - p_e) < 1e-12:
        raise ValueError("degenerate: no chance disagreement (every rating in one category)")
    return (p_bar - p_e) / (1.0 - p_e)
