"""Synthetic corpora for end-to-end testing.

Two generators:

make_topic_dataset builds books whose sentences come in same-topic runs, so
a context window shares planted vocabulary with its gold quote. A working
encoder must beat the random baseline on it by a wide margin.

make_planted_corpus builds a book plus scholarly documents with known
quotation plantings: noised single quotes, multi-sentence block quotes, and
ellipsis-truncated sentences recoverable only through common-substring
extension. The returned expectations let a test check recovery rates and
assert zero false merges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset, Example, PrimarySource

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


# ---------------------------------------------------------------------------
# Topic dataset


def _topic_vocab(num_topics: int, words_per_topic: int) -> list[list[str]]:
    return [
        [f"topic{t:02d}word{w:02d}" for w in range(words_per_topic)]
        for t in range(num_topics)
    ]


def make_topic_dataset(
    num_books: int = 20,
    sentences_per_book: int = 500,
    examples_per_book: int = 40,
    num_topics: int = 40,
    run_length: int = 10,
    seed: int = 0,
) -> Dataset:
    """Book-disjoint splits (70/15/15) of single-sentence quote examples.

    Each book is a sequence of same-topic runs; every sentence carries a
    unique token so candidates are pairwise distinct. Example contexts are
    the four neighboring sentences per side, which mostly share the gold
    sentence's topic.
    """
    if num_books < 3:
        raise ValueError("need at least 3 books for three disjoint splits")
    rng = np.random.default_rng(seed)
    vocab = _topic_vocab(num_topics, 10)
    books: dict[str, PrimarySource] = {}
    examples_by_book: dict[str, list[Example]] = {}
    for b in range(num_books):
        book_id = f"syn{b:02d}"
        sentences = []
        topic = int(rng.integers(num_topics))
        for i in range(sentences_per_book):
            if i % run_length == 0:
                topic = int(rng.integers(num_topics))
            words = [vocab[topic][int(rng.integers(10))] for _ in range(7)]
            words.append(f"uniq{b:02d}x{i:04d}")
            sentences.append(" ".join(words) + ".")
        book = PrimarySource(book_id=book_id, title=f"Synthetic {b}", sentences=tuple(sentences))
        books[book_id] = book
        positions = rng.choice(
            np.arange(4, sentences_per_book - 4), size=examples_per_book, replace=False
        )
        examples_by_book[book_id] = [
            Example(
                example_id=f"{book_id}:e{int(i):04d}",
                book_id=book_id,
                left=tuple(book.sentences[i - 4 : i]),
                right=tuple(book.sentences[i + 1 : i + 5]),
                quote_start=int(i),
                quote_len=1,
                source_id="synthetic",
            )
            for i in sorted(int(p) for p in positions)
        ]
    book_ids = sorted(books)
    # keep the splits book-disjoint and non-empty even for tiny corpora
    n_train = min(max(1, int(round(num_books * 0.7))), num_books - 2)
    n_val = min(max(1, int(round(num_books * 0.15))), num_books - n_train - 1)
    train_ids = book_ids[:n_train]
    val_ids = book_ids[n_train : n_train + n_val]
    test_ids = book_ids[n_train + n_val :]
    splits = {
        "train": [e for bid in train_ids for e in examples_by_book[bid]],
        "validation": [e for bid in val_ids for e in examples_by_book[bid]],
        "test": [e for bid in test_ids for e in examples_by_book[bid]],
    }
    ds = Dataset(splits=splits, books=books)
    ds.validate()
    return ds


# ---------------------------------------------------------------------------
# Planted mining corpus


@dataclass
class PlantedSource:
    """Ground truth for one generated document."""

    sentences: list[str]
    # every quoted position: secondary index -> primary index
    alignments: dict[int, int] = field(default_factory=dict)
    # planted multi-sentence runs as (secondary_start, primary_start, length)
    blocks: list[tuple[int, int, int]] = field(default_factory=list)
    # truncated sentences recoverable only by substring extension
    ellipsis_pairs: list[tuple[int, int]] = field(default_factory=list)
    noised_quotes: int = 0


@dataclass
class PlantedCorpus:
    book: PrimarySource
    documents: dict[str, str]
    titles: dict[str, str]
    sources: dict[str, PlantedSource]

    @property
    def total_planted(self) -> int:
        return sum(len(s.alignments) for s in self.sources.values())


def _word(rng, vocab) -> str:
    return vocab[int(rng.integers(len(vocab)))]


def _sentence(rng, vocab, tag: str, min_words=12, max_words=16) -> str:
    k = int(rng.integers(min_words, max_words + 1))
    words = [_word(rng, vocab) for _ in range(k - 1)] + [tag]
    return " ".join(words) + "."


def _noise(text: str, rng, max_fraction: float) -> str:
    """Substitute up to max_fraction of inner letters; never punctuation."""
    chars = list(text)
    inner = [i for i, ch in enumerate(chars[:-1]) if ch.isalpha()]
    budget = int(len(chars) * max_fraction)
    n_edits = int(rng.integers(1, max(budget, 2)))
    for i in rng.choice(inner, size=min(n_edits, len(inner)), replace=False):
        chars[i] = _LETTERS[int(rng.integers(26))]
    return "".join(chars)


def make_planted_corpus(
    num_sources: int = 12,
    book_sentences: int = 400,
    singles_per_source: int = 24,
    blocks_per_source: int = 5,
    ellipsis_per_source: int = 2,
    noise_fraction: float = 0.4,
    max_char_noise: float = 0.08,
    seed: int = 0,
) -> PlantedCorpus:
    """Book + documents with exactly known quotation structure.

    Plantings are separated by at least one filler sentence so no two
    distinct plantings are adjacent in any document; any merged block the
    miner produces beyond the planted ones is a false merge. Ellipsis
    plantings keep roughly the first 60% of the words of the sentence
    adjacent to an anchor quote: similar enough for a 15-character common
    substring, too short for the fuzzy threshold.
    """
    rng = np.random.default_rng(seed)
    book_vocab = [
        "".join(_LETTERS[int(rng.integers(26))] for _ in range(int(rng.integers(4, 9))))
        for _ in range(300)
    ]
    filler_vocab = [f"commentary{i:03d}" for i in range(120)]
    book = PrimarySource(
        book_id="planted",
        title="Planted Book",
        sentences=tuple(
            _sentence(rng, book_vocab, f"bktag{i:04d}") for i in range(book_sentences)
        ),
    )
    documents: dict[str, str] = {}
    titles: dict[str, str] = {}
    sources: dict[str, PlantedSource] = {}
    for s in range(num_sources):
        source_id = f"paper{s:02d}"
        planted = PlantedSource(sentences=[])
        sent = planted.sentences

        def filler():
            sent.append(_sentence(rng, filler_vocab, f"fl{s:02d}x{len(sent):03d}", 6, 12))

        def plant_quote(pri_idx: int) -> None:
            text = book.sentences[pri_idx]
            if rng.random() < noise_fraction:
                text = _noise(text, rng, max_char_noise)
                planted.noised_quotes += 1
            planted.alignments[len(sent)] = pri_idx
            sent.append(text)

        filler()
        # non-overlapping primary positions, consumed left to right so block
        # runs never collide with single plantings; bound is the worst-case
        # cursor advance per planting kind
        needed = singles_per_source * 2 + blocks_per_source * 6 + ellipsis_per_source * 3 + 4
        if needed >= book_sentences:
            raise ValueError("book too short for the requested plantings")
        base = int(rng.integers(0, book_sentences - needed))
        cursor = base
        for _ in range(singles_per_source):
            plant_quote(cursor)
            cursor += int(rng.integers(1, 3))
            filler()
        for _ in range(blocks_per_source):
            length = int(rng.integers(2, 5))
            planted.blocks.append((len(sent), cursor, length))
            for j in range(length):
                plant_quote(cursor + j)
            cursor += length + 1
            filler()
        for _ in range(ellipsis_per_source):
            # anchor quote followed by a truncated copy of the next sentence
            plant_quote(cursor)
            nxt = book.sentences[cursor + 1]
            words = nxt.rstrip(".").split()
            keep = max(5, int(len(words) * 0.6))
            truncated = " ".join(words[:keep]) + "..."
            planted.ellipsis_pairs.append((len(sent), cursor + 1))
            planted.alignments[len(sent)] = cursor + 1
            sent.append(truncated)
            cursor += 3
            filler()
        documents[source_id] = " ".join(sent)
        titles[source_id] = f"A Study of the Planted Book, volume {s}"
        sources[source_id] = planted
    return PlantedCorpus(book=book, documents=documents, titles=titles, sources=sources)
