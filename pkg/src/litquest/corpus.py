"""Primary-source corpus handling.

Books are ordered lists of sentences produced by a deterministic rule-based
segmenter (terminal punctuation, ellipses, colons and semicolons all end a
sentence, with an abbreviation exception list). Candidate sets are all
contiguous n-sentence windows of a book. Examples pair a masked quotation
with up to four sentences of surrounding scholarly context per side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_MASK = "[MASK]"
SPLITS = ("train", "validation", "test")
MAX_CONTEXT = 4
MAX_QUOTE_LEN = 5

# Closing quotes/brackets that stay glued to the sentence on their left.
_CLOSERS = set("\"'”’)]»")
_TERMINALS = set(".!?…")

DEFAULT_ABBREVIATIONS = (
    "Mr.", "Mrs.", "Dr.", "St.", "Ms.", "Prof.", "vs.", "e.g.", "i.e.",
)


@dataclass(frozen=True)
class SegmentConfig:
    """Sentence segmentation knobs.

    abbreviations: tokens ending in '.' that never end a sentence; matched
    case-insensitively at a word boundary. Corpora with unusual honorifics
    can extend the list (it is config, not a constant).
    """

    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS

    def abbreviation_set(self) -> frozenset[str]:
        return frozenset(a.lower() for a in self.abbreviations)


DEFAULT_SEGMENT_CONFIG = SegmentConfig()


@dataclass(frozen=True)
class PrimarySource:
    """A book: an ordered, 0-indexed list of non-empty sentences."""

    book_id: str
    title: str
    sentences: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise ValueError(f"book {self.book_id!r} has no sentences")
        for i, s in enumerate(self.sentences):
            if not s.strip():
                raise ValueError(f"book {self.book_id!r}: sentence {i} is empty")

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class CandidateSet:
    """All contiguous n-sentence passages of one book.

    Candidate i covers sentences [i, i+n) joined by single spaces; starts are
    consecutive from 0, so only the texts are stored.
    """

    book_id: str
    n: int
    texts: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.texts)

    def candidates(self):
        """Iterate (start_index, text) pairs in order."""
        return enumerate(self.texts)


@dataclass(frozen=True)
class Example:
    """One dataset window: context sentences around a masked quotation.

    left is ordered farthest-to-nearest, right nearest-to-farthest (both are
    document order). quote_start/quote_len index into the book's sentences.
    """

    example_id: str
    book_id: str
    left: tuple[str, ...]
    right: tuple[str, ...]
    quote_start: int
    quote_len: int
    source_id: str

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        if len(self.left) > MAX_CONTEXT or len(self.right) > MAX_CONTEXT:
            raise ValueError(f"example {self.example_id}: context exceeds {MAX_CONTEXT} sentences per side")
        if not 1 <= self.quote_len <= MAX_QUOTE_LEN:
            raise ValueError(f"example {self.example_id}: quote_len {self.quote_len} outside [1, {MAX_QUOTE_LEN}]")
        if self.quote_start < 0:
            raise ValueError(f"example {self.example_id}: negative quote_start")

    def quote_text(self, book: PrimarySource) -> str:
        """The gold quotation joined from the book's sentences."""
        if self.quote_start + self.quote_len > len(book):
            raise ValueError(
                f"example {self.example_id}: quote [{self.quote_start}, "
                f"{self.quote_start + self.quote_len}) exceeds book of {len(book)} sentences"
            )
        return " ".join(book.sentences[self.quote_start:self.quote_start + self.quote_len])


@dataclass(frozen=True)
class ContextQuery:
    """A masked context string plus how many sentences each side supplied."""

    text: str
    l_used: int
    r_used: int


@dataclass
class Dataset:
    """Examples per split plus the books they quote.

    Books are kept split-disjoint so models never retrieve a quote they were
    trained on. The books map may be empty when only examples are needed.
    """

    splits: dict[str, list[Example]] = field(default_factory=lambda: {s: [] for s in SPLITS})
    books: dict[str, PrimarySource] = field(default_factory=dict)

    def validate(self) -> None:
        seen: dict[str, str] = {}
        for split, examples in self.splits.items():
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r}")
            for ex in examples:
                prior = seen.get(ex.book_id)
                if prior is not None and prior != split:
                    raise ValueError(
                        f"book {ex.book_id!r} appears in both {prior!r} and {split!r} splits"
                    )
                seen[ex.book_id] = split
                if self.books:
                    book = self.books.get(ex.book_id)
                    if book is None:
                        raise ValueError(f"example {ex.example_id}: unknown book {ex.book_id!r}")
                    if ex.quote_start + ex.quote_len > len(book):
                        raise ValueError(
                            f"example {ex.example_id}: quote exceeds book {ex.book_id!r} "
                            f"({len(book)} sentences)"
                        )


def _ends_with_abbreviation(text: str, dot_index: int, abbreviations: frozenset[str]) -> bool:
    for abbr in abbreviations:
        start = dot_index - len(abbr) + 1
        if start < 0:
            continue
        if text[start:dot_index + 1].lower() != abbr:
            continue
        if start == 0 or not text[start - 1].isalnum():
            return True
    return False


def segment_sentences(text: str, config: SegmentConfig = DEFAULT_SEGMENT_CONFIG) -> list[str]:
    """Split text into sentences.

    Boundaries fall after terminal punctuation (. ! ?), after ellipses
    (three or more dots, or the single ellipsis character), and after colons
    and semicolons. Closing quotes/brackets adjacent to a boundary stay with
    the left segment. A single period is suppressed inside decimals/acronyms
    (next character alphanumeric) and after known abbreviations. Ellipses
    split even without trailing whitespace, since quotations are often
    spliced with them mid-token. Segments are trimmed, inner whitespace runs
    collapsed, and empties dropped.
    """
    if not text:
        return []
    abbreviations = config.abbreviation_set()
    n = len(text)
    cuts: list[int] = []
    i = 0
    while i < n:
        ch = text[i]
        if ch in _TERMINALS:
            j = i
            while j + 1 < n and text[j + 1] in _TERMINALS:
                j += 1
            run = text[i:j + 1]
            is_ellipsis = "…" in run or run.count(".") >= 3
            k = j
            while k + 1 < n and text[k + 1] in _CLOSERS:
                k += 1
            nxt = text[k + 1] if k + 1 < n else ""
            if is_ellipsis:
                cuts.append(k + 1)
            elif nxt == "" or nxt.isspace():
                if len(run) == 1 and ch == "." and _ends_with_abbreviation(text, i, abbreviations):
                    pass
                else:
                    cuts.append(k + 1)
            i = k + 1
        elif ch in ":;":
            k = i
            while k + 1 < n and text[k + 1] in _CLOSERS:
                k += 1
            nxt = text[k + 1] if k + 1 < n else ""
            if nxt == "" or nxt.isspace():
                cuts.append(k + 1)
            i = k + 1
        else:
            i += 1

    segments = []
    prev = 0
    for cut in cuts + [n]:
        seg = " ".join(text[prev:cut].split())
        if seg:
            segments.append(seg)
        prev = cut
    return segments


def load_primary_source(path: str | Path, config: SegmentConfig = DEFAULT_SEGMENT_CONFIG,
                        title: str | None = None) -> PrimarySource:
    """Load and segment a UTF-8 plain-text book; the file stem is the book_id."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    sentences = segment_sentences(text, config)
    if not sentences:
        raise ValueError(f"{path}: no sentences after segmentation")
    return PrimarySource(book_id=path.stem, title=title or path.stem, sentences=tuple(sentences))


def build_candidate_set(book: PrimarySource, n: int) -> CandidateSet:
    """All S - n + 1 contiguous n-sentence windows of the book, in order.

    n larger than the book yields an empty candidate set rather than an
    error; callers treat that as "nothing to rank".
    """
    if n < 1:
        raise ValueError(f"candidate length must be >= 1, got {n}")
    sentences = book.sentences
    count = len(sentences) - n + 1
    if count <= 0:
        return CandidateSet(book_id=book.book_id, n=n, texts=())
    texts = tuple(" ".join(sentences[i:i + n]) for i in range(count))
    return CandidateSet(book_id=book.book_id, n=n, texts=texts)


def make_context_string(example: Example, l: int, r: int,
                        mask_token: str = DEFAULT_MASK) -> ContextQuery:
    """Build the masked query: nearest l left sentences + mask + nearest r right.

    Uses fewer sentences when the example has fewer available, recording the
    counts actually used. Requesting (and getting) no context at all is an
    error: a bare mask token is not a query.
    """
    if not 0 <= l <= MAX_CONTEXT or not 0 <= r <= MAX_CONTEXT:
        raise ValueError(f"context sizes must be in [0, {MAX_CONTEXT}], got l={l} r={r}")
    if l + r < 1:
        raise ValueError("empty context: l and r are both 0")
    left_used = list(example.left[-l:]) if l > 0 else []
    right_used = list(example.right[:r]) if r > 0 else []
    if not left_used and not right_used:
        raise ValueError(f"empty context: example {example.example_id} has no context sentences")
    text = " ".join(left_used + [mask_token] + right_used)
    if text.count(mask_token) != 1:
        raise ValueError(
            f"example {example.example_id}: context text already contains the mask token {mask_token!r}"
        )
    return ContextQuery(text=text, l_used=len(left_used), r_used=len(right_used))


_EXAMPLE_KEYS = {"example_id", "book_id", "left", "right", "quote_start", "quote_len",
                 "source_id", "split"}


def _example_from_record(rec: dict, line_no: int) -> tuple[Example, str]:
    keys = set(rec)
    if keys != _EXAMPLE_KEYS:
        missing = sorted(_EXAMPLE_KEYS - keys)
        extra = sorted(keys - _EXAMPLE_KEYS)
        raise ValueError(f"line {line_no}: bad keys (missing {missing}, unexpected {extra})")
    split = rec["split"]
    if split not in SPLITS:
        raise ValueError(f"line {line_no}: unknown split {split!r}")
    if not isinstance(rec["left"], list) or not isinstance(rec["right"], list):
        raise ValueError(f"line {line_no}: left/right must be arrays of strings")
    try:
        ex = Example(
            example_id=str(rec["example_id"]),
            book_id=str(rec["book_id"]),
            left=tuple(str(s) for s in rec["left"]),
            right=tuple(str(s) for s in rec["right"]),
            quote_start=int(rec["quote_start"]),
            quote_len=int(rec["quote_len"]),
            source_id=str(rec["source_id"]),
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"line {line_no}: {exc}") from exc
    return ex, split


def load_dataset(path: str | Path, books: dict[str, PrimarySource] | None = None) -> Dataset:
    """Load a JSON-lines dataset, validating record shape and split disjointness.

    When a books map is supplied, example book_ids and quote bounds are
    validated against it; the map is attached to the returned Dataset.
    """
    dataset = Dataset(books=dict(books) if books else {})
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise ValueError(f"line {line_no}: expected a JSON object")
            ex, split = _example_from_record(rec, line_no)
            dataset.splits[split].append(ex)
    dataset.validate()
    return dataset


def example_to_record(ex: Example, split: str) -> dict:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    return {
        "example_id": ex.example_id,
        "book_id": ex.book_id,
        "left": list(ex.left),
        "right": list(ex.right),
        "quote_start": ex.quote_start,
        "quote_len": ex.quote_len,
        "source_id": ex.source_id,
        "split": split,
    }


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset's examples as JSON lines (books are not serialized)."""
    dataset.validate()
    with open(path, "w", encoding="utf-8") as fh:
        for split in SPLITS:
            for ex in dataset.splits.get(split, []):
                fh.write(json.dumps(example_to_record(ex, split), ensure_ascii=False) + "\n")
