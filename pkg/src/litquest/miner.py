"""Mining quotation/analysis windows out of scholarly page text.

The pipeline per document: clean OCR artifacts, segment into sentences,
fuzzy-match each sentence against the book, merge consecutive matches into
block quotes, extend blocks across ellipses via longest-common-substring,
then (after per-source filtering) emit dataset examples with up to four
context sentences per side.

Similarity is pinned to normalized indel similarity over preprocessed
strings (lowercase, non-alphanumeric replaced by spaces, runs collapsed):

    score = 100 * (1 - indel_distance / (len_a + len_b))
          = 200 * lcs_subsequence / (len_a + len_b)

so an independent implementation can reproduce scores exactly. A conformance
fixture of 50 scored pairs lives in tests/fixtures/.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import (
    MAX_CONTEXT,
    MAX_QUOTE_LEN,
    Example,
    PrimarySource,
    SegmentConfig,
    DEFAULT_SEGMENT_CONFIG,
    segment_sentences,
)
from .kernels import common_substring_len, lcs_subsequence_len

DEFAULT_THRESHOLD = 80.0
DEFAULT_MIN_PRIMARY_TOKENS = 10
DEFAULT_LCS_MIN_CHARS = 15


# ---------------------------------------------------------------------------
# Page-text cleaning


@dataclass(frozen=True)
class CleanConfig:
    """Patterns for OCR artifact removal; all fields are overridable.

    citation_patterns: regexes deleted from the running text (page cites).
    header_digit_required / header_proper_ratio: a line is treated as a
    header/footer when it contains a page-number-like token and at least
    this fraction of its tokens look like digits or proper-noun parts.
    """

    citation_patterns: tuple[str, ...] = (
        r"\s*\(\s*pp?\.\s*\d+(?:\s*[-–—]\s*\d+)?\s*\)",
    )
    join_hyphen_breaks: bool = True
    drop_header_lines: bool = True
    header_proper_ratio: float = 0.8
    header_max_tokens: int = 10


DEFAULT_CLEAN_CONFIG = CleanConfig()

_PAGE_NUMBER_LINE = re.compile(r"^[\s\-–—]*\d+[\s\-–—]*$")
_HYPHEN_BREAK = re.compile(r"(\w)-[ \t]*\n[ \t]*([a-z])|(\w)- +([a-z])")


def _looks_proper(token: str) -> bool:
    bare = token.strip(".,;:()[]")
    if not bare:
        return False
    if bare.isdigit():
        return True
    return bare[0].isupper()


def _is_header_footer(line: str, config: CleanConfig) -> bool:
    tokens = line.split()
    if not tokens or len(tokens) > config.header_max_tokens:
        return False
    if not any(tok.strip(".,;:()[]").isdigit() for tok in tokens):
        return False
    proper = sum(1 for tok in tokens if _looks_proper(tok))
    return proper / len(tokens) >= config.header_proper_ratio


def clean_page_text(raw: str, config: CleanConfig = DEFAULT_CLEAN_CONFIG) -> str:
    """Strip page citations, headers/footers, page numbers and word breaks."""
    lines = raw.split("\n")
    kept = []
    for line in lines:
        stripped = line.strip()
        if _PAGE_NUMBER_LINE.match(stripped):
            continue
        if config.drop_header_lines and _is_header_footer(stripped, config):
            continue
        kept.append(line)
    text = "\n".join(kept)
    if config.join_hyphen_breaks:
        text = _HYPHEN_BREAK.sub(lambda m: (m.group(1) or m.group(3)) + (m.group(2) or m.group(4)), text)
    for pattern in config.citation_patterns:
        text = re.sub(pattern, "", text)
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# Fuzzy matching


def process_for_match(text: str) -> str:
    """Lowercase, replace non-alphanumerics with spaces, collapse runs."""
    lowered = text.lower()
    chars = [ch if ch.isalnum() else " " for ch in lowered]
    return " ".join("".join(chars).split())


def similarity_ratio(a: str, b: str) -> float:
    """Normalized indel similarity of the processed strings, in [0, 100]."""
    pa = process_for_match(a)
    pb = process_for_match(b)
    if not pa or not pb:
        return 0.0
    common = lcs_subsequence_len(pa, pb)
    return 200.0 * common / (len(pa) + len(pb))


@dataclass(frozen=True)
class Match:
    """One secondary sentence matched to its best primary sentence."""

    secondary_index: int
    primary_index: int
    score: float


class PreparedPrimary:
    """Preprocessed view of a book for repeated fuzzy lookups.

    Holds processed sentence strings, their lengths, whitespace token counts
    of the raw sentences, and per-sentence character histograms used for an
    exact upper bound on the match score (cheap prefilter).
    """

    def __init__(self, book: PrimarySource):
        self.book = book
        self.processed = [process_for_match(s) for s in book.sentences]
        self.lengths = np.array([len(p) for p in self.processed], dtype=np.int64)
        self.token_counts = np.array([len(s.split()) for s in book.sentences], dtype=np.int64)
        charset = sorted(set("".join(self.processed)))
        self.char_to_col = {ch: i for i, ch in enumerate(charset)}
        counts = np.zeros((len(self.processed), max(len(charset), 1)), dtype=np.int32)
        for row, p in enumerate(self.processed):
            for ch in p:
                counts[row, self.char_to_col[ch]] += 1
        self.char_counts = counts

    def histogram(self, processed: str) -> np.ndarray:
        vec = np.zeros(self.char_counts.shape[1], dtype=np.int32)
        get = self.char_to_col.get
        for ch in processed:
            col = get(ch)
            if col is not None:
                vec[col] += 1
        return vec


def find_quoted_sentences(
    secondary: list[str],
    primary: PrimarySource,
    threshold: float = DEFAULT_THRESHOLD,
    min_primary_tokens: int = DEFAULT_MIN_PRIMARY_TOKENS,
    prepared: PreparedPrimary | None = None,
) -> list[Match]:
    """Best-scoring primary sentence for each secondary sentence, if any.

    Only primary sentences of at least min_primary_tokens whitespace tokens
    are eligible, and a match requires score >= threshold. Ties go to the
    lower primary index. Two exact prefilters keep the quadratic alignment
    off nearly all pairs: a length-ratio bound (the score of strings whose
    processed lengths differ too much cannot reach the threshold, since the
    common subsequence is at most the shorter length) and a character
    histogram bound (the common subsequence is at most the histogram
    intersection). Neither changes results, only speed.
    """
    if prepared is None:
        prepared = PreparedPrimary(primary)
    elif prepared.book is not primary and prepared.book != primary:
        raise ValueError("prepared primary does not correspond to the given book")

    eligible = (prepared.token_counts >= min_primary_tokens) & (prepared.lengths > 0)
    lengths = prepared.lengths
    eps = 1e-9
    matches: list[Match] = []
    for sec_idx, sentence in enumerate(secondary):
        ps = process_for_match(sentence)
        la = len(ps)
        if la == 0:
            continue
        denom = la + lengths
        with np.errstate(divide="ignore", invalid="ignore"):
            length_bound = 200.0 * np.minimum(la, lengths) / denom
        mask = eligible & (length_bound >= threshold - eps)
        if not mask.any():
            continue
        hist = prepared.histogram(ps)
        inter = np.minimum(prepared.char_counts, hist).sum(axis=1)
        hist_bound = 200.0 * inter / denom
        mask &= hist_bound >= threshold - eps
        best_score = -1.0
        best_idx = -1
        for pri_idx in np.nonzero(mask)[0]:
            pp = prepared.processed[pri_idx]
            score = 200.0 * lcs_subsequence_len(ps, pp) / (la + len(pp))
            if score > best_score:
                best_score = score
                best_idx = int(pri_idx)
        if best_idx >= 0 and best_score >= threshold:
            matches.append(Match(secondary_index=sec_idx, primary_index=best_idx, score=best_score))
    return matches


# ---------------------------------------------------------------------------
# Block quotes


@dataclass(frozen=True)
class BlockQuote:
    """A run of consecutively quoted sentences, aligned to the book."""

    secondary_start: int
    primary_start: int
    length: int
    extended_by_lcs: bool = False

    @property
    def secondary_span(self) -> range:
        return range(self.secondary_start, self.secondary_start + self.length)

    @property
    def primary_span(self) -> range:
        return range(self.primary_start, self.primary_start + self.length)


def merge_block_quotes(matches: list[Match]) -> list[BlockQuote]:
    """Merge maximal runs where both indices advance by one per step."""
    for prev, cur in zip(matches, matches[1:]):
        if cur.secondary_index <= prev.secondary_index:
            raise ValueError("matches must be sorted by ascending secondary_index")
    blocks: list[BlockQuote] = []
    i = 0
    while i < len(matches):
        start = matches[i]
        length = 1
        while (
            i + length < len(matches)
            and matches[i + length].secondary_index == start.secondary_index + length
            and matches[i + length].primary_index == start.primary_index + length
        ):
            length += 1
        blocks.append(
            BlockQuote(
                secondary_start=start.secondary_index,
                primary_start=start.primary_index,
                length=length,
            )
        )
        i += length
    return blocks


def lcs_extend(
    block: BlockQuote,
    secondary: list[str],
    primary: PrimarySource,
    min_chars: int = DEFAULT_LCS_MIN_CHARS,
    prepared: PreparedPrimary | None = None,
    _processed_secondary: dict[int, str] | None = None,
) -> BlockQuote:
    """Grow a block across ellipses.

    While the secondary sentence adjacent to the block shares a common
    contiguous substring of min_chars or more (on processed strings) with
    the correspondingly adjacent primary sentence, the block absorbs both.
    Never crosses document or book boundaries; idempotent once it stops.
    """
    if prepared is None:
        prepared = PreparedPrimary(primary)
    cache = _processed_secondary if _processed_secondary is not None else {}

    def processed_sec(idx: int) -> str:
        if idx not in cache:
            cache[idx] = process_for_match(secondary[idx])
        return cache[idx]

    current = block
    while True:
        moved = False
        s = current.secondary_start - 1
        p = current.primary_start - 1
        if s >= 0 and p >= 0:
            if common_substring_len(processed_sec(s), prepared.processed[p]) >= min_chars:
                current = replace(
                    current,
                    secondary_start=s,
                    primary_start=p,
                    length=current.length + 1,
                    extended_by_lcs=True,
                )
                moved = True
        s = current.secondary_start + current.length
        p = current.primary_start + current.length
        if s < len(secondary) and p < len(primary):
            if common_substring_len(processed_sec(s), prepared.processed[p]) >= min_chars:
                current = replace(current, length=current.length + 1, extended_by_lcs=True)
                moved = True
        if not moved:
            return current


def _resolve_overlaps(blocks: list[BlockQuote]) -> list[BlockQuote]:
    """After extension, merge blocks whose secondary spans touch compatibly.

    Extension can run two blocks into each other when a source quotes one
    long passage interrupted by an ellipsis; if their alignments agree they
    are one block, otherwise the later one is trimmed to start after the
    earlier one ends.
    """
    if not blocks:
        return []
    blocks = sorted(blocks, key=lambda b: b.secondary_start)
    out = [blocks[0]]
    for blk in blocks[1:]:
        prev = out[-1]
        prev_end = prev.secondary_start + prev.length
        if blk.secondary_start >= prev_end:
            out.append(blk)
            continue
        same_alignment = (blk.primary_start - blk.secondary_start) == (
            prev.primary_start - prev.secondary_start
        )
        blk_end = blk.secondary_start + blk.length
        if same_alignment:
            merged_len = max(prev_end, blk_end) - prev.secondary_start
            out[-1] = replace(prev, length=merged_len,
                              extended_by_lcs=prev.extended_by_lcs or blk.extended_by_lcs)
        elif blk_end > prev_end:
            trim = prev_end - blk.secondary_start
            out[-1] = prev
            out.append(
                replace(
                    blk,
                    secondary_start=blk.secondary_start + trim,
                    primary_start=blk.primary_start + trim,
                    length=blk.length - trim,
                )
            )
    return out


# ---------------------------------------------------------------------------
# Source filtering and window emission


@dataclass(frozen=True)
class SourceFilterConfig:
    """Per-book bounds on match counts plus banned title substrings."""

    min_matches: int = 3
    max_matches: int = 200
    banned_title_words: tuple[str, ...] = ("dictionary", "anthology", "encyclopedia")

    def __post_init__(self):
        if self.min_matches > self.max_matches:
            raise ValueError("min_matches must be <= max_matches")


DEFAULT_SOURCE_FILTER = SourceFilterConfig()


def filter_secondary_sources(
    match_counts: dict[str, int],
    titles: dict[str, str],
    config: SourceFilterConfig = DEFAULT_SOURCE_FILTER,
) -> list[str]:
    """Source ids passing the count bounds and the banned-title check."""
    kept = []
    for source_id, count in match_counts.items():
        if not config.min_matches <= count <= config.max_matches:
            continue
        title = titles.get(source_id, "").lower()
        if any(word in title for word in config.banned_title_words):
            continue
        kept.append(source_id)
    return kept


def emit_windows(
    blocks: list[BlockQuote],
    secondary: list[str],
    book: PrimarySource,
    context: int = MAX_CONTEXT,
    source_id: str = "",
) -> list[Example]:
    """One Example per block, with context that never leaks quote text.

    Context stops at document edges and at sentences belonging to any other
    block. Blocks longer than the dataset's quote-length cap are dropped.
    """
    blocks = sorted(blocks, key=lambda b: b.secondary_start)
    occupied: set[int] = set()
    for blk in blocks:
        occupied.update(blk.secondary_span)
    examples: list[Example] = []
    for blk in blocks:
        if blk.length > MAX_QUOTE_LEN:
            continue
        left: list[str] = []
        idx = blk.secondary_start - 1
        while idx >= 0 and len(left) < context and idx not in occupied:
            left.append(secondary[idx])
            idx -= 1
        left.reverse()
        right: list[str] = []
        idx = blk.secondary_start + blk.length
        while idx < len(secondary) and len(right) < context and idx not in occupied:
            right.append(secondary[idx])
            idx += 1
        examples.append(
            Example(
                example_id=f"{book.book_id}:{source_id}:{blk.secondary_start}",
                book_id=book.book_id,
                left=tuple(left),
                right=tuple(right),
                quote_start=blk.primary_start,
                quote_len=blk.length,
                source_id=source_id,
            )
        )
    return examples


# ---------------------------------------------------------------------------
# Document and corpus orchestration


@dataclass
class MiningReportRow:
    source_id: str
    matches: int
    kept: bool
    reason: str = ""


@dataclass
class MinedDocument:
    source_id: str
    match_count: int
    blocks: list[BlockQuote] = field(default_factory=list)
    sentences: list[str] = field(default_factory=list)


def mine_document(
    raw_text: str,
    book: PrimarySource,
    source_id: str,
    threshold: float = DEFAULT_THRESHOLD,
    min_primary_tokens: int = DEFAULT_MIN_PRIMARY_TOKENS,
    lcs_min_chars: int = DEFAULT_LCS_MIN_CHARS,
    clean_config: CleanConfig = DEFAULT_CLEAN_CONFIG,
    segment_config: SegmentConfig = DEFAULT_SEGMENT_CONFIG,
    prepared: PreparedPrimary | None = None,
) -> MinedDocument:
    """Clean, segment, match, merge and extend one scholarly document."""
    if prepared is None:
        prepared = PreparedPrimary(book)
    cleaned = clean_page_text(raw_text, clean_config)
    sentences = segment_sentences(cleaned, segment_config)
    matches = find_quoted_sentences(
        sentences, book, threshold=threshold,
        min_primary_tokens=min_primary_tokens, prepared=prepared,
    )
    blocks = merge_block_quotes(matches)
    cache: dict[int, str] = {}
    extended = [
        lcs_extend(b, sentences, book, min_chars=lcs_min_chars,
                   prepared=prepared, _processed_secondary=cache)
        for b in blocks
    ]
    extended = _resolve_overlaps(extended)
    return MinedDocument(
        source_id=source_id,
        match_count=len(matches),
        blocks=extended,
        sentences=sentences,
    )


def mine_corpus(
    book: PrimarySource,
    documents: dict[str, str],
    titles: dict[str, str] | None = None,
    languages: dict[str, str] | None = None,
    filter_config: SourceFilterConfig = DEFAULT_SOURCE_FILTER,
    threshold: float = DEFAULT_THRESHOLD,
    min_primary_tokens: int = DEFAULT_MIN_PRIMARY_TOKENS,
    lcs_min_chars: int = DEFAULT_LCS_MIN_CHARS,
    context: int = MAX_CONTEXT,
    clean_config: CleanConfig = DEFAULT_CLEAN_CONFIG,
    segment_config: SegmentConfig = DEFAULT_SEGMENT_CONFIG,
) -> tuple[list[Example], list[MiningReportRow]]:
    """Mine every document against one book and apply source filtering.

    documents maps source_id to raw page text. languages is an optional
    per-document label hook; anything other than "en" is dropped (language
    identification itself is external). Documents are processed in sorted
    source_id order, so output is deterministic regardless of input order.
    """
    titles = titles or {}
    prepared = PreparedPrimary(book)
    mined: dict[str, MinedDocument] = {}
    report: list[MiningReportRow] = []
    non_english: set[str] = set()
    for source_id in sorted(documents):
        if languages is not None and languages.get(source_id, "en") != "en":
            non_english.add(source_id)
            report.append(MiningReportRow(source_id, 0, kept=False, reason="non-English"))
            continue
        mined[source_id] = mine_document(
            documents[source_id], book, source_id,
            threshold=threshold, min_primary_tokens=min_primary_tokens,
            lcs_min_chars=lcs_min_chars, clean_config=clean_config,
            segment_config=segment_config, prepared=prepared,
        )

    counts = {sid: doc.match_count for sid, doc in mined.items()}
    kept_ids = set(filter_secondary_sources(counts, titles, filter_config))
    examples: list[Example] = []
    for source_id in sorted(mined):
        doc = mined[source_id]
        if source_id in kept_ids:
            examples.extend(
                emit_windows(doc.blocks, doc.sentences, book, context=context, source_id=source_id)
            )
            report.append(MiningReportRow(source_id, doc.match_count, kept=True))
        else:
            if not filter_config.min_matches <= doc.match_count <= filter_config.max_matches:
                reason = "match count outside bounds"
            else:
                reason = "banned title word"
            report.append(MiningReportRow(source_id, doc.match_count, kept=False, reason=reason))
    report.sort(key=lambda row: row.source_id)
    return examples, report
