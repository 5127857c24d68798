import json

import pytest

from litquest.corpus import (
    DEFAULT_MASK,
    CandidateSet,
    Dataset,
    Example,
    PrimarySource,
    SegmentConfig,
    build_candidate_set,
    load_dataset,
    load_primary_source,
    make_context_string,
    save_dataset,
    segment_sentences,
)


# ---------------------------------------------------------------------------
# Sentence segmentation


def test_splits_on_terminal_punctuation():
    assert segment_sentences("He left. She stayed.") == ["He left.", "She stayed."]


def test_splits_on_colon_semicolon_and_ellipsis():
    # boundary characters stay attached to the left segment
    text = "He said: run; then stopped... quietly."
    assert segment_sentences(text) == ["He said:", "run;", "then stopped...", "quietly."]


def test_abbreviations_do_not_split():
    assert segment_sentences("Mr. Darcy smiled.") == ["Mr. Darcy smiled."]
    assert segment_sentences("See Dr. Jones vs. Prof. Smith today.") == [
        "See Dr. Jones vs. Prof. Smith today."
    ]


def test_abbreviation_matching_is_case_insensitive():
    assert segment_sentences("MR. Darcy smiled.") == ["MR. Darcy smiled."]


def test_custom_abbreviation_list():
    config = SegmentConfig(abbreviations=("No.",))
    assert segment_sentences("No. 7 was empty. Mr. Hall left.", config) == [
        "No. 7 was empty.",
        "Mr.",
        "Hall left.",
    ]


def test_decimals_and_inline_dots_do_not_split():
    assert segment_sentences("Pi is 3.14 roughly.") == ["Pi is 3.14 roughly."]
    assert segment_sentences("Files like a.txt exist.") == ["Files like a.txt exist."]


def test_closing_quotes_stay_with_left_segment():
    text = '"Stop!" she cried. He ran.'
    assert segment_sentences(text) == ['"Stop!"', "she cried.", "He ran."]
    text2 = "He said 'go.' Then left."
    assert segment_sentences(text2) == ["He said 'go.'", "Then left."]


def test_ellipsis_splits_even_without_following_whitespace():
    # spliced quotation, common in scholarly prose
    out = segment_sentences("He approved:...I met a white man. So it goes.")
    assert out == ["He approved:...", "I met a white man.", "So it goes."]
    assert segment_sentences("word… next") == ["word…", "next"]


def test_colon_requires_following_whitespace():
    assert segment_sentences("ratio 3:4 holds.") == ["ratio 3:4 holds."]


def test_whitespace_collapsed_inside_segments():
    out = segment_sentences("A  long\n\tsentence here. Next one.")
    assert out == ["A long sentence here.", "Next one."]


def test_empty_and_punctuation_only_input():
    assert segment_sentences("") == []
    assert segment_sentences("   \n\t ") == []


def test_segment_join_roundtrip_is_stable():
    # re-segmenting the joined segments must reproduce them
    text = 'Dr. Who fled... "Why?" asked Ms. Pond; nobody answered: silence. The end.'
    once = segment_sentences(text)
    again = segment_sentences(" ".join(once))
    assert once == again


# ---------------------------------------------------------------------------
# Primary sources and candidate sets


def make_book(count: int = 6) -> PrimarySource:
    sentences = tuple(f"Sentence number {i} of the book." for i in range(count))
    return PrimarySource(book_id="bk", title="Book", sentences=sentences)


def test_primary_source_rejects_empty():
    with pytest.raises(ValueError):
        PrimarySource(book_id="x", title="X", sentences=())


def test_load_primary_source(tmp_path):
    p = tmp_path / "gatsby.txt"
    p.write_text("First sentence here. Second one follows! Third?")
    book = load_primary_source(p)
    assert book.book_id == "gatsby"
    assert book.title == "gatsby"
    assert book.sentences == ("First sentence here.", "Second one follows!", "Third?")
    named = load_primary_source(p, title="The Great Gatsby")
    assert named.title == "The Great Gatsby"


def test_load_primary_source_rejects_empty_file(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("  \n ")
    with pytest.raises(ValueError):
        load_primary_source(p)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_candidate_set_counts(n):
    book = make_book(6)
    cs = build_candidate_set(book, n)
    assert len(cs.texts) == 6 - n + 1
    assert cs.n == n and cs.book_id == "bk"


def test_candidate_windows_are_contiguous_joins():
    book = make_book(4)
    cs = build_candidate_set(book, 2)
    assert cs.texts[0] == book.sentences[0] + " " + book.sentences[1]
    assert cs.texts[-1] == book.sentences[2] + " " + book.sentences[3]


def test_candidate_set_larger_than_book_is_empty():
    cs = build_candidate_set(make_book(3), 4)
    assert cs.texts == ()


def test_candidate_set_invalid_n():
    with pytest.raises(ValueError):
        build_candidate_set(make_book(3), 0)


def test_candidates_iterates_with_starts():
    cs = build_candidate_set(make_book(5), 2)
    starts = [start for start, _ in cs.candidates()]
    assert starts == [0, 1, 2, 3]


# ---------------------------------------------------------------------------
# Examples and context strings


def full_example() -> Example:
    return Example(
        example_id="e1",
        book_id="bk",
        left=("L1", "L2", "L3", "L4"),
        right=("R1", "R2", "R3", "R4"),
        quote_start=10,
        quote_len=2,
        source_id="s1",
    )


def test_context_string_full_window():
    q = make_context_string(full_example(), 4, 1)
    assert q.text == "L1 L2 L3 L4 [MASK] R1"
    assert (q.l_used, q.r_used) == (4, 1)


def test_context_string_selects_nearest_sentences():
    q = make_context_string(full_example(), 2, 3)
    assert q.text == "L3 L4 [MASK] R1 R2 R3"


def test_context_string_left_only():
    q = make_context_string(full_example(), 4, 0)
    assert q.text == "L1 L2 L3 L4 [MASK]"
    assert q.r_used == 0


def test_context_string_truncates_to_available():
    ex = Example(
        example_id="e2", book_id="bk", left=("L4",), right=(),
        quote_start=0, quote_len=1, source_id="s",
    )
    q = make_context_string(ex, 4, 4)
    assert q.text == "L4 [MASK]"
    assert (q.l_used, q.r_used) == (1, 0)


def test_context_string_rejects_empty_request():
    with pytest.raises(ValueError):
        make_context_string(full_example(), 0, 0)


def test_context_string_rejects_example_without_context():
    ex = Example(
        example_id="e3", book_id="bk", left=(), right=(),
        quote_start=0, quote_len=1, source_id="s",
    )
    with pytest.raises(ValueError):
        make_context_string(ex, 4, 4)


def test_context_string_custom_mask():
    q = make_context_string(full_example(), 1, 0, mask_token="<Q>")
    assert q.text == "L4 <Q>"


def test_mask_must_appear_exactly_once():
    ex = Example(
        example_id="e4", book_id="bk", left=("[MASK] here",), right=(),
        quote_start=0, quote_len=1, source_id="s",
    )
    with pytest.raises(ValueError):
        make_context_string(ex, 1, 0)


def test_example_validates_bounds():
    with pytest.raises(ValueError):
        Example(example_id="x", book_id="b", left=("a",) * 5, right=(),
                quote_start=0, quote_len=1, source_id="s")
    with pytest.raises(ValueError):
        Example(example_id="x", book_id="b", left=(), right=(),
                quote_start=0, quote_len=6, source_id="s")
    with pytest.raises(ValueError):
        Example(example_id="x", book_id="b", left=(), right=(),
                quote_start=-1, quote_len=1, source_id="s")


def test_quote_text_joins_book_sentences():
    book = make_book(6)
    ex = Example(example_id="x", book_id="bk", left=("l",), right=(),
                 quote_start=1, quote_len=2, source_id="s")
    assert ex.quote_text(book) == book.sentences[1] + " " + book.sentences[2]


# ---------------------------------------------------------------------------
# Dataset serialization


def tiny_dataset() -> Dataset:
    ex = lambda eid, book: Example(  # noqa: E731
        example_id=eid, book_id=book, left=("left ctx",), right=("right ctx",),
        quote_start=0, quote_len=1, source_id="src",
    )
    return Dataset(
        splits={
            "train": [ex("t1", "a"), ex("t2", "a")],
            "validation": [ex("v1", "b")],
            "test": [ex("x1", "c")],
        }
    )


def test_dataset_roundtrip(tmp_path):
    ds = tiny_dataset()
    path = tmp_path / "data.jsonl"
    save_dataset(ds, path)
    loaded = load_dataset(path)
    assert loaded.splits == ds.splits


def test_dataset_file_is_one_json_object_per_line(tmp_path):
    path = tmp_path / "data.jsonl"
    save_dataset(tiny_dataset(), path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 4
    rec = json.loads(lines[0])
    assert rec["split"] == "train" and rec["example_id"] == "t1"


def test_load_dataset_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    save_dataset(tiny_dataset(), path)
    lines = path.read_text().strip().split("\n")
    lines[2] = "{not json"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 3"):
        load_dataset(path)


def test_load_dataset_rejects_missing_keys(tmp_path):
    path = tmp_path / "bad.jsonl"
    rec = {"example_id": "e", "book_id": "b", "split": "train"}
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(ValueError, match="line 1"):
        load_dataset(path)


def test_load_dataset_rejects_unknown_split(tmp_path):
    path = tmp_path / "bad.jsonl"
    save_dataset(tiny_dataset(), path)
    text = path.read_text().replace('"train"', '"dev"')
    path.write_text(text)
    with pytest.raises(ValueError):
        load_dataset(path)


def test_validate_rejects_book_in_two_splits():
    ds = tiny_dataset()
    leak = Example(example_id="bad", book_id="a", left=("l",), right=(),
                   quote_start=0, quote_len=1, source_id="s")
    ds.splits["test"].append(leak)
    with pytest.raises(ValueError, match="a"):
        ds.validate()


def test_validate_checks_quote_bounds_against_books():
    book = make_book(3)
    bad = Example(example_id="e", book_id="bk", left=("l",), right=(),
                  quote_start=2, quote_len=2, source_id="s")
    ds = Dataset(splits={"train": [bad]}, books={"bk": book})
    with pytest.raises(ValueError):
        ds.validate()


def test_skips_blank_lines(tmp_path):
    path = tmp_path / "data.jsonl"
    save_dataset(tiny_dataset(), path)
    path.write_text(path.read_text() + "\n\n")
    loaded = load_dataset(path)
    assert sum(len(v) for v in loaded.splits.values()) == 4


def test_default_mask_constant():
    assert DEFAULT_MASK == "[MASK]"
