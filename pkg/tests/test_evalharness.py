import numpy as np
import pytest

from litquest.corpus import Example, PrimarySource
from litquest.evalharness import (
    EvalConfig,
    ProxyTrial,
    build_proxy_task,
    evaluate,
    fleiss_kappa,
    mean_rank,
    proxy_accuracy,
    rank_of_gold,
    recall_at_k,
)
from litquest.index import RankedList


def ranked(starts, query_id="q"):
    starts = np.asarray(starts, dtype=np.int64)
    return RankedList(
        query_id=query_id,
        starts=starts,
        scores=np.arange(len(starts), 0, -1, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# Metrics


def test_rank_of_gold_positions():
    r = ranked([5, 2, 9, 0])
    assert rank_of_gold(r, 5) == 1
    assert rank_of_gold(r, 9) == 3
    assert rank_of_gold(r, 0) == 4


def test_rank_of_gold_missing():
    with pytest.raises(ValueError, match="absent"):
        rank_of_gold(ranked([1, 2]), 3)


def test_recall_at_k_scale():
    ranks = [1, 2, 11]
    assert recall_at_k(ranks, 1) == pytest.approx(100 / 3)
    assert recall_at_k(ranks, 10) == pytest.approx(200 / 3)
    assert recall_at_k(ranks, 11) == 100.0


def test_recall_at_k_validation():
    with pytest.raises(ValueError):
        recall_at_k([], 5)
    with pytest.raises(ValueError):
        recall_at_k([1], 0)


def test_mean_rank():
    assert mean_rank([1, 2, 3]) == 2.0
    with pytest.raises(ValueError):
        mean_rank([])


def test_eval_config_validation():
    EvalConfig(l_max=0, r_max=1)
    with pytest.raises(ValueError):
        EvalConfig(l_max=5)
    with pytest.raises(ValueError):
        EvalConfig(l_max=0, r_max=0)
    with pytest.raises(ValueError):
        EvalConfig(ks=(5, 1))
    with pytest.raises(ValueError):
        EvalConfig(ks=())
    with pytest.raises(ValueError):
        EvalConfig(retriever="oracle")


# ---------------------------------------------------------------------------
# Split evaluation


def small_book(num=30, book_id="bk"):
    return PrimarySource(book_id, "Book", tuple(f"Sentence number {i} here." for i in range(num)))


def examples_for(book, positions, quote_len=1):
    out = []
    for p in positions:
        out.append(Example(
            example_id=f"{book.book_id}:{p}",
            book_id=book.book_id,
            left=tuple(book.sentences[max(0, p - 4) : p]),
            right=tuple(book.sentences[p + quote_len : p + quote_len + 4]),
            quote_start=p,
            quote_len=quote_len,
            source_id="src",
        ))
    return out


class ScriptedRetriever:
    """Places the gold start at a fixed rank for every query."""

    def __init__(self, gold_by_query, count, gold_rank=1):
        self.gold_by_query = gold_by_query
        self.count = count
        self.gold_rank = gold_rank

    def rank(self, book_id, n, query, query_id=""):
        gold = self.gold_by_query[query_id]
        rest = [s for s in range(self.count) if s != gold]
        order = rest[: self.gold_rank - 1] + [gold] + rest[self.gold_rank - 1 :]
        return ranked(order, query_id)

    def has_artifacts(self, book_id, n):
        return True


def test_evaluate_gold_first():
    book = small_book()
    exs = examples_for(book, [5, 10, 15])
    retr = ScriptedRetriever({e.example_id: e.quote_start for e in exs}, count=30)
    result = evaluate(exs, retr, EvalConfig(ks=(1, 5)))
    assert result.recalls == {1: 100.0, 5: 100.0}
    assert result.mean_rank == 1.0
    assert result.num_examples == 3
    assert result.avg_candidates == 30.0
    assert result.skipped == 0


def test_evaluate_gold_at_fixed_rank():
    book = small_book()
    exs = examples_for(book, [5, 10, 15])
    retr = ScriptedRetriever({e.example_id: e.quote_start for e in exs}, count=30, gold_rank=7)
    result = evaluate(exs, retr, EvalConfig(ks=(1, 5, 10)))
    assert result.recalls == {1: 0.0, 5: 0.0, 10: 100.0}
    assert result.mean_rank == 7.0


def test_evaluate_order_invariant_aggregates():
    book = small_book()
    exs = examples_for(book, [4, 8, 12, 16, 20])
    retr = ScriptedRetriever({e.example_id: e.quote_start for e in exs}, count=30, gold_rank=3)
    forward = evaluate(exs, retr, EvalConfig())
    backward = evaluate(list(reversed(exs)), retr, EvalConfig())
    assert forward.recalls == backward.recalls
    assert forward.mean_rank == backward.mean_rank


def test_evaluate_checks_artifacts_up_front():
    class NoArtifacts(ScriptedRetriever):
        def has_artifacts(self, book_id, n):
            return False

    book = small_book()
    exs = examples_for(book, [5]) + examples_for(book, [8], quote_len=2)
    retr = NoArtifacts({e.example_id: e.quote_start for e in exs}, count=30)
    with pytest.raises(ValueError, match=r"\(bk, n=1\), \(bk, n=2\)"):
        evaluate(exs, retr, EvalConfig())


def test_evaluate_skips_contextless_examples():
    book = small_book()
    exs = examples_for(book, [5, 10])
    bare = Example(example_id="bare", book_id="bk", left=(), right=(),
                   quote_start=20, quote_len=1, source_id="src")
    retr = ScriptedRetriever(
        {e.example_id: e.quote_start for e in exs} | {"bare": 20}, count=30)
    result = evaluate(exs + [bare], retr, EvalConfig())
    assert result.num_examples == 2
    assert result.skipped == 1


def test_evaluate_all_skipped_errors():
    bare = Example(example_id="bare", book_id="bk", left=(), right=(),
                   quote_start=3, quote_len=1, source_id="src")
    retr = ScriptedRetriever({"bare": 3}, count=10)
    with pytest.raises(ValueError, match="skipped"):
        evaluate([bare], retr, EvalConfig())


def test_evaluate_empty_input():
    retr = ScriptedRetriever({}, count=5)
    with pytest.raises(ValueError, match="no examples"):
        evaluate([], retr, EvalConfig())


# ---------------------------------------------------------------------------
# Proxy task


def test_proxy_trial_validation():
    with pytest.raises(ValueError, match="distinct"):
        ProxyTrial("e", ("a", "a", "b"), 0, 0)
    with pytest.raises(ValueError, match="gold_position"):
        ProxyTrial("e", ("a", "b", "c"), 3, 0)


def test_proxy_options_and_gold_position():
    book = small_book()
    exs = examples_for(book, [5, 10, 15])
    retr = ScriptedRetriever({e.example_id: e.quote_start for e in exs}, count=30)
    trials = build_proxy_task(exs, retr, {"bk": book})
    assert len(trials) == 3
    for trial, ex in zip(trials, exs):
        assert len(set(trial.options)) == 3
        assert trial.options[trial.gold_position] == book.sentences[ex.quote_start]


def test_proxy_distractors_follow_rank_order():
    book = small_book()
    ex = examples_for(book, [5])[0]
    retr = ScriptedRetriever({ex.example_id: 5}, count=30)
    # ranking is [5, 0, 1, 2, ...]; distractors must be sentences 0 and 1
    (trial,) = build_proxy_task([ex], retr, {"bk": book})
    distractors = {o for i, o in enumerate(trial.options) if i != trial.gold_position}
    assert distractors == {book.sentences[0], book.sentences[1]}


def test_proxy_trials_keyed_on_example_not_order():
    book = small_book()
    exs = examples_for(book, [5, 10, 15])
    retr = ScriptedRetriever({e.example_id: e.quote_start for e in exs}, count=30)
    a = {t.example_id: t for t in build_proxy_task(exs, retr, {"bk": book}, seed=9)}
    b = {t.example_id: t for t in build_proxy_task(list(reversed(exs)), retr, {"bk": book}, seed=9)}
    assert a == b


def test_proxy_seed_changes_shuffle():
    book = small_book()
    exs = examples_for(book, list(range(4, 26)))
    retr = ScriptedRetriever({e.example_id: e.quote_start for e in exs}, count=30)
    a = [t.gold_position for t in build_proxy_task(exs, retr, {"bk": book}, seed=0)]
    b = [t.gold_position for t in build_proxy_task(exs, retr, {"bk": book}, seed=1)]
    assert a != b


def test_proxy_rejects_multi_sentence_examples():
    book = small_book()
    exs = examples_for(book, [5], quote_len=2)
    retr = ScriptedRetriever({exs[0].example_id: 5}, count=29)
    with pytest.raises(ValueError, match="quote_len"):
        build_proxy_task(exs, retr, {"bk": book})


def test_proxy_rejects_unknown_book():
    book = small_book()
    exs = examples_for(book, [5])
    retr = ScriptedRetriever({exs[0].example_id: 5}, count=30)
    with pytest.raises(ValueError, match="unknown book"):
        build_proxy_task(exs, retr, {})


def test_proxy_skips_duplicate_texts():
    # every non-gold sentence shares one text, so only 2 distinct options exist
    sents = tuple(["The gold sentence."] + ["Filler text."] * 9)
    book = PrimarySource("dup", "Dup", sents)
    ex = Example(example_id="dup:0", book_id="dup", left=(), right=sents[1:5],
                 quote_start=0, quote_len=1, source_id="src")
    retr = ScriptedRetriever({"dup:0": 0}, count=10)
    with pytest.warns(UserWarning, match="fewer than 3"):
        trials = build_proxy_task([ex], retr, {"dup": book})
    assert trials == []


def test_proxy_skips_contextless_examples():
    book = small_book()
    bare = Example(example_id="bare", book_id="bk", left=(), right=(),
                   quote_start=5, quote_len=1, source_id="src")
    retr = ScriptedRetriever({"bare": 5}, count=30)
    with pytest.warns(UserWarning, match="no usable context"):
        trials = build_proxy_task([bare], retr, {"bk": book})
    assert trials == []


def test_proxy_gold_position_roughly_uniform():
    book = small_book(400)
    exs = examples_for(book, list(range(4, 394)))
    retr = ScriptedRetriever({e.example_id: e.quote_start for e in exs}, count=400)
    trials = build_proxy_task(exs, retr, {"bk": book}, seed=0)
    counts = np.bincount([t.gold_position for t in trials], minlength=3)
    assert counts.sum() == len(exs)
    assert counts.min() > len(exs) / 3 - 60
    assert counts.max() < len(exs) / 3 + 60


def test_proxy_accuracy_choosers():
    trials = [
        ProxyTrial("a", ("x", "y", "z"), 0, 0),
        ProxyTrial("b", ("x", "y", "z"), 1, 0),
        ProxyTrial("c", ("x", "y", "z"), 2, 0),
        ProxyTrial("d", ("x", "y", "z"), 0, 0),
    ]
    assert proxy_accuracy(trials, lambda t: t.gold_position) == 100.0
    assert proxy_accuracy(trials, lambda t: 0) == 50.0
    with pytest.raises(ValueError):
        proxy_accuracy([], lambda t: 0)


# ---------------------------------------------------------------------------
# Fleiss kappa


def test_fleiss_perfect_agreement():
    assert fleiss_kappa([[3, 0], [0, 3]]) == pytest.approx(1.0, abs=1e-12)


def test_fleiss_pinned_small_case():
    assert fleiss_kappa([[3, 0], [2, 1]]) == pytest.approx(-0.2, abs=1e-9)


def test_fleiss_uniform_random_near_zero():
    rng = np.random.default_rng(0)
    picks = rng.integers(0, 3, size=(600, 3))
    counts = np.stack([np.bincount(row, minlength=3) for row in picks])
    assert abs(fleiss_kappa(counts)) < 0.05


def test_fleiss_explicit_rater_count():
    assert fleiss_kappa([[3, 0], [2, 1]], raters_per_item=3) == pytest.approx(-0.2, abs=1e-9)
    with pytest.raises(ValueError, match="sum"):
        fleiss_kappa([[3, 0], [2, 1]], raters_per_item=4)


def test_fleiss_validation():
    with pytest.raises(ValueError, match="2-D"):
        fleiss_kappa([3, 0])
    with pytest.raises(ValueError, match="2-D"):
        fleiss_kappa([[3, 0]])
    with pytest.raises(ValueError, match="raters"):
        fleiss_kappa([[1, 0], [0, 1]])
    with pytest.raises(ValueError, match="sum"):
        fleiss_kappa([[3, 0], [2, 2]])
    with pytest.raises(ValueError, match="degenerate"):
        fleiss_kappa([[3, 0], [3, 0]])
