import numpy as np
import pytest

from litquest.corpus import PrimarySource, build_candidate_set
from litquest.encoder import FeaturizerConfig, encode_context, export_embeddings, featurize, init_params
from litquest.index import rank_bm25, rank_dense
from litquest.store import (
    ArtifactStore,
    Bm25Retriever,
    DenseRetriever,
    MissingArtifact,
    RandomRetriever,
    UnknownBook,
)

FZ = FeaturizerConfig(num_buckets=256, hash_seed=5)


@pytest.fixture
def book():
    return PrimarySource(
        "bk", "The Book",
        tuple(f"Sentence {i} carries word{i} and word{i + 1} tokens." for i in range(25)),
    )


@pytest.fixture
def store(tmp_path, book):
    st = ArtifactStore(tmp_path)
    st.save_book(book)
    return st


def test_layout_paths(tmp_path):
    st = ArtifactStore(tmp_path)
    assert st.book_path("x") == tmp_path / "books" / "x.json"
    assert st.index_path("x", 3) == tmp_path / "index" / "x.n3.npz"
    assert st.emb_path("x", 2) == tmp_path / "emb" / "x.n2.emb"
    assert st.params_path == tmp_path / "params.rlde"


def test_book_roundtrip(store, book, tmp_path):
    assert store.has_book("bk")
    assert store.list_book_ids() == ["bk"]
    fresh = ArtifactStore(tmp_path)
    loaded = fresh.load_book("bk")
    assert loaded == book
    assert fresh.load_books() == {"bk": book}


def test_unknown_book(store):
    assert not store.has_book("nope")
    with pytest.raises(UnknownBook, match="'nope'"):
        store.load_book("nope")


def test_index_roundtrip(store, tmp_path):
    built = store.build_index("bk", 2)
    assert store.index_path("bk", 2).exists()
    fresh = ArtifactStore(tmp_path)
    assert fresh.has_index("bk", 2)
    reloaded = fresh.load_index("bk", 2)
    direct = rank_bm25(built, "word7 tokens sentence")
    via_disk = rank_bm25(reloaded, "word7 tokens sentence")
    assert np.array_equal(direct.starts, via_disk.starts)
    assert np.allclose(direct.scores, via_disk.scores)
    assert reloaded.avgdl == built.avgdl
    assert reloaded.vocab == built.vocab


def test_missing_index_hint(store):
    with pytest.raises(MissingArtifact, match="litquest index"):
        store.load_index("bk", 4)


def test_embeddings_roundtrip(store, book, tmp_path):
    params = init_params(FZ, dim=8, seed=0)
    matrix = export_embeddings(params, build_candidate_set(book, 1))
    store.save_embeddings("bk", 1, matrix)
    fresh = ArtifactStore(tmp_path)
    assert fresh.has_embeddings("bk", 1)
    reloaded = fresh.load_embeddings("bk", 1)
    assert np.allclose(reloaded.vectors, matrix.vectors.astype(np.float32))


def test_missing_embeddings_hint(store):
    with pytest.raises(MissingArtifact, match="litquest"):
        store.load_embeddings("bk", 1)


def test_params_roundtrip_and_set(store, tmp_path):
    with pytest.raises(MissingArtifact, match="litquest train"):
        store.load_params()
    params = init_params(FZ, dim=8, seed=1)
    store.save_params(params)
    fresh = ArtifactStore(tmp_path)
    assert fresh.has_params()
    assert np.allclose(fresh.load_params().w_ctx, params.w_ctx, atol=1e-7)
    # in-memory override never touches disk
    bare = ArtifactStore(tmp_path / "elsewhere")
    bare.set_params(params)
    assert not bare.params_path.exists()
    assert bare.load_params() is params


def test_available_n(store, book):
    assert store.available_n("bk") == []
    store.build_index("bk", 1)
    store.build_index("bk", 2)
    params = init_params(FZ, dim=4, seed=0)
    for n in (2, 3):
        store.save_embeddings("bk", n, export_embeddings(params, build_candidate_set(book, n)))
    assert store.available_n("bk", kind="bm25") == [1, 2]
    assert store.available_n("bk", kind="dense") == [2, 3]
    assert store.available_n("bk") == [1, 2, 3]


# ---------------------------------------------------------------------------
# Retrievers


def test_bm25_retriever(store):
    index = store.build_index("bk", 1)
    retr = Bm25Retriever(store)
    assert retr.has_artifacts("bk", 1)
    assert not retr.has_artifacts("bk", 2)
    got = retr.rank("bk", 1, "word7 tokens", query_id="q1")
    want = rank_bm25(index, "word7 tokens", query_id="q1")
    assert np.array_equal(got.starts, want.starts)
    assert got.query_id == "q1"
    with pytest.raises(UnknownBook):
        retr.rank("ghost", 1, "word7")


def test_dense_retriever(store, book):
    params = init_params(FZ, dim=8, seed=2)
    matrix = export_embeddings(params, build_candidate_set(book, 1))
    store.save_embeddings("bk", 1, matrix)
    retr = DenseRetriever(store)
    assert not retr.has_artifacts("bk", 1)  # params still missing
    store.save_params(params)
    assert retr.has_artifacts("bk", 1)
    got = retr.rank("bk", 1, "word7 and word8 tokens")
    q = encode_context(params, featurize("word7 and word8 tokens", FZ))
    want = rank_dense(store.load_embeddings("bk", 1), q)
    assert np.array_equal(got.starts, want.starts)
    with pytest.raises(UnknownBook):
        retr.rank("ghost", 1, "word7")


def test_random_retriever_is_a_permutation(store):
    retr = RandomRetriever(store, seed=0)
    assert retr.has_artifacts("bk", 3)
    ranking = retr.rank("bk", 3, "whatever")
    assert len(ranking) == 23
    assert np.array_equal(np.sort(ranking.starts), np.arange(23))
    assert np.all(np.diff(ranking.scores) < 0)


def test_random_retriever_keyed_on_query_not_call_order(store):
    retr = RandomRetriever(store, seed=0)
    first = retr.rank("bk", 1, "query a", query_id="x")
    retr.rank("bk", 1, "query b")
    again = retr.rank("bk", 1, "query a", query_id="y")
    assert np.array_equal(first.starts, again.starts)
    assert not np.array_equal(first.starts, retr.rank("bk", 1, "query b").starts)


def test_random_retriever_seed_and_n_matter(store):
    a = RandomRetriever(store, seed=0).rank("bk", 1, "q")
    b = RandomRetriever(store, seed=1).rank("bk", 1, "q")
    assert not np.array_equal(a.starts, b.starts)
    c = RandomRetriever(store, seed=0).rank("bk", 2, "q")
    assert len(c) == 24
