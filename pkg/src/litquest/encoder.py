"""Desk-scale dual encoder over hashed bag-of-features text vectors.

Context and quote sides use separate linear maps (W_ctx, W_quote) applied to
L2-normalized hashed n-gram counts. Training minimizes the in-batch
contrastive loss

    loss = sum_i [ logsumexp_j(c_i . q_j) - c_i . q_i ]

with every batch drawn from a single book. The loop is deterministic for a
fixed seed and small enough to gradient-check exhaustively.

Params file (little-endian): magic "RLDE", u32 version=1, u32 dim,
u32 num_buckets, u64 hash_seed, then W_ctx row-major f32, W_quote f32.
Memory and per-step cost scale with dim x num_buckets; desk-scale configs
keep num_buckets at 2^14 or below.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import sparse

from .corpus import Dataset, Example, make_context_string, CandidateSet
from .index import EmbeddingMatrix, tokenize

_PARAMS_MAGIC = b"RLDE"
_PARAMS_VERSION = 1
_PARAMS_HEADER = struct.Struct("<4sIIIQ")

_DEFAULT_ORDERS = (1, 2)

OPT_ADAPTIVE = "adaptive-moment"
OPT_PLAIN = "plain-gradient"


# ---------------------------------------------------------------------------
# Featurization


@dataclass(frozen=True)
class FeaturizerConfig:
    num_buckets: int = 2**18
    ngram_orders: tuple[int, ...] = _DEFAULT_ORDERS
    hash_seed: int = 0

    def __post_init__(self):
        if self.num_buckets < 2:
            raise ValueError("num_buckets must be at least 2")
        orders = tuple(sorted(set(self.ngram_orders)))
        if not orders or not set(orders) <= {1, 2}:
            raise ValueError("ngram_orders must be a non-empty subset of {1, 2}")
        object.__setattr__(self, "ngram_orders", orders)
        if not 0 <= self.hash_seed < 2**64:
            raise ValueError("hash_seed must fit in u64")


@dataclass(frozen=True)
class Features:
    """Sparse L2-normalized hashed n-gram counts; empty text is all-zero."""

    indices: np.ndarray
    values: np.ndarray
    num_buckets: int


def _bucket(gram: str, seed_key: bytes, num_buckets: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=seed_key).digest()
    return int.from_bytes(digest, "little") % num_buckets


def featurize(text: str, config: FeaturizerConfig) -> Features:
    tokens = tokenize(text)
    seed_key = struct.pack("<Q", config.hash_seed)
    counts: dict[int, float] = {}
    for order in config.ngram_orders:
        for i in range(len(tokens) - order + 1):
            gram = " ".join(tokens[i : i + order])
            b = _bucket(gram, seed_key, config.num_buckets)
            counts[b] = counts.get(b, 0.0) + 1.0
    if not counts:
        return Features(
            indices=np.zeros(0, dtype=np.int64),
            values=np.zeros(0, dtype=np.float64),
            num_buckets=config.num_buckets,
        )
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values /= np.linalg.norm(values)
    return Features(indices=indices, values=values, num_buckets=config.num_buckets)


# ---------------------------------------------------------------------------
# Parameters and encoding


@dataclass
class EncoderParams:
    """Two independent linear maps of shape dim x num_buckets (float64)."""

    w_ctx: np.ndarray
    w_quote: np.ndarray
    featurizer: FeaturizerConfig

    def __post_init__(self):
        self.w_ctx = np.asarray(self.w_ctx, dtype=np.float64)
        self.w_quote = np.asarray(self.w_quote, dtype=np.float64)
        if self.w_ctx.ndim != 2 or self.w_ctx.shape != self.w_quote.shape:
            raise ValueError("W_ctx and W_quote must share a dim x num_buckets shape")
        if self.w_ctx.shape[1] != self.featurizer.num_buckets:
            raise ValueError("parameter width does not match featurizer num_buckets")
        if self.w_ctx.shape[0] < 1:
            raise ValueError("dim must be positive")
        if not (np.isfinite(self.w_ctx).all() and np.isfinite(self.w_quote).all()):
            raise ValueError("parameters contain non-finite values")

    @property
    def dim(self) -> int:
        return int(self.w_ctx.shape[0])

    @property
    def num_buckets(self) -> int:
        return int(self.w_ctx.shape[1])

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.w_ctx.copy(), self.w_quote.copy(), self.featurizer)


def init_params(
    featurizer: FeaturizerConfig, dim: int = 64, seed: int = 0, scale: float = 0.01
) -> EncoderParams:
    rng = np.random.default_rng(seed)
    shape = (dim, featurizer.num_buckets)
    return EncoderParams(
        w_ctx=rng.normal(0.0, scale, shape),
        w_quote=rng.normal(0.0, scale, shape),
        featurizer=featurizer,
    )


def _project(w: np.ndarray, features: Features, num_buckets: int) -> np.ndarray:
    if features.num_buckets != num_buckets:
        raise ValueError(
            f"features hashed into {features.num_buckets} buckets, params expect {num_buckets}"
        )
    if features.indices.size == 0:
        return np.zeros(w.shape[0], dtype=np.float64)
    return w[:, features.indices] @ features.values


def encode_context(params: EncoderParams, features: Features) -> np.ndarray:
    return _project(params.w_ctx, features, params.num_buckets)


def encode_quote(params: EncoderParams, features: Features) -> np.ndarray:
    return _project(params.w_quote, features, params.num_buckets)


# ---------------------------------------------------------------------------
# Loss


def contrastive_loss(scores) -> tuple[float, np.ndarray]:
    """In-batch softmax cross-entropy with the diagonal as gold.

    Returns (loss, dLoss/dScores). Stabilized with per-row max subtraction;
    gradient rows are softmax(row) minus the one-hot diagonal.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"score matrix must be square, got shape {s.shape}")
    if not np.isfinite(s).all():
        raise ValueError("score matrix contains non-finite values")
    m = s.max(axis=1, keepdims=True)
    z = np.exp(s - m)
    row_sums = z.sum(axis=1)
    lse = m[:, 0] + np.log(row_sums)
    loss = float((lse - np.diagonal(s)).sum())
    grad = z / row_sums[:, None]
    np.fill_diagonal(grad, grad.diagonal() - 1.0)
    return loss, grad


# ---------------------------------------------------------------------------
# Batches and training


@dataclass
class TrainingBatch:
    """Context/quote feature pairs, all from one book."""

    pairs: list[tuple[Features, Features]]
    book_id: str = ""

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("batch must contain at least one pair")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 100
    epochs: int = 10
    learning_rate: float = 1e-5
    lr_scale: float = 1.0
    seed: int = 0
    optimizer: str = OPT_ADAPTIVE
    dim: int = 64
    featurizer: FeaturizerConfig = field(default_factory=FeaturizerConfig)
    init_scale: float = 0.01
    patience: int = 2
    cosine: bool = False  # L2-normalize c and q inside the loss

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.dim, self.patience) < 1:
            raise ValueError("batch_size, epochs, dim and patience must be positive")
        if self.learning_rate <= 0 or self.lr_scale <= 0 or self.init_scale <= 0:
            raise ValueError("learning_rate, lr_scale and init_scale must be positive")
        if self.optimizer not in (OPT_ADAPTIVE, OPT_PLAIN):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    params: EncoderParams
    train_losses: list[float]
    val_losses: list[float]
    epochs_run: int
    stopped_early: bool
    skipped_examples: int


def _feature_matrix(feats: list[Features], num_buckets: int) -> sparse.csr_matrix:
    indptr = np.zeros(len(feats) + 1, dtype=np.int64)
    for i, f in enumerate(feats):
        indptr[i + 1] = indptr[i] + f.indices.size
    indices = np.concatenate([f.indices for f in feats]) if feats else np.zeros(0, dtype=np.int64)
    data = np.concatenate([f.values for f in feats]) if feats else np.zeros(0)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(feats), num_buckets))


def _batch_scores(params: EncoderParams, batch: TrainingBatch, cosine: bool) -> tuple:
    ctx = np.stack([_project(params.w_ctx, f, params.num_buckets) for f, _ in batch.pairs])
    quo = np.stack([_project(params.w_quote, f, params.num_buckets) for _, f in batch.pairs])
    if cosine:
        ctx = ctx / np.maximum(np.linalg.norm(ctx, axis=1, keepdims=True), 1e-12)
        quo = quo / np.maximum(np.linalg.norm(quo, axis=1, keepdims=True), 1e-12)
    return ctx, quo, ctx @ quo.T


def batch_loss(params: EncoderParams, batch: TrainingBatch, cosine: bool = False) -> float:
    _, _, scores = _batch_scores(params, batch, cosine)
    loss, _ = contrastive_loss(scores)
    return loss


def _forward_backward(
    params: EncoderParams, batch: TrainingBatch
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and dense gradients for both maps (raw dot-product scoring)."""
    ctx, quo, scores = _batch_scores(params, batch, cosine=False)
    loss, grad_scores = contrastive_loss(scores)
    d_ctx = grad_scores @ quo
    d_quo = grad_scores.T @ ctx
    x_ctx = _feature_matrix([f for f, _ in batch.pairs], params.num_buckets)
    x_quo = _feature_matrix([f for _, f in batch.pairs], params.num_buckets)
    dw_ctx = (x_ctx.T @ d_ctx).T
    dw_quo = (x_quo.T @ d_quo).T
    return loss, np.asarray(dw_ctx), np.asarray(dw_quo)


class _Optimizer:
    def __init__(self, config: TrainConfig, shape):
        self.lr = config.learning_rate * config.lr_scale
        self.adaptive = config.optimizer == OPT_ADAPTIVE
        if self.adaptive:
            self.t = 0
            self.m = [np.zeros(shape), np.zeros(shape)]
            self.v = [np.zeros(shape), np.zeros(shape)]

    def step(self, weights: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self.adaptive:
            for w, g in zip(weights, grads):
                w -= self.lr * g
            return
        b1, b2, eps = 0.9, 0.999, 1e-8
        self.t += 1
        for k, (w, g) in enumerate(zip(weights, grads)):
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            w -= self.lr * m_hat / (np.sqrt(v_hat) + eps)


def _featurize_split(
    examples: list[Example],
    dataset: Dataset,
    l: int,
    r: int,
    config: FeaturizerConfig,
) -> tuple[dict[str, list[tuple[Features, Features]]], int]:
    """Per-book feature pairs; examples with no usable context are skipped."""
    missing = sorted({e.book_id for e in examples} - set(dataset.books))
    if missing:
        raise ValueError(f"dataset lacks book text for: {', '.join(missing)}")
    by_book: dict[str, list[tuple[Features, Features]]] = {}
    skipped = 0
    for ex in examples:
        try:
            query = make_context_string(ex, l, r)
        except ValueError:
            skipped += 1
            continue
        ctx_f = featurize(query.text, config)
        quote_f = featurize(ex.quote_text(dataset.books[ex.book_id]), config)
        by_book.setdefault(ex.book_id, []).append((ctx_f, quote_f))
    return by_book, skipped


def _epoch_batches(
    by_book: dict[str, list[tuple[Features, Features]]],
    batch_size: int,
    rng: np.random.Generator | None,
) -> list[TrainingBatch]:
    """Same-book batches; a short tail stays within its book."""
    batches = []
    book_ids = sorted(by_book)
    if rng is not None:
        book_ids = [book_ids[i] for i in rng.permutation(len(book_ids))]
    for book_id in book_ids:
        pairs = by_book[book_id]
        order = rng.permutation(len(pairs)) if rng is not None else range(len(pairs))
        shuffled = [pairs[i] for i in order]
        for i in range(0, len(shuffled), batch_size):
            batches.append(TrainingBatch(pairs=shuffled[i : i + batch_size], book_id=book_id))
    return batches


def _mean_loss(params: EncoderParams, batches: list[TrainingBatch], cosine: bool) -> float:
    total = sum(batch_loss(params, b, cosine) for b in batches)
    count = sum(len(b) for b in batches)
    return total / count


def train(dataset: Dataset, l: int, r: int, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Fit the dual encoder on the train split; early-stop on validation loss.

    Deterministic for a fixed config: book order, within-book shuffles and
    parameter init all come from one seeded generator. When no validation
    examples survive featurization, training runs all epochs. The params
    returned are those of the best validation epoch.
    """
    if not 0 <= l <= 4 or not 0 <= r <= 4 or l + r < 1:
        raise ValueError("l and r must be in 0..4 with l + r >= 1")
    train_examples = dataset.splits.get("train", [])
    if not train_examples:
        raise ValueError("train split is empty")
    by_book, skipped = _featurize_split(train_examples, dataset, l, r, config.featurizer)
    if not by_book:
        raise ValueError("no trainable examples after featurization")
    val_by_book, val_skipped = _featurize_split(
        dataset.splits.get("validation", []), dataset, l, r, config.featurizer
    )
    val_batches = _epoch_batches(val_by_book, config.batch_size, rng=None)

    rng = np.random.default_rng(config.seed)
    params = EncoderParams(
        w_ctx=rng.normal(0.0, config.init_scale, (config.dim, config.featurizer.num_buckets)),
        w_quote=rng.normal(0.0, config.init_scale, (config.dim, config.featurizer.num_buckets)),
        featurizer=config.featurizer,
    )
    opt = _Optimizer(config, params.w_ctx.shape)

    train_losses: list[float] = []
    val_losses: list[float] = []
    best_val = np.inf
    best_params = params.copy()
    bad_epochs = 0
    stopped = False
    epochs_run = 0
    for _ in range(config.epochs):
        epochs_run += 1
        total = 0.0
        count = 0
        for batch in _epoch_batches(by_book, config.batch_size, rng):
            loss, dw_ctx, dw_quo = _forward_backward(params, batch)
            opt.step([params.w_ctx, params.w_quote], [dw_ctx, dw_quo])
            total += loss
            count += len(batch)
        train_losses.append(total / count)
        if not val_batches:
            best_params = params.copy()
            continue
        val_loss = _mean_loss(params, val_batches, config.cosine)
        val_losses.append(val_loss)
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = params.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                stopped = True
                break
    return TrainResult(
        params=best_params,
        train_losses=train_losses,
        val_losses=val_losses,
        epochs_run=epochs_run,
        stopped_early=stopped,
        skipped_examples=skipped + val_skipped,
    )


# ---------------------------------------------------------------------------
# Gradient checking


def gradient_check(params: EncoderParams, batch: TrainingBatch, epsilon: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Intended for small instances only: cost is two loss evaluations per
    parameter entry.
    """
    _, dw_ctx, dw_quo = _forward_backward(params, batch)
    worst = 0.0
    for w, analytic in ((params.w_ctx, dw_ctx), (params.w_quote, dw_quo)):
        it = np.nditer(w, flags=["multi_index"])
        while not it.finished:
            ij = it.multi_index
            orig = w[ij]
            w[ij] = orig + epsilon
            up = batch_loss(params, batch)
            w[ij] = orig - epsilon
            down = batch_loss(params, batch)
            w[ij] = orig
            numeric = (up - down) / (2 * epsilon)
            a = analytic[ij]
            denom = max(abs(a), abs(numeric))
            if denom > 1e-10:
                worst = max(worst, abs(a - numeric) / denom)
            it.iternext()
    return worst


# ---------------------------------------------------------------------------
# Export and persistence


def export_embeddings(params: EncoderParams, candidates: CandidateSet) -> EmbeddingMatrix:
    """Quote-encode every candidate; feeds rank_dense and save_embeddings."""
    ids = np.array([start for start, _ in candidates.candidates()], dtype=np.int64)
    if ids.size == 0:
        vectors = np.zeros((0, params.dim), dtype=np.float32)
    else:
        vectors = np.stack(
            [encode_quote(params, featurize(text, params.featurizer)) for _, text in candidates.candidates()]
        ).astype(np.float32)
    return EmbeddingMatrix(dim=params.dim, ids=ids, vectors=vectors)


def save_params(params: EncoderParams, path: str | Path) -> None:
    """Write the RLDE params file; W matrices are stored as f32."""
    if params.featurizer.ngram_orders != _DEFAULT_ORDERS:
        raise ValueError(
            "params file format only carries the default n-gram orders (1, 2); "
            f"got {params.featurizer.ngram_orders}"
        )
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(
            _PARAMS_HEADER.pack(
                _PARAMS_MAGIC,
                _PARAMS_VERSION,
                params.dim,
                params.num_buckets,
                params.featurizer.hash_seed,
            )
        )
        fh.write(params.w_ctx.astype("<f4").tobytes())
        fh.write(params.w_quote.astype("<f4").tobytes())


def load_params(path: str | Path) -> EncoderParams:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _PARAMS_HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, dim, num_buckets, hash_seed = _PARAMS_HEADER.unpack_from(blob)
    if magic != _PARAMS_MAGIC:
        raise ValueError(f"{path}: not an encoder params file")
    if version != _PARAMS_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = blob[_PARAMS_HEADER.size :]
    matrix_bytes = dim * num_buckets * 4
    if len(body) != 2 * matrix_bytes:
        raise ValueError(
            f"{path}: expected {2 * matrix_bytes} bytes of weights, found {len(body)}"
        )
    w_ctx = np.frombuffer(body[:matrix_bytes], dtype="<f4").reshape(dim, num_buckets)
    w_quote = np.frombuffer(body[matrix_bytes:], dtype="<f4").reshape(dim, num_buckets)
    if not (np.isfinite(w_ctx).all() and np.isfinite(w_quote).all()):
        raise ValueError(f"{path}: non-finite weights")
    config = FeaturizerConfig(num_buckets=num_buckets, hash_seed=hash_seed)
    return EncoderParams(
        w_ctx=w_ctx.astype(np.float64), w_quote=w_quote.astype(np.float64), featurizer=config
    )
