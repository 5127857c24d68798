"""Command-line pipeline: ingest, mine, index, train, export-emb, eval,
proxy, proxy-score, serve.

Every subcommand takes --artifacts-dir (default ./artifacts); the
RELIC_ARTIFACTS environment variable overrides the flag when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import encoder as enc
from .corpus import (
    SPLITS,
    Dataset,
    build_candidate_set,
    example_to_record,
    load_dataset,
    load_primary_source,
)
from .evalharness import (
    DEFAULT_KS,
    EvalConfig,
    ProxyTrial,
    build_proxy_task,
    evaluate,
    fleiss_kappa,
    proxy_accuracy,
)
from .miner import (
    DEFAULT_LCS_MIN_CHARS,
    DEFAULT_MIN_PRIMARY_TOKENS,
    DEFAULT_THRESHOLD,
    SourceFilterConfig,
    mine_corpus,
)
from .store import ArtifactStore, Bm25Retriever, DenseRetriever, RandomRetriever

ENV_ARTIFACTS = "RELIC_ARTIFACTS"


def resolve_artifacts_dir(flag_value: str) -> Path:
    return Path(os.environ.get(ENV_ARTIFACTS) or flag_value)


def _store(args) -> ArtifactStore:
    return ArtifactStore(resolve_artifacts_dir(args.artifacts_dir))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--artifacts-dir", default="artifacts",
                        help=f"artifact directory (env {ENV_ARTIFACTS} overrides)")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args) -> int:
    store = _store(args)
    book = load_primary_source(args.book, title=args.title)
    if args.book_id:
        from .corpus import PrimarySource

        book = PrimarySource(book_id=args.book_id, title=args.title or args.book_id,
                             sentences=book.sentences)
    path = store.save_book(book)
    print(f"ingested {book.book_id!r}: {len(book)} sentences -> {path}")
    return 0


def cmd_mine(args) -> int:
    store = _store(args)
    book = store.load_book(args.book_id)
    docs_dir = Path(args.docs)
    documents = {p.stem: p.read_text(encoding="utf-8") for p in sorted(docs_dir.glob("*.txt"))}
    if not documents:
        print(f"no .txt documents in {docs_dir}", file=sys.stderr)
        return 1
    titles = json.loads(Path(args.titles).read_text()) if args.titles else {}
    languages = json.loads(Path(args.languages).read_text()) if args.languages else None
    filter_config = SourceFilterConfig(min_matches=args.min_matches, max_matches=args.max_matches)
    examples, report = mine_corpus(
        book, documents, titles=titles, languages=languages, filter_config=filter_config,
        threshold=args.threshold, min_primary_tokens=args.min_primary_tokens,
        lcs_min_chars=args.lcs_min_chars,
    )
    mode = "a" if args.append else "w"
    with open(args.out, mode, encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_record(ex, args.split), ensure_ascii=False) + "\n")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write("source_id\tmatches\tkept\treason\n")
            for row in report:
                fh.write(f"{row.source_id}\t{row.matches}\t{int(row.kept)}\t{row.reason}\n")
    kept = sum(1 for r in report if r.kept)
    print(f"mined {len(examples)} examples from {kept}/{len(report)} sources -> {args.out}")
    return 0


def cmd_index(args) -> int:
    store = _store(args)
    for n in args.n:
        built = store.build_index(args.book_id, n, k1=args.k1, b=args.b)
        print(f"indexed {args.book_id!r} n={n}: {built.num_candidates} candidates, "
              f"{len(built.vocab)} terms")
    return 0


def _load_dataset_with_books(store: ArtifactStore, path: str) -> Dataset:
    ds = load_dataset(path)
    needed = sorted({ex.book_id for exs in ds.splits.values() for ex in exs})
    books = {book_id: store.load_book(book_id) for book_id in needed}
    ds = Dataset(splits=ds.splits, books=books)
    ds.validate()
    return ds


def cmd_train(args) -> int:
    store = _store(args)
    ds = _load_dataset_with_books(store, args.data)
    config = enc.TrainConfig(
        batch_size=args.batch, epochs=args.epochs, learning_rate=args.lr,
        lr_scale=args.lr_scale, seed=args.seed, optimizer=args.optimizer,
        dim=args.dim,
        featurizer=enc.FeaturizerConfig(num_buckets=args.buckets, hash_seed=args.hash_seed),
        patience=args.patience,
    )
    result = enc.train(ds, args.left, args.right, config)
    out = Path(args.out) if args.out else store.params_path
    out.parent.mkdir(parents=True, exist_ok=True)
    enc.save_params(result.params, out)
    if out == store.params_path:
        store.set_params(result.params)
    for epoch, loss in enumerate(result.train_losses, 1):
        val = f"  val={result.val_losses[epoch - 1]:.6f}" if epoch <= len(result.val_losses) else ""
        print(f"epoch {epoch}: train={loss:.6f}{val}")
    if result.stopped_early:
        print(f"early stop after epoch {result.epochs_run}")
    if result.skipped_examples:
        print(f"skipped {result.skipped_examples} examples with no usable context")
    if args.loss_log:
        Path(args.loss_log).write_text(json.dumps(
            {"train": result.train_losses, "validation": result.val_losses,
             "epochs_run": result.epochs_run, "stopped_early": result.stopped_early},
            indent=2, sort_keys=True))
    print(f"params -> {out}")
    return 0


def cmd_export_emb(args) -> int:
    store = _store(args)
    params = enc.load_params(args.params) if args.params else store.load_params()
    book = store.load_book(args.book_id)
    for n in args.n:
        matrix = enc.export_embeddings(params, build_candidate_set(book, n))
        path = store.save_embeddings(args.book_id, n, matrix)
        print(f"exported {len(matrix)} vectors (dim {matrix.dim}) -> {path}")
    return 0


def _make_retriever(store: ArtifactStore, name: str, seed: int):
    if name == "bm25":
        return Bm25Retriever(store)
    if name == "dense":
        return DenseRetriever(store)
    return RandomRetriever(store, seed=seed)


def cmd_eval(args) -> int:
    store = _store(args)
    ds = _load_dataset_with_books(store, args.data)
    examples = ds.splits.get(args.split, [])
    if not examples:
        print(f"split {args.split!r} is empty", file=sys.stderr)
        return 1
    if args.params:
        store.set_params(enc.load_params(args.params))
    ks = tuple(int(k) for k in args.ks.split(","))
    config = EvalConfig(l_max=args.left, r_max=args.right, ks=ks,
                        retriever=args.retriever, seed=args.seed)
    retriever = _make_retriever(store, args.retriever, args.seed)
    result = evaluate(examples, retriever, config)
    report = {
        "config": {"split": args.split, "retriever": args.retriever,
                   "l_max": args.left, "r_max": args.right, "ks": list(ks), "seed": args.seed},
        **result.as_dict(),
    }
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    recalls = "  ".join(f"R@{k}={result.recalls[k]:.2f}" for k in ks)
    print(f"{args.retriever} {args.left}/{args.right} on {result.num_examples} examples: "
          f"{recalls}  mean_rank={result.mean_rank:.2f}")
    return 0


def cmd_proxy(args) -> int:
    store = _store(args)
    ds = _load_dataset_with_books(store, args.data)
    pool = [ex for ex in ds.splits.get(args.split, []) if ex.quote_len == 1]
    pool.sort(key=lambda e: e.example_id)
    pool = pool[: args.n_trials]
    if not pool:
        print("no single-sentence examples in split", file=sys.stderr)
        return 1
    trials = build_proxy_task(pool, Bm25Retriever(store), ds.books,
                              seed=args.seed, l=args.left, r=args.right)
    with open(args.out, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(json.dumps(
                {"example_id": t.example_id, "options": list(t.options),
                 "gold_position": t.gold_position, "seed": t.seed},
                ensure_ascii=False) + "\n")
    print(f"wrote {len(trials)} trials -> {args.out}")
    return 0


def _read_jsonl(path: str) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def cmd_proxy_score(args) -> int:
    trials = [
        ProxyTrial(example_id=r["example_id"], options=tuple(r["options"]),
                   gold_position=r["gold_position"], seed=r["seed"])
        for r in _read_jsonl(args.trials)
    ]
    by_id = {t.example_id: t for t in trials}
    answer_sets = []
    for path in args.answers:
        answers = {}
        for rec in _read_jsonl(path):
            if rec["example_id"] not in by_id:
                print(f"{path}: answer for unknown trial {rec['example_id']!r}", file=sys.stderr)
                return 1
            answers[rec["example_id"]] = int(rec["choice"])
        missing = sorted(set(by_id) - set(answers))
        if missing:
            print(f"{path}: missing answers for {len(missing)} trials "
                  f"(first: {missing[0]})", file=sys.stderr)
            return 1
        answer_sets.append(answers)
    report: dict = {"num_trials": len(trials), "accuracy": []}
    for answers in answer_sets:
        report["accuracy"].append(proxy_accuracy(trials, lambda t: answers[t.example_id]))
    if len(answer_sets) == 3:
        counts = []
        all_agree = none_agree = majority_correct = 0
        for t in trials:
            picks = [answers[t.example_id] for answers in answer_sets]
            row = [picks.count(c) for c in range(3)]
            counts.append(row)
            if len(set(picks)) == 1:
                all_agree += 1
            if len(set(picks)) == 3:
                none_agree += 1
            if sum(1 for p in picks if p == t.gold_position) >= 2:
                majority_correct += 1
        report["fleiss_kappa"] = fleiss_kappa(counts)
        report["all_agree_pct"] = 100.0 * all_agree / len(trials)
        report["none_agree_pct"] = 100.0 * none_agree / len(trials)
        report["majority_correct_pct"] = 100.0 * majority_correct / len(trials)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store = _store(args)
    app = create_app(store, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="litquest",
                                     description="literary quotation retrieval pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="segment a book text file and store it")
    p.add_argument("--book", required=True, help="path to the plain-text book")
    p.add_argument("--book-id", default=None)
    p.add_argument("--title", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mine", help="mine quotation examples from scholarly documents")
    p.add_argument("--book-id", required=True)
    p.add_argument("--docs", required=True, help="directory of .txt documents")
    p.add_argument("--split", choices=SPLITS, required=True)
    p.add_argument("--out", required=True, help="dataset JSONL to write")
    p.add_argument("--append", action="store_true")
    p.add_argument("--report", default=None, help="per-source TSV report path")
    p.add_argument("--titles", default=None, help="JSON file mapping source_id to title")
    p.add_argument("--languages", default=None, help="JSON file mapping source_id to language")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--min-primary-tokens", type=int, default=DEFAULT_MIN_PRIMARY_TOKENS)
    p.add_argument("--lcs-min-chars", type=int, default=DEFAULT_LCS_MIN_CHARS)
    p.add_argument("--min-matches", type=int, default=3)
    p.add_argument("--max-matches", type=int, default=200)
    _add_common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("index", help="build BM25 indexes for a book")
    p.add_argument("--book-id", required=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--k1", type=float, default=0.5)
    p.add_argument("--b", type=float, default=0.9)
    _add_common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train", help="train the dual encoder")
    p.add_argument("--data", required=True)
    p.add_argument("--left", type=int, default=4)
    p.add_argument("--right", type=int, default=4)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--lr-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--optimizer", choices=[enc.OPT_ADAPTIVE, enc.OPT_PLAIN],
                   default=enc.OPT_ADAPTIVE)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--buckets", type=int, default=2**18)
    p.add_argument("--hash-seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--out", default=None, help="params path (default: <artifacts>/params.rlde)")
    p.add_argument("--loss-log", default=None, help="write the loss trace as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export-emb", help="encode candidate sets with trained params")
    p.add_argument("--book-id", required=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--params", default=None, help="params file (default: stored params)")
    _add_common(p)
    p.set_defaults(func=cmd_export_emb)

    p = sub.add_parser("eval", help="evaluate a retriever on a dataset split")
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--retriever", choices=["bm25", "dense", "random"], default="bm25")
    p.add_argument("--left", type=int, default=4)
    p.add_argument("--right", type=int, default=4)
    p.add_argument("--ks", default=",".join(str(k) for k in DEFAULT_KS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default=None)
    p.add_argument("--report", default=None, help="write the full report JSON here")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("proxy", help="emit 3-option proxy trials")
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--n-trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--left", type=int, default=4)
    p.add_argument("--right", type=int, default=4)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_proxy)

    p = sub.add_parser("proxy-score", help="score proxy answers; 3 files add agreement stats")
    p.add_argument("--trials", required=True)
    p.add_argument("--answers", nargs="+", required=True)
    p.set_defaults(func=cmd_proxy_score)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None, help="static web UI directory to mount at /")
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
