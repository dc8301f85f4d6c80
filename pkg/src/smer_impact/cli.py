"""``smer-impact``: the pipeline as subcommands.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every output file is written atomically and accompanied by
``<output>.run.json`` recording the resolved configuration and the sha256 of
every input file. Reports carry no timestamps or absolute paths, so equal
configurations give byte-identical outputs (with ``--threads 1``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import embedding as emb
from .baselines import (AVERAGE_IMPORTANCE, GLOBAL_AVG_LIME, GLOBAL_LIME, METHODS, RANDOM, SMER,
                        SUM_IMPORTANCE, LocalExplanation, gale_global, lime_explain, random_importance,
                        ranking_csv, read_ranking, smer_global)
from .corpus import PipelineConfig, document_to_json, ingest, preprocess_all, read_documents, read_jsonl
from .errors import DataError, EmptyDocumentError, FidelityError, NumericError
from .evaluation import (RANDOM_SPLIT, SEMI_SPLIT, TIME_SPLIT, SplitSpec, aopc_global, auc, curve_csv,
                         extreme10, split)
from .models import (BOW, EMBEDDING, BowPredictor, EmbeddingPredictor, LinearClassifier, TrainConfig,
                     bow_matrix, build_dictionary, embedding_matrix, load_classifier, train_lr)
from .smer import (WordScore, cscore_table, explain_document, fidelity_violations, first_years,
                   neighbor_report, num_art, rank_words)
from .targets import LabeledDoc, LabelSpec, derive_labels, labeled_to_json, read_labeled

log = logging.getLogger("smer_impact")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

# options whose values are file locations; relative ones in a config file are
# resolved against the config file's directory
PATH_KEYS = {"input", "out", "embeddings", "model", "docs", "ranking", "explanations", "rejected",
             "corpus", "out_dir", "summary"}


class UsageError(Exception):
    def __init__(self, message, usage=""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}", self.format_usage())


# ---------------------------------------------------------------------------
# output helpers


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path``, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_text(obj) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


def jsonl_text(objs) -> str:
    return "".join(json.dumps(o, ensure_ascii=False) + "\n" for o in objs)


def _rel(path, start) -> str:
    return os.path.relpath(os.path.abspath(path), os.path.abspath(start)).replace(os.sep, "/")


def write_run_record(out, args, inputs: dict, summary: dict | None = None) -> None:
    """``<out>.run.json``: resolved options, input hashes and a short summary."""
    out = Path(out)
    config = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config"):
            continue
        if key in PATH_KEYS and value is not None:
            value = [_rel(v, out.parent) for v in value] if isinstance(value, list) else _rel(value, out.parent)
        config[key] = value
    record = {"command": args.command, "config": config,
              "inputs": {_rel(p, out.parent): sha256_file(p) for p in inputs.values() if p is not None}}
    if summary is not None:
        record["summary"] = summary
    write_atomic(out.with_name(out.name + ".run.json"), json_text(record))


def rows_text(out, columns, rows, meta: dict) -> str:
    """Rows as CSV (metadata as '# key: value' lines) or, for a .json path, as JSON."""
    if str(out).endswith(".json"):
        return json_text({"meta": meta, "rows": [dict(zip(columns, r)) for r in rows]})
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument parsing


def parse_years(text) -> list[int]:
    """``2019,2020`` or ``2019:2021`` (inclusive) or a mix."""
    years: set[int] = set()
    try:
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                lo, hi = (int(x) for x in part.split(":"))
                if lo > hi:
                    raise ValueError
                years.update(range(lo, hi + 1))
            else:
                years.add(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid year list {text!r}") from None
    return sorted(years)


def parse_window(text) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in str(text).split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid year window {text!r}; expected FIRST:LAST") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty year window {text!r}")
    return lo, hi


def _globals(p, with_seed=True):
    # repeated on each subcommand so they may follow it; SUPPRESS keeps the top-level value
    if with_seed:
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    p.add_argument("--log-level", default=argparse.SUPPRESS, help="logging level")
    p.add_argument("--config", default=argparse.SUPPRESS, help="TOML or JSON config file")


def _scorer_args(p, embeddings_required=True):
    p.add_argument("--model", help="classifier JSON from train-clf")
    p.add_argument("--embeddings", help="word2vec text vectors" + ("" if embeddings_required else
                                                                    " (embedding classifiers)"))


def build_parser() -> _Parser:
    parser = _Parser(prog="smer-impact", description="Impact prediction with embedding classifiers "
                     "and SMER word scores.")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads; 1 is deterministic")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    parser.add_argument("--config", help="TOML or JSON file; a [<subcommand>] table supplies defaults")
    sub = parser.add_subparsers(dest="command", metavar="<subcommand>", parser_class=_Parser)

    def add(name, func, help_text, with_seed=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _globals(p, with_seed)
        p.set_defaults(func=func)
        return p

    p = add("preprocess", cmd_preprocess, "Clean and tokenize a JSON-lines corpus.")
    p.add_argument("--in", dest="input", help="raw corpus (JSON lines)")
    p.add_argument("--out", help="tokenized documents (JSON lines)")
    p.add_argument("--rejected", help="optional JSON-lines list of rejected records")
    p.add_argument("--min-raw-chars", type=int, default=10)
    p.add_argument("--min-clean-chars", type=int, default=20)

    p = add("label", cmd_label, "Label documents high/low by citations against the scope median.")
    p.add_argument("--in", dest="input", help="tokenized documents")
    p.add_argument("--out", help="labeled documents")
    p.add_argument("--pub-years", type=parse_years, help="publication years, e.g. 2019,2020 or 2019:2020")
    p.add_argument("--cit-year", type=int, help="citation year")

    p = add("train-embeddings", cmd_train_embeddings, "Train skip-gram word vectors.")
    p.add_argument("--in", dest="input", help="tokenized documents")
    p.add_argument("--out", help="word2vec text vectors")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--min-count", type=int, default=1)

    p = add("train-clf", cmd_train_clf, "Fit the ridge logistic regression classifier.")
    p.add_argument("--in", dest="input", help="labeled documents")
    p.add_argument("--out", help="classifier JSON")
    p.add_argument("--features", choices=["w2v", "bow"], default="w2v")
    p.add_argument("--embeddings", help="word2vec text vectors (w2v features)")
    p.add_argument("--l2", type=float, default=1.0, help="ridge strength lambda (= 1/C)")
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)

    p = add("explain", cmd_explain, "Per-word scores of one document.")
    _scorer_args(p)
    p.add_argument("--docs", help="documents file containing the document")
    p.add_argument("--doc", help="doi of the document")
    p.add_argument("--out", help="report (.csv or .json)")

    p = add("rank-words", cmd_rank_words, "Rank vocabulary words by SMER score.")
    _scorer_args(p)
    p.add_argument("--docs", help="restrict to words of these documents and count NumArt")
    p.add_argument("--window", type=parse_window, help="NumArt year window FIRST:LAST")
    p.add_argument("--top", type=int, default=100)
    p.add_argument("--bottom", type=int, default=100)
    p.add_argument("--out", help="report (.csv or .json)")

    p = add("cscore", cmd_cscore, "Rank words by score times NumArt.")
    _scorer_args(p)
    p.add_argument("--docs", help="documents used for NumArt and first years")
    p.add_argument("--window", type=parse_window, help="year window FIRST:LAST")
    p.add_argument("--new-after", type=int, help="keep words first seen after this year")
    p.add_argument("--top", type=int, default=15)
    p.add_argument("--out", help="report (.csv or .json)")

    p = add("neighbors", cmd_neighbors, "Embedding neighbors of a word re-ranked by SMER score. "
            "Here --seed names the seed word; put a random seed before the subcommand.", with_seed=False)
    _scorer_args(p)
    p.add_argument("--seed", dest="seed_word", help="seed word")
    p.add_argument("--threshold", type=float, default=0.70)
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--docs", help="documents used for NumArt and first years")
    p.add_argument("--window", type=parse_window, help="NumArt year window FIRST:LAST")
    p.add_argument("--out", help="report (.csv or .json)")

    p = add("lime", cmd_lime, "Local surrogate explanations of documents.")
    _scorer_args(p, embeddings_required=False)
    p.add_argument("--docs", help="documents to explain")
    p.add_argument("--doc", action="append", help="explain only this doi (repeatable)")
    p.add_argument("--n-features", type=int, default=15)
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--out", help="explanations (JSON lines)")

    p = add("global-importance", cmd_global_importance, "Global word ranking for AOPC.")
    p.add_argument("--method", choices=[m for m in METHODS if m != "external"], default=SMER)
    _scorer_args(p)
    p.add_argument("--docs", help="vocabulary source (smer, random)")
    p.add_argument("--explanations", help="lime output (global_lime, global_avg_lime)")
    p.add_argument("--out", help="ranking CSV (word,score)")

    p = add("evaluate", cmd_evaluate, "Train on one side of a split and report test AUC.")
    p.add_argument("--in", dest="input", help="tokenized documents with citations")
    p.add_argument("--split", choices=[RANDOM_SPLIT, TIME_SPLIT, SEMI_SPLIT], default=RANDOM_SPLIT)
    p.add_argument("--metric", default="auc,extreme10-auc", help="comma list of auc, extreme10-auc")
    p.add_argument("--train-years", type=parse_years)
    p.add_argument("--train-cit-year", type=int)
    p.add_argument("--test-years", type=parse_years)
    p.add_argument("--test-cit-year", type=int)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--features", choices=["w2v", "bow"], default="w2v")
    p.add_argument("--embeddings", help="word2vec text vectors (w2v features)")
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", help="metrics JSON")

    p = add("aopc", cmd_aopc, "AOPC-global curve of a ranking.")
    _scorer_args(p, embeddings_required=False)
    p.add_argument("--docs", help="test documents")
    p.add_argument("--ranking", help="ranking CSV from global-importance")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", help="curve CSV (k,mean_drop)")
    p.add_argument("--summary", help="optional JSON with the areas")

    p = add("pipeline", cmd_pipeline, "preprocess, label, train-embeddings, train-clf, rank-words, aopc.")
    p.add_argument("--corpus", help="raw corpus (JSON lines)")
    p.add_argument("--out-dir", help="directory for all artifacts")
    p.add_argument("--pub-years", type=parse_years)
    p.add_argument("--cit-year", type=int)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--min-raw-chars", type=int, default=10)
    p.add_argument("--min-clean-chars", type=int, default=20)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--top", type=int, default=100)
    p.add_argument("--bottom", type=int, default=100)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--with-lime", action="store_true", help="also evaluate the two GALE rankings")
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--n-features", type=int, default=15)
    return parser


def _config_file(argv) -> str | None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.config


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            return json.loads(text)
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        return tomllib.loads(text)
    except ValueError as exc:
        raise DataError(f"{path}: cannot parse config ({exc})") from None


def _apply_config(parser: _Parser, cfg: dict, base: Path) -> None:
    """Install config values as parser defaults, converting them like command-line strings."""
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))

    def install(p, values, where):
        actions = {a.dest: a for a in p._actions}
        defaults = {}
        for key, value in values.items():
            dest = key.replace("-", "_")
            if dest not in actions or dest in ("help", "config", "func", "command"):
                raise UsageError(f"{where}: unknown option {key!r}", parser.format_usage())
            action = actions[dest]
            if isinstance(action, argparse._AppendAction):
                value = [str(v) for v in (value if isinstance(value, list) else [value])]
                defaults[dest] = value
                continue
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            if action.type is not None and not isinstance(value, bool):
                try:
                    value = action.type(str(value))
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"{where}: option {key!r}: {exc}", parser.format_usage()) from None
            if dest in PATH_KEYS and isinstance(value, str) and not os.path.isabs(value):
                value = str(base / value)
            defaults[dest] = value
        p.set_defaults(**defaults)

    top = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    for key in top:
        if key.replace("-", "_") not in ("seed", "threads", "log_level"):
            raise UsageError(f"config: unknown top-level key {key!r}", parser.format_usage())
    install(parser, top, "config")
    for name, values in cfg.items():
        if isinstance(values, dict):
            if name not in subparsers.choices:
                raise UsageError(f"config: unknown subcommand table [{name}]", parser.format_usage())
            install(subparsers.choices[name], values, f"config [{name}]")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + ("in" if n == "input" else n.replace("_", "-")) for n in missing)
        raise UsageError(f"smer-impact {args.command}: error: missing required option(s): {flags}")


# ---------------------------------------------------------------------------
# shared loading


def _load_vectors(path):
    if path is None:
        raise UsageError("missing required option: --embeddings")
    return emb.load(path)


def _load_scorer(args, need_embeddings=True):
    """Classifier plus (for embedding classifiers) the vectors it was trained on."""
    _require(args, "model")
    clf, obj = load_classifier(args.model)
    model = None
    if clf.feature_space == EMBEDDING:
        model = _load_vectors(args.embeddings)
        expected = obj.get("embedding_sha256")
        if expected and expected != sha256_file(args.embeddings):
            raise DataError(f"{args.embeddings} is not the embedding file {args.model} was trained with")
        if model.dim != clf.dim:
            raise DataError(f"{args.model} expects {clf.dim}-dimensional vectors, {args.embeddings} has {model.dim}")
    elif need_embeddings:
        raise DataError(f"{args.model} is a bag-of-words classifier; word scores need an embedding classifier")
    return clf, model


def _meta(args, *keys) -> dict:
    """Content hashes of the named input files, for report headers."""
    out = {}
    for key in keys:
        path = getattr(args, key, None)
        if path is not None:
            out[f"{key}_sha256"] = sha256_file(path)
    return out


def _predictor(clf: LinearClassifier, model):
    return EmbeddingPredictor(clf, model) if clf.feature_space == EMBEDDING else BowPredictor(clf)


def _embeddable(docs, model):
    """Documents with at least one in-vocabulary token; the rest are logged and dropped."""
    kept = [d for d in docs if any(t in model.index for t in _doc(d).tokens)]
    if len(kept) < len(docs):
        log.warning("%d documents without in-vocabulary tokens skipped", len(docs) - len(kept))
    return kept


def _doc(x):
    return x.doc if isinstance(x, LabeledDoc) else x


def _fit(labeled, features, model, cfg: TrainConfig):
    docs = [ld.doc for ld in labeled]
    y = [ld.y for ld in labeled]
    if features == "w2v":
        return train_lr(embedding_matrix(model, docs), y, cfg, EMBEDDING)
    dictionary = build_dictionary(docs)
    return train_lr(bow_matrix(docs, dictionary), y, cfg, BOW, dictionary)


WORD_COLUMNS = ["rank", "word", "score", "logit", "num_art", "cscore", "first_year"]


def _word_rows(ranked_with_rank, with_cosine=False):
    cols = WORD_COLUMNS + (["cosine"] if with_cosine else [])
    return cols, [[ws.as_row(rank).get(c) for c in cols] for rank, ws in ranked_with_rank]


# ---------------------------------------------------------------------------
# subcommands


def cmd_preprocess(args):
    _require(args, "input", "out")
    records = ingest(args.input)
    docs, rejected = preprocess_all(records, PipelineConfig(args.min_raw_chars, args.min_clean_chars))
    write_atomic(args.out, jsonl_text(document_to_json(d) for d in docs))
    if args.rejected:
        write_atomic(args.rejected, jsonl_text({"doi": r.doi, "reason": r.reason} for r in rejected))
    reasons = Counter(r.reason for r in rejected)
    write_run_record(args.out, args, {"input": args.input},
                     {"records": len(records), "documents": len(docs), "rejected": dict(sorted(reasons.items()))})


def cmd_label(args):
    _require(args, "input", "out", "pub_years", "cit_year")
    labeled = derive_labels(read_documents(args.input), LabelSpec(args.pub_years, args.cit_year))
    write_atomic(args.out, jsonl_text(labeled_to_json(ld) for ld in labeled))
    write_run_record(args.out, args, {"input": args.input},
                     {"documents": len(labeled), "high": sum(ld.y for ld in labeled)})


def _skipgram_config(args) -> emb.SkipgramConfig:
    return emb.SkipgramConfig(args.dim, args.window, args.negatives, args.epochs, args.learning_rate,
                              args.min_count, args.seed, args.threads)


def cmd_train_embeddings(args):
    _require(args, "input", "out")
    model = emb.train_skipgram(read_documents(args.input), _skipgram_config(args))
    buf = io.StringIO()
    emb.write_text(model, buf)
    write_atomic(args.out, buf.getvalue())
    write_run_record(args.out, args, {"input": args.input}, {"vocabulary": len(model), "dim": model.dim})


def cmd_train_clf(args):
    _require(args, "input", "out")
    labeled = read_labeled(args.input)
    model = None
    if args.features == "w2v":
        model = _load_vectors(args.embeddings)
        labeled = _embeddable(labeled, model)
    clf = _fit(labeled, args.features, model, TrainConfig(args.l2, args.max_iters, args.tol, args.seed))
    if not clf.converged:
        log.warning("logistic regression stopped after %d iterations without converging", len(clf.history) - 1)
    digest = sha256_file(args.embeddings) if model is not None else None
    write_atomic(args.out, json_text(clf.to_json(digest)))
    write_run_record(args.out, args, {"input": args.input, "embeddings": args.embeddings if model else None},
                     {"documents": len(labeled), "converged": clf.converged,
                      "iterations": len(clf.history) - 1, "objective": clf.history[-1]})


def cmd_explain(args):
    _require(args, "docs", "doc", "out")
    clf, model = _load_scorer(args)
    docs = {d.doi: d for d in read_documents(args.docs)}
    if args.doc not in docs:
        raise DataError(f"{args.docs}: no document with doi {args.doc!r}")
    expl = explain_document(clf, model, docs[args.doc])
    meta = {"doi": expl.doi, "logit": expl.logit, "score": expl.score, "oov": " ".join(expl.oov),
            **_meta(args, "model", "embeddings")}
    rows = [[i, ws.word, ws.score, ws.logit] for i, ws in enumerate(expl.words)]
    write_atomic(args.out, rows_text(args.out, ["position", "word", "score", "logit"], rows, meta))
    write_run_record(args.out, args, {"model": args.model, "embeddings": args.embeddings, "docs": args.docs})


def cmd_rank_words(args):
    _require(args, "out")
    clf, model = _load_scorer(args)
    counts, first, vocab = {}, {}, None
    if args.docs:
        docs = read_documents(args.docs)
        counts, first = num_art(docs, args.window), first_years(docs)
        vocab = sorted(w for w in first if w in model.index)
    ranked = rank_words(clf, model, vocab)
    ranked = [WordScore(ws.word, ws.logit, counts.get(ws.word, 0), first.get(ws.word)) for ws in ranked]
    n = len(ranked)
    if args.top + args.bottom >= n:
        chosen = list(enumerate(ranked, 1))
    else:
        chosen = list(enumerate(ranked[:args.top], 1))
        chosen += [(n - args.bottom + i + 1, ws) for i, ws in enumerate(ranked[n - args.bottom:])]
    cols, rows = _word_rows(chosen)
    meta = {"words": n, **_meta(args, "model", "embeddings", "docs")}
    write_atomic(args.out, rows_text(args.out, cols, rows, meta))
    write_run_record(args.out, args, {"model": args.model, "embeddings": args.embeddings, "docs": args.docs})


def cmd_cscore(args):
    _require(args, "docs", "window", "out")
    clf, model = _load_scorer(args)
    table = cscore_table(clf, model, read_documents(args.docs), args.window, args.new_after)
    cols, rows = _word_rows(list(enumerate(table[:args.top], 1)))
    meta = {"window": f"{args.window[0]}:{args.window[1]}", **_meta(args, "model", "embeddings", "docs")}
    write_atomic(args.out, rows_text(args.out, cols, rows, meta))
    write_run_record(args.out, args, {"model": args.model, "embeddings": args.embeddings, "docs": args.docs})


def cmd_neighbors(args):
    _require(args, "seed_word", "out")
    clf, model = _load_scorer(args)
    docs = read_documents(args.docs) if args.docs else None
    rows_ws = neighbor_report(clf, model, args.seed_word, args.threshold, args.k, docs, args.window)
    cols, rows = _word_rows(list(enumerate(rows_ws, 1)), with_cosine=True)
    meta = {"seed_word": args.seed_word, **_meta(args, "model", "embeddings", "docs")}
    write_atomic(args.out, rows_text(args.out, cols, rows, meta))
    write_run_record(args.out, args, {"model": args.model, "embeddings": args.embeddings, "docs": args.docs})


def _explain_all(predict, docs, n_features, n_samples, seed, threads):
    def one(d):
        return lime_explain(predict, d, n_features, n_samples, seed)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, docs))
    return [one(d) for d in docs]


def cmd_lime(args):
    _require(args, "docs", "out")
    clf, model = _load_scorer(args, need_embeddings=False)
    docs = read_documents(args.docs)
    if args.doc:
        wanted = set(args.doc)
        missing = wanted - {d.doi for d in docs}
        if missing:
            raise DataError(f"{args.docs}: no document with doi {sorted(missing)[0]!r}")
        docs = [d for d in docs if d.doi in wanted]
    expls = _explain_all(_predictor(clf, model), docs, args.n_features, args.n_samples, args.seed, args.threads)
    write_atomic(args.out, jsonl_text(e.to_json() for e in expls))
    write_run_record(args.out, args, {"model": args.model, "embeddings": args.embeddings, "docs": args.docs},
                     {"documents": len(expls)})


def cmd_global_importance(args):
    _require(args, "out")
    inputs = {}
    if args.method == SMER:
        clf, model = _load_scorer(args)
        vocab = None
        if args.docs:
            vocab = sorted({t for d in read_documents(args.docs) for t in d.tokens if t in model.index})
        gi = smer_global(clf, model, vocab)
        inputs = {"model": args.model, "embeddings": args.embeddings, "docs": args.docs}
    elif args.method == RANDOM:
        if args.docs:
            vocab = {t for d in read_documents(args.docs) for t in d.tokens}
        elif args.embeddings:
            vocab = _load_vectors(args.embeddings).words
        else:
            raise UsageError("global-importance --method random needs --docs or --embeddings")
        gi = random_importance(vocab, args.seed)
        inputs = {"docs": args.docs, "embeddings": args.embeddings}
    else:
        _require(args, "explanations")
        expls = [LocalExplanation.from_json(obj) for _, obj in read_jsonl(args.explanations)]
        gi = gale_global(expls, SUM_IMPORTANCE if args.method == GLOBAL_LIME else AVERAGE_IMPORTANCE)
        inputs = {"explanations": args.explanations}
    comments = [f"{k}: {v}" for k, v in _meta(args, *[k for k, v in inputs.items() if v]).items()]
    write_atomic(args.out, ranking_csv(gi, comments))
    write_run_record(args.out, args, inputs, {"words": len(gi.scores)})


def cmd_evaluate(args):
    _require(args, "input", "out", "train_years", "train_cit_year")
    metrics = [m.strip() for m in args.metric.split(",") if m.strip()]
    unknown = set(metrics) - {"auc", "extreme10-auc"}
    if unknown:
        raise UsageError(f"smer-impact evaluate: error: unknown metric {sorted(unknown)[0]!r}")
    try:
        spec = SplitSpec(args.split, args.train_years, args.train_cit_year, args.test_years or (),
                         args.test_cit_year, args.train_fraction, args.seed)
    except ValueError as exc:
        raise UsageError(f"smer-impact evaluate: error: {exc}") from None
    docs = read_documents(args.input)
    model = _load_vectors(args.embeddings) if args.features == "w2v" else None
    train, test = split(docs, spec)
    if model is not None:
        train, test = _embeddable(train, model), _embeddable(test, model)
    clf = _fit(train, args.features, model, TrainConfig(args.l2, args.max_iters, args.tol, args.seed))
    predict = _predictor(clf, model)
    test_cit = spec.test_cit_year if spec.test_cit_year is not None else spec.train_cit_year
    result = {"split": spec.kind, "train": len(train), "test": len(test)}
    if "auc" in metrics:
        result["auc"] = auc(predict([ld.doc.tokens for ld in test]), [ld.y for ld in test])
    if "extreme10-auc" in metrics:
        ext = extreme10(test, test_cit)
        result["extreme10_n"] = len(ext)
        result["extreme10_auc"] = auc(predict([ld.doc.tokens for ld in ext]), [ld.y for ld in ext])
    result.update(_meta(args, "embeddings"))
    write_atomic(args.out, json_text(result))
    write_run_record(args.out, args, {"input": args.input, "embeddings": args.embeddings})


def cmd_aopc(args):
    _require(args, "docs", "ranking", "out")
    clf, model = _load_scorer(args, need_embeddings=False)
    ranking = read_ranking(args.ranking)
    docs = read_documents(args.docs)
    curve = aopc_global(_predictor(clf, model), docs, ranking, args.k)
    meta = {"method": ranking.method, "area": curve.area, "raw_area": curve.raw_area,
            **_meta(args, "model", "embeddings", "ranking")}
    write_atomic(args.out, curve_csv(curve, [f"{k}: {v!r}" if isinstance(v, float) else f"{k}: {v}"
                                             for k, v in meta.items()]))
    summary = {"method": ranking.method, "area": curve.area, "raw_area": curve.raw_area}
    if args.summary:
        write_atomic(args.summary, json_text({**summary, "points": curve.points, **_meta(args, "model", "embeddings")}))
    write_run_record(args.out, args, {"model": args.model, "embeddings": args.embeddings, "docs": args.docs,
                                      "ranking": args.ranking}, summary)


def cmd_pipeline(args):
    _require(args, "corpus", "out_dir", "pub_years", "cit_year")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = ingest(args.corpus)
    docs, rejected = preprocess_all(records, PipelineConfig(args.min_raw_chars, args.min_clean_chars))
    write_atomic(out / "documents.jsonl", jsonl_text(document_to_json(d) for d in docs))

    labeled = derive_labels(docs, LabelSpec(args.pub_years, args.cit_year))
    write_atomic(out / "labeled.jsonl", jsonl_text(labeled_to_json(ld) for ld in labeled))

    model = emb.train_skipgram(docs, _skipgram_config(args))
    buf = io.StringIO()
    emb.write_text(model, buf)
    write_atomic(out / "vectors.txt", buf.getvalue())
    # score with the vectors as written so the saved artifacts reproduce every number
    model = emb.load(out / "vectors.txt")
    vec_sha = sha256_file(out / "vectors.txt")

    train, test = split(docs, SplitSpec(RANDOM_SPLIT, args.pub_years, args.cit_year,
                                        train_fraction=args.train_fraction, seed=args.seed))
    train, test = _embeddable(train, model), _embeddable(test, model)
    clf = _fit(train, "w2v", model, TrainConfig(args.l2, args.max_iters, args.tol, args.seed))
    write_atomic(out / "classifier.json", json_text(clf.to_json(vec_sha)))
    write_atomic(out / "test.jsonl", jsonl_text(labeled_to_json(ld) for ld in test))
    hashes = {"embeddings_sha256": vec_sha, "model_sha256": sha256_file(out / "classifier.json")}

    predict = EmbeddingPredictor(clf, model)
    test_docs = [ld.doc for ld in test]
    p_test = predict([d.tokens for d in test_docs])
    summary = {"records": len(records), "documents": len(docs), "rejected": len(rejected),
               "labeled": len(labeled), "high": sum(ld.y for ld in labeled),
               "train": len(train), "test": len(test), "vocabulary": len(model),
               "converged": clf.converged, "auc": auc(p_test, [ld.y for ld in test])}
    if len(test) >= 20:
        ext = extreme10(test, args.cit_year)
        summary["extreme10_auc"] = auc(predict([ld.doc.tokens for ld in ext]), [ld.y for ld in ext])

    train_vocab = sorted({t for ld in train for t in ld.doc.tokens if t in model.index})
    rankings = {SMER: smer_global(clf, model, train_vocab), RANDOM: random_importance(train_vocab, args.seed)}
    if args.with_lime:
        expls = _explain_all(predict, test_docs, args.n_features, args.n_samples, args.seed, args.threads)
        write_atomic(out / "lime.jsonl", jsonl_text(e.to_json() for e in expls))
        rankings[GLOBAL_LIME] = gale_global(expls, SUM_IMPORTANCE)
        rankings[GLOBAL_AVG_LIME] = gale_global(expls, AVERAGE_IMPORTANCE)

    ranked = rank_words(clf, model, train_vocab)
    counts, first = num_art(docs), first_years(docs)
    ranked = [WordScore(ws.word, ws.logit, counts.get(ws.word, 0), first.get(ws.word)) for ws in ranked]
    n = len(ranked)
    top, bottom = min(args.top, n), min(args.bottom, max(n - args.top, 0))
    chosen = list(enumerate(ranked[:top], 1)) + [(n - bottom + i + 1, ws) for i, ws in enumerate(ranked[n - bottom:])]
    cols, rows = _word_rows(chosen)
    write_atomic(out / "words.csv", rows_text("words.csv", cols, rows, hashes))

    summary["aopc"] = {}
    header = [f"{k}: {v}" for k, v in hashes.items()]
    for method, gi in rankings.items():
        write_atomic(out / f"ranking_{method}.csv", ranking_csv(gi, header))
        curve = aopc_global(predict, test_docs, gi, args.k)
        write_atomic(out / f"aopc_{method}.csv", curve_csv(curve, [f"method: {method}"] + header))
        summary["aopc"][method] = {"area": curve.area, "raw_area": curve.raw_area,
                                   "max_abs_drop": max(abs(v) for _, v in curve.points)}

    bad = fidelity_violations(clf, model, docs)
    summary["fidelity"] = {"checked": sum(1 for d in docs if any(t in model.index for t in d.tokens)),
                           "violations": len(bad)}
    summary.update(hashes)
    write_atomic(out / "summary.json", json_text(summary))
    write_run_record(out / "summary.json", args, {"corpus": args.corpus}, None)
    if bad:
        raise FidelityError(f"{len(bad)} documents fail the fidelity identity, first {bad[0]}")


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        cfg_path = _config_file(argv)
        if cfg_path:
            _apply_config(parser, load_config(cfg_path), Path(cfg_path).resolve().parent)
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("smer-impact: error: a subcommand is required", parser.format_usage())
        level = getattr(logging, str(args.log_level).upper(), None)
        if not isinstance(level, int):
            raise UsageError(f"smer-impact: error: unknown log level {args.log_level!r}")
        if args.threads < 1:
            raise UsageError("smer-impact: error: --threads must be >= 1")
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        args.func(args)
        return 0
    except SystemExit as exc:
        # --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, EmptyDocumentError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # invalid option values caught by library constructors (e.g. negative dim)
        print(f"smer-impact: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
