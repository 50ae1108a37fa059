"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 training aborted.
Errors are reported on stderr as a single ``ERROR:<CODE>: message`` line.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import DataConfig, RunConfig, load_config
from .corpus import CorpusError, CorpusStats, corpus_stats, load_corpus, prepare_corpus
from .evaluation import evaluate, report
from .graph import GraphError, build_graph
from .inference import InputError, predict_article, predict_segments
from .model import ModelConfig, count_params
from .synthgen import GenerationError, generate_splits, partition_corpus, read_samples, write_samples
from .textenc import (EmbeddingFormatError, Vocabulary, build_vocab, load_embedding_table, load_embeddings,
                      save_embedding_table)
from .training import TrainConfig, TrainingAborted, train

log = logging.getLogger("incongruity")

PAPER_PARAM_COUNT = 1_214_702
SPLITS = ("train", "dev", "test")
EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 2, 3, 4


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage {stage}: {exc}")
        self.cause = exc


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _types(text: str) -> tuple[str, ...]:
    return tuple(t.strip().upper() for t in text.split(",") if t.strip())


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    articles = prepare_corpus(load_corpus(args.corpus))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for a in articles:
                fh.write(json.dumps(a.to_record(), ensure_ascii=False) + "\n")
    print(CorpusStats.header())
    print(corpus_stats(articles).format_row("corpus") if articles else "(no articles kept)")
    return 0


def _generate(corpus_path, out_dir: Path, data: DataConfig, seed: int) -> dict:
    articles = prepare_corpus(load_corpus(corpus_path))
    split = partition_corpus(articles, data.ratios, seed)
    datasets = generate_splits(split, data.incongruent_fraction, data.types, seed, data.cross_category)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SPLITS:
        write_samples(datasets[name], out_dir / f"{name}.jsonl")
    ids = {name: [a.id for a in getattr(split, name)] for name in (*SPLITS, "pool")}
    (out_dir / "split.json").write_text(json.dumps(ids, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
    print(CorpusStats.header())
    for name in SPLITS:
        print(corpus_stats(datasets[name]).format_row(name))
    return datasets


def cmd_generate(args) -> int:
    data = DataConfig(ratios=args.ratios, incongruent_fraction=args.fraction, types=args.types,
                      cross_category=args.cross_category)
    _generate(args.corpus, Path(args.out), data, args.seed)
    return 0


def _vocab(train_path, embeddings, min_count: int, dim: int, seed: int, out_dir: Path | None):
    vocab = build_vocab(read_samples(train_path), min_count)
    table = load_embeddings(embeddings, vocab, dim, seed)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        vocab.save(out_dir / "vocab.json")
        save_embedding_table(table, out_dir / "embeddings.npz")
    print(f"vocabulary size {len(vocab)} (min count {min_count}); embedding coverage {table.coverage_report()}")
    return vocab, table


def cmd_vocab(args) -> int:
    out = Path(args.out) if args.out else Path(args.train).parent
    _vocab(args.train, args.embeddings, args.min_count, args.dim, args.seed, out)
    return 0


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    for flag, section, key in (("lr", "train", "lr0"), ("batch_size", "train", "batch_size"),
                               ("epochs", "train", "epochs"), ("grad_clip", "train", "grad_clip"),
                               ("edge_loss_weight", "model", "edge_loss_weight")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(getattr(cfg, section), key, value)
    return cfg.with_seed(getattr(args, "seed", None))


def _train(data_dir: Path, cfg: RunConfig, checkpoint: Path, history_path: Path,
           vocab: Vocabulary | None = None, table=None):
    train_samples = read_samples(data_dir / "train.jsonl")
    dev_samples = read_samples(data_dir / "dev.jsonl")
    if vocab is None:
        if (data_dir / "vocab.json").exists() and (data_dir / "embeddings.npz").exists():
            vocab = Vocabulary.load(data_dir / "vocab.json")
            table = load_embedding_table(data_dir / "embeddings.npz")
        else:
            vocab = build_vocab(train_samples, cfg.data.min_count)
            table = load_embeddings(cfg.data.embeddings, vocab, cfg.model.embed_dim, cfg.seed)
    result = train(train_samples, dev_samples, vocab, table.matrix, cfg.model, cfg.train)
    n = count_params(result.model.params)
    log.info("trainable parameters: %d (reference architecture reports %d; exact match not expected)",
             n, PAPER_PARAM_COUNT)
    state = {"epochs": len(result.history.epochs), "steps": result.history.steps,
             "best_epoch": result.history.best_epoch, "optimizer_t": result.optimizer.t, "seed": cfg.seed}
    save_checkpoint(checkpoint, result.model, vocab, state, table.coverage_rate)
    result.history.write(history_path)
    return result, vocab


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.embeddings:
        cfg.data.embeddings = args.embeddings
    log.info("resolved config:\n%s", cfg.dumps())
    out = Path(args.out)
    history = Path(args.history) if args.history else out.with_suffix(".history.jsonl")
    result, _ = _train(Path(args.data), cfg, out, history)
    best = result.history.epochs[result.history.best_epoch]
    print(f"best epoch {best.epoch}: dev acc_doc {best.val_acc_doc:.4f} acc_para {best.val_acc_para:.4f} "
          f"auc {best.val_auc:.4f}; checkpoint {out}; history {history}")
    return 0


def _data_files(paths) -> list[tuple[str, Path]]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            if not (p / "test.jsonl").exists():
                raise FileNotFoundError(f"{p}: no test.jsonl in directory")
            files.append((p.name, p / "test.jsonl"))
        else:
            files.append((p.stem, p))
    return files


def _evaluate(checkpoint, data_paths, out) -> str:
    model, vocab, _ = load_checkpoint(checkpoint)
    rows = []
    for name, path in _data_files(data_paths):
        graphs = [build_graph(s, vocab, model.config.token_cap) for s in read_samples(path)]
        rows.append((name, evaluate(model, graphs)))
    table = report(rows, out)
    for name, m in rows:
        log.info("%s: auc %.4f", name, m.auc)
    return table


def cmd_evaluate(args) -> int:
    print(_evaluate(args.checkpoint, args.data, args.out))
    return 0


def cmd_predict(args) -> int:
    model, vocab, _ = load_checkpoint(args.checkpoint)
    segments = list(args.segments or [])
    if args.segments_file:
        segments += [ln.strip() for ln in Path(args.segments_file).read_text(encoding="utf-8").splitlines() if ln.strip()]
    body = args.body
    if args.body_file:
        body = Path(args.body_file).read_text(encoding="utf-8")
    if segments and body:
        raise UsageError("give either a body or segments, not both")
    anchor = args.anchor or args.headline
    if not anchor:
        raise UsageError("--headline (or --anchor) is required")
    if segments:
        rep = predict_segments(model, vocab, anchor, segments)
    elif body:
        rep = predict_article(model, vocab, anchor, body)
    else:
        raise UsageError("nothing to score: pass --body/--body-file or --segments/--segments-file")
    print(rep.to_text())
    if args.out:
        Path(args.out).write_text(json.dumps(rep.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.embeddings:
        cfg.data.embeddings = args.embeddings
    log.info("resolved config:\n%s", cfg.dumps())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps() + "\n", encoding="utf-8")
    data_dir = out / "data"
    stages = [
        ("generate", lambda: _generate(args.corpus, data_dir, cfg.data, cfg.seed)),
        ("vocab", lambda: _vocab(data_dir / "train.jsonl", cfg.data.embeddings, cfg.data.min_count,
                                 cfg.model.embed_dim, cfg.seed, data_dir)),
        ("train", lambda: _train(data_dir, cfg, out / "model.npz", out / "history.jsonl")),
        ("evaluate", lambda: print(_evaluate(out / "model.npz", [data_dir], out / "report.csv"))),
    ]
    for name, run in stages:
        log.info("pipeline stage: %s", name)
        try:
            run()
        except (TrainingAborted, UsageError):
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
    return 0


# ---------------------------------------------------------------------------
# parser


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except when there is none or the help text already names it."""

    def _get_help_string(self, action):
        if action.default is None or "(default" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = argparse.ArgumentParser(prog="incongruity", formatter_class=fmt,
                                     description="Headline/body incongruity detection with a graph dual encoder.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    m, t, d = ModelConfig(), TrainConfig(), DataConfig()

    p = sub.add_parser("ingest", formatter_class=fmt, help="clean, segment and filter a raw corpus")
    p.add_argument("--corpus", required=True, help="JSON-lines corpus with id, headline, content")
    p.add_argument("--out", help="write segmented articles as JSON lines")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("generate", formatter_class=fmt, help="build labeled train/dev/test splits")
    p.add_argument("--corpus", required=True, help="JSON-lines corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--fraction", type=float, default=d.incongruent_fraction, help="share of incongruent samples")
    p.add_argument("--types", type=_types, default=",".join(d.types), help="comma-separated mix-up types from I,II,III,IV")
    p.add_argument("--ratios", type=_floats, default=",".join(map(str, d.ratios)),
                   help="train,dev,test,pool fractions")
    p.add_argument("--cross-category", action="store_true", help="draw donors from other categories only")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("vocab", formatter_class=fmt, help="build the vocabulary and embedding table")
    p.add_argument("--train", required=True, help="training split (JSON lines)")
    p.add_argument("--embeddings", help="pre-trained word vectors (text format)")
    p.add_argument("--min-count", type=int, default=d.min_count, help="minimum training-split token count")
    p.add_argument("--dim", type=int, default=m.embed_dim, help="embedding dimension")
    p.add_argument("--seed", type=int, default=0, help="seed for vectors of tokens missing from the file")
    p.add_argument("--out", help="output directory (default: next to the training split)")
    p.set_defaults(func=cmd_vocab)

    def hyper(p):
        p.add_argument("--config", help="JSON run config; flags below override it")
        p.add_argument("--seed", type=int, default=None, help="master seed (default: config value, 0)")
        p.add_argument("--embeddings", help="pre-trained word vectors (text format)")
        p.add_argument("--lr", type=float, default=None, help=f"initial learning rate (default: {t.lr0})")
        p.add_argument("--batch-size", type=int, default=None, help=f"graphs per step (default: {t.batch_size})")
        p.add_argument("--epochs", type=int, default=None, help=f"epochs (default: {t.epochs})")
        p.add_argument("--grad-clip", type=float, default=None, help=f"global gradient norm cap (default: {t.grad_clip})")
        p.add_argument("--edge-loss-weight", type=float, default=None,
                       help=f"edge loss trade-off (default: {m.edge_loss_weight})")

    p = sub.add_parser("train", formatter_class=fmt, help="train a model on generated splits")
    p.add_argument("--data", required=True, help="directory with train.jsonl and dev.jsonl")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--history", help="per-epoch history (default: <out>.history.jsonl)")
    hyper(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", formatter_class=fmt, help="score labeled datasets")
    p.add_argument("--checkpoint", required=True, help="model checkpoint (.npz)")
    p.add_argument("--data", required=True, nargs="+", help="JSON-lines files or dataset directories")
    p.add_argument("--out", help="CSV report path (a .json sidecar is written next to it)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", formatter_class=fmt, help="per-segment incongruity report")
    p.add_argument("--checkpoint", required=True, help="model checkpoint (.npz)")
    p.add_argument("--headline", help="headline text")
    p.add_argument("--anchor", help="custom anchor text used as the headline node")
    p.add_argument("--body", help="article body text")
    p.add_argument("--body-file", help="file holding the article body")
    p.add_argument("--segments", nargs="+", help="free-text segments, one node each (e.g. comments)")
    p.add_argument("--segments-file", help="file with one segment per line")
    p.add_argument("--out", help="also write the report as JSON")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pipeline", formatter_class=fmt, help="generate, vocab, train and evaluate in one go")
    p.add_argument("--corpus", required=True, help="JSON-lines corpus")
    p.add_argument("--out", required=True, help="output directory")
    hyper(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


DATA_ERRORS = (CorpusError, GraphError, GenerationError, EmbeddingFormatError, InputError,
               FileNotFoundError, json.JSONDecodeError, ValueError, KeyError)


def _exit_code(exc: Exception) -> tuple[int, str]:
    if isinstance(exc, StageError):
        code, _ = _exit_code(exc.cause)
        return code, {EXIT_DATA: "DATA", EXIT_TRAIN: "TRAIN", EXIT_USAGE: "USAGE"}[code]
    if isinstance(exc, TrainingAborted):
        return EXIT_TRAIN, "TRAIN"
    if isinstance(exc, UsageError):
        return EXIT_USAGE, "USAGE"
    if isinstance(exc, DATA_ERRORS + (OSError,)):
        return EXIT_DATA, "DATA"
    raise exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    np.seterr(over="ignore", under="ignore")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code, tag = _exit_code(exc)
        msg = str(exc).replace("\n", " ")
        print(f"ERROR:{tag}: {msg}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
