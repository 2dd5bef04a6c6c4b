"""Command-line driver.

Every command takes ``--config FILE`` (JSON object of RunConfig fields),
``--seed`` and ``--jobs``. Precedence is flags, then the config file, then
the built-in defaults. Each command writes the effective configuration as
``<command>.config.json`` next to its outputs. Failures print a single
``superprune: error: ...`` line and exit nonzero:

====  ================================
2     bad configuration or arguments
3     IR or dataset parse error
4     missing or unreadable model
1     any other I/O failure
====  ================================
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import mlp
from ._io import write_atomic
from .cache import CacheCorruptError
from .corpus import CorpusError, flatten, load_corpus
from .dataset import LabeledDataset, build_dataset, cluster_centroids_balance, feature_scores, split
from .ir import IRError
from .mlp import SHIPPED_MODEL, ModelFormatError
from .pipeline import run_benchmark
from .workflow import (STRATEGIES, ConfigError, RunConfig, fit_model, load_config, loss_csv,
                       make_strategies, metrics_csv, pareto_csv, recall_vs_k, roc_csv, run_pipeline,
                       scores_csv)

PROG = "superprune"
DEFAULTS = RunConfig()


class MissingModel(Exception):
    pass


class ParseFailure(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _opt(p: argparse.ArgumentParser, flag: str, field: str, type=str, help: str = "",
         shown=None, **kw):
    default = getattr(DEFAULTS, field)
    if shown is None:
        shown = ",".join(map(str, default)) if isinstance(default, tuple) else default
    p.add_argument(flag, dest=field, type=type, default=None,
                   help=f"{help} (default: {shown})".strip(), **kw)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of run settings; flags override it")
    _opt(p, "--seed", "seed", int, "seed for every random choice")
    _opt(p, "--jobs", "jobs", int, "worker processes")


def _synth_oracle(p: argparse.ArgumentParser) -> None:
    _opt(p, "--corpus", "corpus", str, "corpus directory laid out as <name>/lhs_<k>.sir",
         shown="the bundled corpus")
    _opt(p, "--max-instructions", "max_instructions", int, "largest candidate size")
    _opt(p, "--candidate-cap", "candidate_cap", int, "candidates kept per LHS")
    _opt(p, "--exhaustive-bits", "exhaustive_bit_budget", int,
         "check exhaustively up to this many free input bits")
    _opt(p, "--samples", "sample_count", int, "random assignments beyond the exhaustive budget")
    _opt(p, "--candidate-timeout", "per_candidate_timeout", float, "seconds per oracle call")
    _opt(p, "--lhs-time-limit", "per_lhs_time_limit", float, "seconds per LHS")


def _threshold(p: argparse.ArgumentParser) -> None:
    _opt(p, "--threshold", "threshold", float, "minimum P(valid) for a candidate to be kept")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Learned candidate pruning for an enumerative superoptimizer.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Model defaults: k=14 selected features, hidden layers 16-32-16 with tanh, "
               "sigmoid output, Adam (lr 0.01, 400 epochs, batch 200), threshold 1e-4.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="enumerate, label and featurize candidates")
    p.add_argument("--out", required=True, help="dataset CSV to write")
    _synth_oracle(p)
    _common(p)

    p = sub.add_parser("balance", help="ClusterCentroids under-sampling of the majority class")
    p.add_argument("input", help="dataset CSV")
    p.add_argument("--out", required=True, help="balanced CSV to write")
    _common(p)

    p = sub.add_parser("select", help="mutual-information scores and the recall-vs-k sweep")
    p.add_argument("input", help="balanced dataset CSV; split into train and test internally")
    p.add_argument("--out-dir", required=True, help="directory for scores.csv and recall_vs_k.csv")
    _opt(p, "--k", "k", int, "features to keep")
    _opt(p, "--split-ratio", "split_ratio", float, "training fraction")
    _threshold(p)
    _common(p)

    p = sub.add_parser("train", help="train the classifier",
                       description="Select the k best features on the input, standardize, and "
                                   "train a k-16-32-16-1 network with tanh hidden layers and a "
                                   "sigmoid output using Adam on binary cross-entropy.")
    p.add_argument("input", help="training CSV")
    p.add_argument("--model", required=True, help="model file to write")
    p.add_argument("--loss-curve", help="per-epoch loss CSV to write")
    _opt(p, "--k", "k", int, "features to keep")
    _opt(p, "--lr", "learning_rate", float, "Adam learning rate")
    _opt(p, "--epochs", "epochs", int, "training epochs")
    _opt(p, "--batch-size", "batch_size", int, "mini-batch size")
    _threshold(p)
    _common(p)

    p = sub.add_parser("eval", help="metrics and ROC curve of a model on a labeled CSV")
    p.add_argument("model", help="model file")
    p.add_argument("input", help="test CSV")
    p.add_argument("--out-dir", required=True, help="directory for metrics.json and roc.csv")
    _threshold(p)
    _common(p)

    p = sub.add_parser("bench", help="run optimization strategies over a corpus")
    p.add_argument("--out", required=True, help="report CSV to write")
    p.add_argument("--strategy", action="append", choices=STRATEGIES, dest="strategies",
                   help="repeat to run several (default: all four)")
    p.add_argument("--model", help=f"model file (default: shipped {SHIPPED_MODEL.name})")
    _opt(p, "--cache", "cache", str, "off, cold, warm or cold+warm")
    _opt(p, "--cache-dir", "cache_dir", str, "where cache files live")
    _opt(p, "--probes", "probe_count", int, "quickcheck probe count")
    _threshold(p)
    _synth_oracle(p)
    _common(p)

    p = sub.add_parser("pareto", help="threshold sweep of the combined strategy")
    p.add_argument("--out", required=True, help="Pareto CSV to write")
    p.add_argument("--model", help=f"model file (default: shipped {SHIPPED_MODEL.name})")
    _opt(p, "--thresholds", "thresholds", _floats, "comma-separated thresholds")
    _opt(p, "--probes", "probe_count", int, "quickcheck probe count")
    _synth_oracle(p)
    _common(p)

    p = sub.add_parser("run", help="the whole scripted pipeline into one directory")
    p.add_argument("--out-dir", required=True)
    _opt(p, "--k", "k", int, "features to keep")
    _threshold(p)
    _synth_oracle(p)
    _common(p)
    return parser


_NOT_CONFIG = {"command", "config", "verbose", "out", "out_dir", "input", "model", "loss_curve"}


def effective_config(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config)
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if overrides.get("strategies") is not None:
        overrides["strategies"] = tuple(overrides["strategies"])
    try:
        return base.merged(**overrides)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def _echo(cfg: RunConfig, directory: Path, command: str) -> None:
    write_atomic(directory / f"{command}.config.json", cfg.to_json())


def _read_dataset(path: str) -> LabeledDataset:
    try:
        return LabeledDataset.from_csv(path)
    except (ValueError, IndexError) as e:
        raise ParseFailure(f"{path}: {e}") from e


def _model(path: str | None) -> mlp.MlpModel:
    p = Path(path) if path else SHIPPED_MODEL
    if not p.exists():
        raise MissingModel(f"model file {p} not found")
    try:
        return mlp.load(p)
    except ModelFormatError as e:
        raise MissingModel(str(e)) from e


def cmd_dataset(args, cfg: RunConfig) -> None:
    corpus = load_corpus(cfg.corpus)
    ds = build_dataset(flatten(corpus), cfg.synth, cfg.oracle, jobs=cfg.jobs)
    ds.to_csv(args.out)
    _echo(cfg, Path(args.out).parent, "dataset")
    n0, n1 = ds.class_counts()
    print(f"{len(ds)} rows, {n1} valid, {n0} invalid, {ds.provenance['dropped_unknown']} dropped")


def cmd_balance(args, cfg: RunConfig) -> None:
    ds = cluster_centroids_balance(_read_dataset(args.input), cfg.seed)
    ds.to_csv(args.out)
    _echo(cfg, Path(args.out).parent, "balance")
    n0, n1 = ds.class_counts()
    print(f"{len(ds)} rows, {n1} valid, {n0} invalid")


def cmd_select(args, cfg: RunConfig) -> None:
    out = Path(args.out_dir)
    train, test = split(_read_dataset(args.input), cfg.split_ratio, cfg.seed)
    scores = feature_scores(train)
    write_atomic(out / "scores.csv", scores_csv(scores, cfg.k))
    write_atomic(out / "recall_vs_k.csv", recall_vs_k(train, test, cfg.train_cfg, cfg.threshold))
    _echo(cfg, out, "select")
    print((out / "scores.csv").read_text(), end="")


def cmd_train(args, cfg: RunConfig) -> None:
    train = _read_dataset(args.input)
    model, curve = fit_model(train, cfg.k, cfg.train_cfg, cfg.threshold)
    mlp.save(model, args.model)
    if args.loss_curve:
        write_atomic(args.loss_curve, loss_csv(curve))
    _echo(cfg, Path(args.model).parent, "train")
    print(f"final loss {curve[-1]:.6f}; features {', '.join(model.mask.names)}")


def cmd_eval(args, cfg: RunConfig) -> None:
    model = _model(args.model)
    test = _read_dataset(args.input)
    out = Path(args.out_dir)
    metrics = mlp.evaluate(model, test.X, test.y, cfg.threshold).as_dict()
    metrics["threshold"] = cfg.threshold
    write_atomic(out / "metrics.json", json.dumps(metrics, indent=1, sort_keys=True) + "\n")
    write_atomic(out / "metrics_by_threshold.csv", metrics_csv(model, test))
    write_atomic(out / "roc.csv", roc_csv(model, test))
    _echo(cfg, out, "eval")
    print(json.dumps(metrics, sort_keys=True))


def cmd_bench(args, cfg: RunConfig) -> None:
    needs_model = any(s.startswith("prediprune") for s in cfg.strategies)
    model = _model(args.model or cfg.model) if needs_model else None
    modes = cfg.cache_modes
    cache_dir = cfg.cache_dir or (Path(args.out).parent / "cache" if modes != ("off",) else None)
    strategies = make_strategies(cfg.strategies, model, cfg.threshold)
    report = run_benchmark(load_corpus(cfg.corpus), strategies, seed=cfg.seed, cache_modes=modes,
                           cache_dir=cache_dir, synth_cfg=cfg.synth, oracle_cfg=cfg.oracle,
                           probe_count=cfg.probe_count, jobs=cfg.jobs)
    report.to_csv(args.out)
    _echo(cfg, Path(args.out).parent, "bench")
    for r in report.rows:
        if r["benchmark"] == "ALL":
            print(f"{r['strategy']:<24} cache={r['cache_mode']:<5} oracle_calls={r['oracle_calls']} "
                  f"pruned={r['pruning_rate_pct']}% cost_decrease={r['cost_decrease']}")


def cmd_pareto(args, cfg: RunConfig) -> None:
    model = _model(args.model or cfg.model)
    text = pareto_csv(load_corpus(cfg.corpus), model, cfg.thresholds, cfg)
    write_atomic(args.out, text)
    _echo(cfg, Path(args.out).parent, "pareto")
    print(text, end="")


def cmd_run(args, cfg: RunConfig) -> None:
    written = run_pipeline(cfg, args.out_dir)
    print("\n".join(str(p) for p in written.values()))


COMMANDS = {"dataset": cmd_dataset, "balance": cmd_balance, "select": cmd_select,
            "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench, "pareto": cmd_pareto,
            "run": cmd_run}


def _fail(kind: str, msg, code: int) -> int:
    text = " ".join(str(msg).split())
    print(f"{PROG}: error: {kind}: {text}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        return _fail("bad config", e, 2)
    except (IRError, CorpusError, ParseFailure) as e:
        return _fail("parse error", e, 3)
    except MissingModel as e:
        return _fail("missing model", e, 4)
    except (OSError, CacheCorruptError) as e:
        return _fail("i/o", e, 1)
    except ValueError as e:
        return _fail("invalid input", e, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
