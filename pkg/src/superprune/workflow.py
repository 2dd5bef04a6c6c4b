"""Run configuration and the scripted end-to-end experiment.

:func:`run_pipeline` goes dataset -> balance -> split -> select -> train ->
eval -> bench -> pareto and writes every intermediate artifact into one
output directory, together with the effective configuration. With the
same seeds it is byte-reproducible apart from the ``wall_time_s`` column.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import mlp
from ._io import write_atomic
from .corpus import flatten, load_corpus
from .dataset import (LabeledDataset, build_dataset, cluster_centroids_balance, feature_scores,
                      select_k_best, split, standardize_apply, standardize_fit)
from .features import FEATURE_NAMES
from .mlp import DEFAULT_THRESHOLD, HIDDEN, MlpModel, TrainConfig
from .pipeline import Strategy, StrategyKind, pareto_front, prepare_all, run_benchmark
from .semantics import OracleConfig
from .synth import SynthConfig

log = logging.getLogger(__name__)

STRATEGIES = tuple(k.value for k in StrategyKind)
SWEEP_THRESHOLDS = (0.9, 0.5, 0.1, 1e-2, 1e-4)
EVAL_THRESHOLDS = (0.0, 1e-4, 0.5, 0.93)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    corpus: str | None = None  # None is the bundled corpus
    out_dir: str = "out"
    strategies: tuple[str, ...] = STRATEGIES
    threshold: float = DEFAULT_THRESHOLD
    thresholds: tuple[float, ...] = SWEEP_THRESHOLDS
    model: str | None = None
    seed: int = 0
    split_ratio: float = 0.8
    k: int = 14
    probe_count: int = 32
    cache: str = "off"
    cache_dir: str | None = None
    jobs: int = 1
    # synthesis
    max_instructions: int = 3
    candidate_cap: int = 300
    # oracle
    exhaustive_bit_budget: int = 20
    sample_count: int = 100_000
    per_candidate_timeout: float = 5.0
    per_lhs_time_limit: float = 300.0
    # training
    learning_rate: float = 0.01
    epochs: int = 400
    batch_size: int = 200

    def __post_init__(self):
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {', '.join(STRATEGIES)}")
        if self.cache not in ("off", "cold", "warm", "cold+warm"):
            raise ConfigError(f"cache must be off, cold, warm or cold+warm, not {self.cache!r}")
        if not 0.0 <= self.threshold <= 1.0 or any(not 0.0 <= t <= 1.0 for t in self.thresholds):
            raise ConfigError("thresholds must lie in [0, 1]")
        if not 1 <= self.k <= len(FEATURE_NAMES):
            raise ConfigError(f"k must lie in [1, {len(FEATURE_NAMES)}]")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config key {sorted(extra)[0]!r}")
        d = dict(d)
        for key in ("strategies", "thresholds"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def merged(self, **overrides) -> RunConfig:
        """Copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @property
    def synth(self) -> SynthConfig:
        return SynthConfig(max_instructions=self.max_instructions,
                           candidate_cap=self.candidate_cap)

    @property
    def oracle(self) -> OracleConfig:
        return OracleConfig(self.exhaustive_bit_budget, self.sample_count, self.seed,
                            self.per_candidate_timeout, self.per_lhs_time_limit)

    @property
    def train_cfg(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.epochs, self.batch_size, seed=self.seed)

    @property
    def cache_modes(self) -> tuple[str, ...]:
        return tuple(self.cache.split("+"))


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return RunConfig.from_dict(d)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -------------------------------------------------------------------- steps

def fit_model(train: LabeledDataset, k: int = 14, cfg: TrainConfig = TrainConfig(),
              threshold: float = DEFAULT_THRESHOLD, hidden=HIDDEN,
              scores: np.ndarray | None = None) -> tuple[MlpModel, list[float]]:
    """Select ``k`` features, standardize on ``train`` and fit the network."""
    mask = select_k_best(train, k, scores)
    scaler = standardize_fit(train.X)
    X = mask.apply(standardize_apply(scaler, train.X))
    model, curve = mlp.train(X, train.y, cfg, hidden)
    model.mask, model.scaler, model.threshold = mask, scaler, threshold
    return model, curve


def scores_csv(scores: np.ndarray, k: int) -> str:
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    rank = {j: r + 1 for r, j in enumerate(order)}
    return csv_text(("feature", "mi_score", "rank", "selected"),
                    [(FEATURE_NAMES[j], repr(float(scores[j])), rank[j], int(rank[j] <= k))
                     for j in range(len(scores))])


def recall_vs_k(train: LabeledDataset, test: LabeledDataset, cfg: TrainConfig,
                threshold: float, ks=range(1, len(FEATURE_NAMES) + 1)) -> str:
    """Held-out metrics for a model trained on the top ``k`` features, for each ``k``."""
    scores = feature_scores(train)
    rows = []
    for k in ks:
        model, _ = fit_model(train, k, cfg, threshold, scores=scores)
        m = mlp.evaluate(model, test.X, test.y, threshold)
        rows.append((k, repr(m.recall_valid), repr(m.recall_invalid), repr(m.accuracy), repr(m.f1)))
    return csv_text(("k", "recall_valid", "recall_invalid", "accuracy", "f1_macro"), rows)


def metrics_csv(model: MlpModel, test: LabeledDataset, thresholds=EVAL_THRESHOLDS) -> str:
    rows = []
    for t in thresholds:
        d = mlp.evaluate(model, test.X, test.y, t).as_dict()
        rows.append([repr(t)] + [repr(v) if isinstance(v, float) else v for v in d.values()])
    return csv_text(("threshold", *(f.name for f in fields(mlp.Metrics))), rows)


def roc_csv(model: MlpModel, test: LabeledDataset) -> str:
    return csv_text(("threshold", "fpr", "tpr"),
                    [(repr(t), repr(f), repr(p)) for t, f, p in mlp.roc_points(model, test.X, test.y)])


def loss_csv(curve: list[float]) -> str:
    return csv_text(("epoch", "loss"), [(i + 1, repr(v)) for i, v in enumerate(curve)])


def make_strategies(names, model: MlpModel | None, threshold: float) -> list[Strategy]:
    out = []
    for n in names:
        kind = StrategyKind(n)
        if kind.uses_model and model is None:
            raise ConfigError(f"strategy {n} needs a model")
        out.append(Strategy(kind, model if kind.uses_model else None, threshold))
    return out


def pareto_csv(corpus, model: MlpModel, thresholds, cfg: RunConfig, prepared=None) -> str:
    """Combined strategy at each threshold; the time proxy is the oracle-call count."""
    rows = []
    for t in thresholds:
        rep = run_benchmark(corpus, [Strategy(StrategyKind.COMBINED, model, t)], seed=cfg.seed,
                            synth_cfg=cfg.synth, oracle_cfg=cfg.oracle,
                            probe_count=cfg.probe_count, prepared=prepared, jobs=cfg.jobs)
        tot = rep.total(StrategyKind.COMBINED.value)
        rows.append((t, tot["oracle_calls"], tot["cost_decrease"]))
    front = set(pareto_front(rows))
    return csv_text(("threshold", "oracle_calls", "cost_decrease", "on_front"),
                    [(repr(t), c, d, int((t, c, d) in front)) for t, c, d in rows])


def run_pipeline(cfg: RunConfig, out_dir: str | Path | None = None) -> dict[str, Path]:
    """Run every stage and write its artifact; returns name -> path."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    def emit(name: str, text: str) -> None:
        write_atomic(out / name, text)
        written[name] = out / name

    emit("config.json", cfg.to_json())
    corpus = load_corpus(cfg.corpus)
    flat = flatten(corpus)
    log.info("enumerating candidates for %d LHS", len(flat))
    prepared = prepare_all(flat, cfg.synth, cfg.jobs)

    log.info("labeling dataset")
    ds = build_dataset(flat, cfg.synth, cfg.oracle,
                       candidates={i: p.candidates for i, p in prepared.items()}, jobs=cfg.jobs)
    emit("dataset.csv", ds.to_csv())
    balanced = cluster_centroids_balance(ds, cfg.seed)
    emit("balanced.csv", balanced.to_csv())
    train, test = split(balanced, cfg.split_ratio, cfg.seed)
    emit("train.csv", train.to_csv())
    emit("test.csv", test.to_csv())

    log.info("selecting features and training")
    scores = feature_scores(train)
    emit("scores.csv", scores_csv(scores, cfg.k))
    emit("recall_vs_k.csv", recall_vs_k(train, test, cfg.train_cfg, cfg.threshold))
    model, curve = fit_model(train, cfg.k, cfg.train_cfg, cfg.threshold, scores=scores)
    emit("model.json", json.dumps(mlp.to_dict(model), indent=1) + "\n")
    emit("loss_curve.csv", loss_csv(curve))
    emit("metrics.csv", metrics_csv(model, test))
    emit("roc.csv", roc_csv(model, test))

    log.info("benchmarking %s", ", ".join(cfg.strategies))
    report = run_benchmark(corpus, make_strategies(cfg.strategies, model, cfg.threshold),
                           seed=cfg.seed, cache_modes=("off", "cold", "warm"),
                           cache_dir=cfg.cache_dir or out / "cache", synth_cfg=cfg.synth,
                           oracle_cfg=cfg.oracle, probe_count=cfg.probe_count,
                           prepared=prepared, jobs=cfg.jobs)
    emit("bench.csv", report.to_csv())
    emit("pareto.csv", pareto_csv(corpus, model, cfg.thresholds, cfg, prepared))
    return written
