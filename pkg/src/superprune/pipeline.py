"""The optimization loop: enumerate, prune, verify in cost order, report.

Four strategies differ only in which pruners run before verification:

========================  ==========================================
baseline                  none
quickcheck                drop candidates that disagree on a probe
prediprune                drop candidates the model scores below t
prediprune+quickcheck     quickcheck first, then the model
========================  ==========================================
"""

from __future__ import annotations

import csv
import enum
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import write_atomic
from .cache import CacheStore, cache_key
from .features import FeatureConfig, extract_many
from .ir import DEFAULT_COSTS, Block, CostModel, block_cost
from .mlp import DEFAULT_THRESHOLD, MlpModel
from .semantics import (InputAssignment, OracleConfig, Status, assignment_columns, check_equivalence,
                        eval_arrays, probe_vectors)
from .synth import SynthConfig, enumerate_candidates


class StrategyKind(str, enum.Enum):
    BASELINE = "baseline"
    QUICKCHECK = "quickcheck"
    PREDIPRUNE = "prediprune"
    COMBINED = "prediprune+quickcheck"

    @property
    def uses_model(self) -> bool:
        return self in (StrategyKind.PREDIPRUNE, StrategyKind.COMBINED)

    @property
    def uses_quickcheck(self) -> bool:
        return self in (StrategyKind.QUICKCHECK, StrategyKind.COMBINED)


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    model: MlpModel | None = field(default=None, compare=False)
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.kind.uses_model != (self.model is not None):
            raise ValueError(f"{self.kind.value} {'needs' if self.kind.uses_model else 'takes no'} model")

    @property
    def name(self) -> str:
        return self.kind.value


# ------------------------------------------------------------------ pruners

def model_prune(lhs: Block, candidates: list[Block], model: MlpModel, threshold: float,
                features: np.ndarray | None = None) -> tuple[list[Block], list[Block]]:
    """Keep candidates whose P(valid) reaches ``threshold``; order is preserved."""
    if not candidates:
        return [], []
    X = extract_many(lhs, candidates) if features is None else features
    p = model.predict_proba(X)
    keep = p >= threshold
    return ([c for c, k in zip(candidates, keep) if k],
            [c for c, k in zip(candidates, keep) if not k])


def quickcheck_prune(lhs: Block, candidates: list[Block],
                     probes: list[InputAssignment]) -> tuple[list[Block], list[Block]]:
    """Drop candidates that disagree with ``lhs`` on any probe. Never drops an equivalent one."""
    if not probes or not candidates:
        return list(candidates), []
    values, sels = assignment_columns(probes, lhs)
    want = eval_arrays(lhs, values, sels, len(probes))
    kept, pruned = [], []
    for c in candidates:
        same = c.width == lhs.width and np.array_equal(eval_arrays(c, values, sels, len(probes)), want)
        (kept if same else pruned).append(c)
    return kept, pruned


# --------------------------------------------------------------- optimizing

class Outcome(str, enum.Enum):
    OPTIMIZED = "optimized"
    NO_IMPROVEMENT = "no_improvement"
    TIMED_OUT = "timed_out"


@dataclass
class OptimizationResult:
    lhs_id: str
    outcome: Outcome
    cost_before: int
    cost_after: int
    best: Block | None = None
    candidates_generated: int = 0
    pruned_by_quickcheck: int = 0
    pruned_by_model: int = 0
    oracle_calls: int = 0
    cache_hits: int = 0
    skipped: int = 0
    elapsed: float = 0.0

    @property
    def verified(self) -> int:
        return self.oracle_calls + self.cache_hits

    @property
    def cost_decrease(self) -> int:
        return self.cost_before - self.cost_after


@dataclass
class Prepared:
    """Per-LHS work shared by several strategies: candidates and their features."""
    lhs: Block
    candidates: list[Block]
    _features: np.ndarray | None = None

    @property
    def features(self) -> np.ndarray:
        if self._features is None:
            self._features = extract_many(self.lhs, self.candidates)
        return self._features


def prepare(lhs: Block, synth_cfg: SynthConfig = SynthConfig()) -> Prepared:
    return Prepared(lhs, enumerate_candidates(lhs, synth_cfg))


def prepare_all(lhs_map: dict[str, Block], synth_cfg: SynthConfig = SynthConfig(),
                jobs: int = 1) -> dict[str, Prepared]:
    """Enumerate candidates for every LHS, in up to ``jobs`` worker processes."""
    ids = list(lhs_map)
    if jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            cands = list(pool.map(enumerate_candidates, [lhs_map[i] for i in ids],
                                  [synth_cfg] * len(ids)))
    else:
        cands = [enumerate_candidates(lhs_map[i], synth_cfg) for i in ids]
    return {i: Prepared(lhs_map[i], c) for i, c in zip(ids, cands)}


def optimize_lhs(lhs: Block, strategy: Strategy, synth_cfg: SynthConfig = SynthConfig(),
                 oracle_cfg: OracleConfig = OracleConfig(), cache: CacheStore | None = None, *,
                 lhs_id: str = "", probe_count: int = 32, probe_seed: int = 0,
                 costs: CostModel = DEFAULT_COSTS, prepared: Prepared | None = None
                 ) -> OptimizationResult:
    """Find the cheapest verified replacement for ``lhs`` under ``strategy``.

    Candidates are verified in ascending cost order; the first equivalent one
    that is strictly cheaper than ``lhs`` wins. Once candidates are no
    cheaper than ``lhs`` the rest are skipped.
    """
    start = time.monotonic()
    deadline = start + oracle_cfg.per_lhs_time_limit
    prep = prepared or prepare(lhs, synth_cfg)
    before = block_cost(lhs, costs)
    res = OptimizationResult(lhs_id, Outcome.NO_IMPROVEMENT, before, before,
                             candidates_generated=len(prep.candidates))

    kept = list(prep.candidates)
    if strategy.kind.uses_quickcheck:
        kept, pruned = quickcheck_prune(lhs, kept, probe_vectors(lhs, probe_count, probe_seed))
        res.pruned_by_quickcheck = len(pruned)
    if strategy.kind.uses_model:
        index = {id(c): i for i, c in enumerate(prep.candidates)}
        feats = prep.features[[index[id(c)] for c in kept]] if kept else None
        kept, pruned = model_prune(lhs, kept, strategy.model, strategy.threshold, feats)
        res.pruned_by_model = len(pruned)

    for i, cand in enumerate(kept):
        cost = block_cost(cand, costs)
        if cost >= before:
            res.skipped = len(kept) - i
            break
        if time.monotonic() > deadline:
            res.outcome = Outcome.TIMED_OUT
            res.skipped = len(kept) - i
            break
        verdict = None
        key = None
        if cache is not None:
            key = cache_key(lhs, cand, oracle_cfg)
            verdict = cache.get(key)
        if verdict is not None:
            res.cache_hits += 1
        else:
            verdict = check_equivalence(lhs, cand, oracle_cfg)
            res.oracle_calls += 1
            if cache is not None and verdict.status is not Status.UNKNOWN:
                cache.put(key, verdict)
        if verdict.equivalent:
            res.outcome = Outcome.OPTIMIZED
            res.best = cand
            res.cost_after = cost
            res.skipped = len(kept) - i - 1
            break
    res.elapsed = time.monotonic() - start
    return res


# ---------------------------------------------------------------- reporting

REPORT_COLUMNS = (
    "benchmark", "strategy", "threshold", "cache_mode", "lhs_count", "candidates_generated",
    "pruned_by_quickcheck", "pruned_by_model", "pruning_rate_pct", "oracle_calls",
    "cache_hits", "successes", "timeouts", "cost_before", "cost_after", "cost_decrease",
    "cost_decrease_pct", "wall_time_s",
)
TIMING_COLUMNS = ("wall_time_s",)


def _row(benchmark: str, strategy: Strategy, cache_mode: str,
         results: list[OptimizationResult]) -> dict:
    gen = sum(r.candidates_generated for r in results)
    pq = sum(r.pruned_by_quickcheck for r in results)
    pm = sum(r.pruned_by_model for r in results)
    cb = sum(r.cost_before for r in results)
    dec = sum(r.cost_decrease for r in results)
    return {
        "benchmark": benchmark,
        "strategy": strategy.name,
        "threshold": strategy.threshold if strategy.kind.uses_model else "",
        "cache_mode": cache_mode,
        "lhs_count": len(results),
        "candidates_generated": gen,
        "pruned_by_quickcheck": pq,
        "pruned_by_model": pm,
        "pruning_rate_pct": round(100.0 * (pq + pm) / gen, 6) if gen else 0.0,
        "oracle_calls": sum(r.oracle_calls for r in results),
        "cache_hits": sum(r.cache_hits for r in results),
        "successes": sum(r.outcome is Outcome.OPTIMIZED for r in results),
        "timeouts": sum(r.outcome is Outcome.TIMED_OUT for r in results),
        "cost_before": cb,
        "cost_after": cb - dec,
        "cost_decrease": dec,
        "cost_decrease_pct": round(100.0 * dec / cb, 6) if cb else 0.0,
        "wall_time_s": round(sum(r.elapsed for r in results), 4),
    }


@dataclass
class StrategyReport:
    rows: list[dict] = field(default_factory=list)
    results: dict[tuple[str, str, str], list[OptimizationResult]] = field(default_factory=dict)

    def to_csv(self, path: str | Path | None = None, drop_timing: bool = False) -> str:
        cols = [c for c in REPORT_COLUMNS if not (drop_timing and c in TIMING_COLUMNS)]
        buf = io.StringIO()
        w = csv.DictWriter(buf, cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(self.rows)
        text = buf.getvalue()
        if path is not None:
            write_atomic(path, text)
        return text

    def total(self, strategy: str, cache_mode: str = "off") -> dict:
        for r in self.rows:
            if r["benchmark"] == "ALL" and r["strategy"] == strategy and r["cache_mode"] == cache_mode:
                return r
        raise KeyError((strategy, cache_mode))


Corpus = dict[str, dict[str, Block]]


def run_benchmark(corpus: Corpus, strategies: list[Strategy], *, seed: int = 0,
                  cache_modes: tuple[str, ...] = ("off",), cache_dir: str | Path | None = None,
                  synth_cfg: SynthConfig = SynthConfig(),
                  oracle_cfg: OracleConfig = OracleConfig(), probe_count: int = 32,
                  prepared: dict[str, Prepared] | None = None, jobs: int = 1) -> StrategyReport:
    """Run every strategy over every benchmark, one report row per combination.

    ``cache_modes`` may contain ``off``, ``cold`` (start from an empty cache
    file) and ``warm`` (reuse whatever the cold run left behind). Both cache
    modes need ``cache_dir``.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if {"cold", "warm"} & set(cache_modes) and cache_dir is None:
        raise ValueError("cache modes need a cache_dir")
    prepared = {} if prepared is None else prepared
    missing = {i: b for m in corpus.values() for i, b in m.items() if i not in prepared}
    prepared.update(prepare_all(missing, synth_cfg, jobs))

    report = StrategyReport()
    for strategy in strategies:
        label = strategy.name + (f"@{strategy.threshold:g}" if strategy.kind.uses_model else "")
        for mode in cache_modes:
            cache = None
            if mode in ("cold", "warm"):
                path = Path(cache_dir) / (label.replace("+", "_").replace("@", "_t") + ".cache")
                if mode == "cold" and path.exists():
                    path.unlink()
                cache = CacheStore(path)
            elif mode != "off":
                raise ValueError(f"unknown cache mode {mode!r}")
            everything = []
            for bench in sorted(corpus):
                results = [
                    optimize_lhs(lhs, strategy, synth_cfg, oracle_cfg, cache, lhs_id=lhs_id,
                                 probe_count=probe_count, probe_seed=seed,
                                 prepared=prepared[lhs_id])
                    for lhs_id, lhs in corpus[bench].items()
                ]
                report.results[bench, label, mode] = results
                report.rows.append(_row(bench, strategy, mode, results))
                everything.extend(results)
            report.rows.append(_row("ALL", strategy, mode, everything))
    return report


# ------------------------------------------------------------------- pareto

def pareto_front(rows: list[tuple[float, float, float]]) -> list[tuple[float, float, float]]:
    """Non-dominated (threshold, time proxy, cost decrease) rows, sorted by threshold.

    A row is dominated when another has no larger time proxy, no smaller
    cost decrease, and is strictly better in one of the two.
    """
    if not rows:
        raise ValueError("no rows")
    front = []
    for r in rows:
        dominated = any(
            (o[1] <= r[1] and o[2] >= r[2]) and (o[1] < r[1] or o[2] > r[2]) for o in rows)
        if not dominated:
            front.append(r)
    return sorted(front, key=lambda r: r[0])
