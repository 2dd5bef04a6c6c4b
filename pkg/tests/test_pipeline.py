import math

import numpy as np
import pytest
from hypothesis import given, settings

from superprune.cache import CacheStore
from superprune.corpus import load_corpus
from superprune.dataset import N_FEATURES
from superprune.ir import block_cost
from superprune.mlp import MlpModel, load
from superprune.pipeline import (Outcome, Strategy, StrategyKind, model_prune, optimize_lhs,
                                 pareto_front, prepare, quickcheck_prune, run_benchmark)
from superprune.semantics import OracleConfig, check_equivalence, probe_vectors
from superprune.synth import SynthConfig, enumerate_candidates

from conftest import P, blocks

SMALL = SynthConfig(candidate_cap=60)


def fixed_model(threshold=1e-4):
    """A model whose P(valid) is sigmoid of raw feature 0."""
    w = np.zeros((N_FEATURES, 1))
    w[0, 0] = 1.0
    return MlpModel([N_FEATURES, 1], [w], [np.zeros(1)], threshold=threshold)


def logit(p):
    return math.log(p / (1 - p))


def small_corpus():
    full = load_corpus()
    return {b: dict(list(m.items())[:3]) for b, m in sorted(full.items())[:2]}


def test_model_prune_threshold(mul2):
    cands = enumerate_candidates(mul2, SMALL)[:2]
    feats = np.zeros((2, N_FEATURES))
    feats[:, 0] = [logit(0.15), logit(0.05)]
    kept, pruned = model_prune(mul2, cands, fixed_model(), 0.1, feats)
    assert kept == [cands[0]] and pruned == [cands[1]]
    kept, pruned = model_prune(mul2, cands, fixed_model(), 0.0, feats)
    assert kept == cands and not pruned
    assert model_prune(mul2, [], fixed_model(), 0.5) == ([], [])


def test_quickcheck_prunes_wrong_shift(mul2):
    shl1 = P("%0:i8 = var ; %1:i8 = shl %0, 1:i8 ; result %1")
    shl2 = P("%0:i8 = var ; %1:i8 = shl %0, 2:i8 ; result %1")
    kept, pruned = quickcheck_prune(mul2, [shl1, shl2], probe_vectors(mul2, 32, 0))
    assert kept == [shl1] and pruned == [shl2]
    assert quickcheck_prune(mul2, [shl2], []) == ([shl2], [])


@settings(max_examples=25, deadline=None)
@given(blocks(widths=(4,), max_vars=2, max_ops=2))
def test_quickcheck_never_prunes_equivalent(lhs):
    cands = enumerate_candidates(lhs, SynthConfig(candidate_cap=40))
    _, pruned = quickcheck_prune(lhs, cands, probe_vectors(lhs, 8, 0))
    assert not any(check_equivalence(lhs, c).equivalent for c in pruned)


def test_optimize_mul2(mul2):
    r = optimize_lhs(mul2, Strategy(StrategyKind.BASELINE))
    assert r.outcome is Outcome.OPTIMIZED
    assert (r.cost_before, r.cost_after, r.cost_decrease) == (2, 1, 1)
    assert check_equivalence(mul2, r.best).equivalent
    assert block_cost(r.best) == 1


def test_optimize_identity_has_nothing_cheaper():
    x = P("%0:i8 = var ; infer %0")
    r = optimize_lhs(x, Strategy(StrategyKind.BASELINE))
    assert r.outcome is Outcome.NO_IMPROVEMENT and r.oracle_calls == 0
    assert r.skipped == r.candidates_generated


@pytest.mark.parametrize("kind", list(StrategyKind))
def test_counter_conservation(mul2, kind):
    model = load() if kind.uses_model else None
    r = optimize_lhs(mul2, Strategy(kind, model), SMALL)
    n = r.pruned_by_quickcheck + r.pruned_by_model + r.verified + r.skipped
    assert n == r.candidates_generated
    assert r.outcome is Outcome.OPTIMIZED


def test_strategies_agree_on_result(mul2):
    prep = prepare(mul2)
    best = {kind: optimize_lhs(mul2, Strategy(kind, load() if kind.uses_model else None),
                               prepared=prep).cost_after for kind in StrategyKind}
    assert set(best.values()) == {1}


def test_warm_cache_makes_no_oracle_calls(tmp_path, mul2):
    cache = CacheStore(tmp_path / "v.cache")
    s = Strategy(StrategyKind.BASELINE)
    cold = optimize_lhs(mul2, s, cache=cache)
    warm = optimize_lhs(mul2, s, cache=CacheStore(tmp_path / "v.cache"))
    assert cold.oracle_calls > 0 and warm.oracle_calls == 0
    assert warm.cache_hits == cold.oracle_calls
    assert (warm.outcome, warm.best) == (cold.outcome, cold.best)


def test_timeout_outcome():
    cfg = OracleConfig(per_lhs_time_limit=1e-9)
    r = optimize_lhs(P("%0:i8 = var ; %1:i8 = mul %0, 3:i8 ; infer %1"),
                     Strategy(StrategyKind.BASELINE), oracle_cfg=cfg)
    assert r.outcome is Outcome.TIMED_OUT and r.oracle_calls == 0


def test_strategy_validation():
    with pytest.raises(ValueError):
        Strategy(StrategyKind.PREDIPRUNE)
    with pytest.raises(ValueError):
        Strategy(StrategyKind.BASELINE, fixed_model())
    assert Strategy(StrategyKind.COMBINED, fixed_model()).name == "prediprune+quickcheck"


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    model = load()
    strategies = [Strategy(StrategyKind.BASELINE), Strategy(StrategyKind.QUICKCHECK),
                  Strategy(StrategyKind.PREDIPRUNE, model), Strategy(StrategyKind.COMBINED, model)]
    return run_benchmark(small_corpus(), strategies, cache_modes=("off", "cold", "warm"),
                         cache_dir=tmp_path_factory.mktemp("cache"))


def test_report_rows(small_report):
    rows = small_report.rows
    assert len(rows) == 4 * 3 * 3
    base = small_report.total("baseline")
    assert base["pruning_rate_pct"] == 0.0 and base["lhs_count"] == 6
    qc = small_report.total("quickcheck")
    comb = small_report.total("prediprune+quickcheck")
    assert comb["oracle_calls"] <= qc["oracle_calls"] <= base["oracle_calls"]
    for name in ("baseline", "quickcheck", "prediprune", "prediprune+quickcheck"):
        assert small_report.total(name, "warm")["oracle_calls"] == 0
        assert (small_report.total(name, "warm")["cost_decrease"]
                == small_report.total(name, "cold")["cost_decrease"])


def test_report_csv(small_report):
    text = small_report.to_csv()
    head = text.splitlines()[0].split(",")
    assert head[0] == "benchmark" and head[-1] == "wall_time_s"
    assert "wall_time_s" not in small_report.to_csv(drop_timing=True)
    with pytest.raises(KeyError):
        small_report.total("nope")


def test_run_benchmark_validation():
    with pytest.raises(ValueError):
        run_benchmark({}, [Strategy(StrategyKind.BASELINE)])
    with pytest.raises(ValueError):
        run_benchmark(small_corpus(), [Strategy(StrategyKind.BASELINE)], cache_modes=("cold",))


def test_pareto_front():
    rows = [(0.9, 10, 5), (0.5, 20, 8), (0.1, 30, 8), (0.01, 15, 4)]
    assert pareto_front(rows) == [(0.5, 20, 8), (0.9, 10, 5)]
    assert pareto_front([(0.1, 1, 1), (0.2, 1, 1)]) == [(0.1, 1, 1), (0.2, 1, 1)]
    with pytest.raises(ValueError):
        pareto_front([])
