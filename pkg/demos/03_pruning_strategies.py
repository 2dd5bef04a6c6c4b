"""
Comparing pruning strategies
============================

Run the four strategies over one benchmark of the bundled corpus with the
shipped model and count how much verification each one needs.
"""

from superprune.corpus import load_corpus
from superprune.mlp import load
from superprune.pipeline import Strategy, StrategyKind, run_benchmark

corpus = load_corpus(benchmarks=["arith"])
model = load()
print(f"{len(corpus['arith'])} patterns; model keeps {', '.join(model.mask.names)}")

strategies = [Strategy(StrategyKind.BASELINE),
              Strategy(StrategyKind.QUICKCHECK),
              Strategy(StrategyKind.PREDIPRUNE, model),
              Strategy(StrategyKind.COMBINED, model)]
report = run_benchmark(corpus, strategies)

# every strategy should find the same cost decrease; only the work differs
print(f"\n{'strategy':<24}{'pruned %':>10}{'oracle calls':>14}{'cost decrease':>15}")
for r in report.rows:
    if r["benchmark"] == "ALL":
        print(f"{r['strategy']:<24}{r['pruning_rate_pct']:>10.1f}{r['oracle_calls']:>14}"
              f"{r['cost_decrease']:>15}")

# lowering the threshold keeps more candidates; raising it risks losing valid ones
for t in (0.9, 0.5, 1e-4):
    rep = run_benchmark(corpus, [Strategy(StrategyKind.PREDIPRUNE, model, t)])
    tot = rep.total("prediprune")
    print(f"threshold {t:<7g} oracle calls {tot['oracle_calls']:>5}  "
          f"cost decrease {tot['cost_decrease']}")
