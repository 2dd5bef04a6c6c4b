"""
Superoptimizing one pattern
===========================

Enumerate replacements for ``x * 2``, verify them cheapest first, keep the
first one the oracle accepts.
"""

from superprune.ir import block_cost, parse_block, print_block
from superprune.pipeline import Strategy, StrategyKind, optimize_lhs
from superprune.semantics import check_equivalence
from superprune.synth import enumerate_candidates

lhs = parse_block("""
%0:i8 = var
%1:i8 = mul %0, 2:i8
infer %1
""")
print(print_block(lhs), "\ncost", block_cost(lhs))

# candidates come back sorted by cost, then by their printed text
cands = enumerate_candidates(lhs)
print(len(cands), "candidates")
for c in cands[:8]:
    print(f"  cost {block_cost(c)}:", print_block(c, "result").replace("\n", " ; "))

# the oracle checks all 256 inputs of an i8 variable
shl2 = parse_block("%0:i8 = var\n%1:i8 = shl %0, 2:i8\nresult %1")
v = check_equivalence(lhs, shl2)
print("\nshl by 2:", v.status.value, "at x =", v.counterexample.values[0])

res = optimize_lhs(lhs, Strategy(StrategyKind.BASELINE))
print("\n", res.outcome.value, f"cost {res.cost_before} -> {res.cost_after}",
      f"after {res.oracle_calls} oracle calls")
print(print_block(res.best, "result"))
