"""
The twenty similarity features
==============================

Every (LHS, candidate) pair becomes twenty numbers: text and token-set
similarities, a graph-centrality cosine and twelve count differences.
"""

from superprune.features import FEATURE_NAMES, extract, token_set, token_string
from superprune.ir import parse_block

lhs = parse_block("%0:i8 = var\n%1:i8 = mul %0, 2:i8\n%2:i8 = add %1, 1:i8\ninfer %2")
good = parse_block("%0:i8 = var\n%1:i8 = shl %0, 1:i8\n%2:i8 = or %1, 1:i8\nresult %2")
bad = parse_block("%0:i8 = var\n%1:i8 = xor %0, 255:i8\nresult %1")

# shl is grouped under mul, so both sides carry a mul token
print("tokens lhs :", dict(token_set(lhs)), repr(token_string(lhs)))
print("tokens good:", dict(token_set(good)), repr(token_string(good)))

fg, fb = extract(lhs, good), extract(lhs, bad)
print(f"\n{'feature':<20}{'good':>10}{'bad':>10}")
for name in FEATURE_NAMES:
    print(f"{name:<20}{getattr(fg, name):>10.4f}{getattr(fb, name):>10.4f}")
