"""Similarity and difference features for an (LHS, candidate) pair.

Every feature works on normalized opcode tokens (see
:func:`superprune.ir.normalize_opcode`). The text features (LCS, ICD)
compare token strings with one character per token; the set features
compare multisets of operation tokens, leaving out ``var``, ``const`` and
``block`` so that they describe the operation mix and not block size.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ir import SHIFTS, Block, Lit, Opcode, Ref, build_dfg, normalize_opcode, tree_depth
from .ir import DataflowGraph

FEATURE_NAMES = (
    "icd_sim", "lcs_ratio", "cosine_centrality", "d_constants", "d_arith", "dice",
    "tversky", "jaccard", "overlap_max", "d_compares", "d_tree_depth", "d_operands",
    "d_instructions", "d_unique_opcodes", "d_vars", "d_selects", "overlap_min",
    "d_bitwidth_ops", "d_block_insts", "d_phi_insts",
)

# fixed token -> character table for the string features
TOKEN_CHARS = {
    "var": "v", "const": "k", "add": "a", "sub": "s", "mul": "m", "div": "d", "rem": "r",
    "and": "&", "or": "|", "xor": "^", "shr": ">", "eq": "=", "ne": "!", "lt": "<",
    "le": "l", "select": "?", "phi": "p", "block": "b",
}

_ARITH = {"add", "sub", "mul", "div", "rem"}
_COMPARE = {"eq", "ne", "lt", "le"}
_SKIP_IN_SETS = {"var", "const", "block"}


class FeatureVector(NamedTuple):
    icd_sim: float
    lcs_ratio: float
    cosine_centrality: float
    d_constants: float
    d_arith: float
    dice: float
    tversky: float
    jaccard: float
    overlap_max: float
    d_compares: float
    d_tree_depth: float
    d_operands: float
    d_instructions: float
    d_unique_opcodes: float
    d_vars: float
    d_selects: float
    overlap_min: float
    d_bitwidth_ops: float
    d_block_insts: float
    d_phi_insts: float


@dataclass(frozen=True)
class FeatureConfig:
    tversky_alpha: float = 0.5
    tversky_beta: float = 0.25


def lzw_size(s: str | bytes) -> int:
    """Number of codes LZW emits with a dictionary seeded by all 256 bytes."""
    data = s.encode("latin-1") if isinstance(s, str) else s
    if not data:
        return 0
    table = {bytes([i]) for i in range(256)}
    w = b""
    codes = 0
    for c in data:
        wc = w + bytes([c])
        if wc in table:
            w = wc
        else:
            codes += 1
            table.add(wc)
            w = bytes([c])
    return codes + 1


def icd_similarity(x: str, y: str) -> float:
    """1 - (Z(xy) - Z(y)) / Z(x), clamped to [0, 1]."""
    zx = lzw_size(x)
    icd = (lzw_size(x + y) - lzw_size(y)) / zx
    return min(1.0, max(0.0, 1.0 - icd))


def lcs_length(a: str, b: str) -> int:
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b):
            cur.append(prev[j] + 1 if ca == cb else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def lcs_ratio(lhs_text: str, rhs_text: str) -> float:
    return lcs_length(lhs_text, rhs_text) / len(lhs_text)


def set_similarities(x: Counter | list, y: Counter | list, alpha: float = 0.5,
                     beta: float = 0.25) -> tuple[float, float, float, float, float]:
    """(jaccard, overlap_min, overlap_max, dice, tversky) under multiset semantics."""
    x, y = Counter(x), Counter(y)
    nx, ny = sum(x.values()), sum(y.values())
    if nx == 0 and ny == 0:
        return (1.0,) * 5
    if nx == 0 or ny == 0:
        return (0.0,) * 5
    inter = sum((x & y).values())
    union = sum((x | y).values())
    only_x = sum((x - y).values())
    only_y = sum((y - x).values())
    a, b = min(only_x, only_y), max(only_x, only_y)
    denom = inter + beta * (alpha * a + (1 - alpha) * b)
    tversky = inter / denom if denom else 0.0
    return (inter / union, inter / min(nx, ny), inter / max(nx, ny),
            2 * inter / (nx + ny), tversky)


def centrality_vector(g: DataflowGraph) -> list[float]:
    n = len(g.nodes)
    if n == 1:
        return [1.0]
    return sorted((d / (n - 1) for d in g.degrees().values()), reverse=True)


def centrality_cosine(gl: DataflowGraph, gr: DataflowGraph) -> float:
    a, b = centrality_vector(gl), centrality_vector(gr)
    size = max(len(a), len(b))
    va = np.zeros(size)
    vb = np.zeros(size)
    va[:len(a)] = a
    vb[:len(b)] = b
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(va @ vb / (na * nb), 0.0, 1.0))


def tokens(b: Block) -> list[str]:
    return [normalize_opcode(i.op) for i in b.live()]


def token_string(b: Block) -> str:
    return "".join(TOKEN_CHARS[t] for t in tokens(b))


def token_set(b: Block) -> Counter:
    return Counter(t for t in tokens(b) if t not in _SKIP_IN_SETS)


def _counts(b: Block) -> dict[str, int]:
    live = b.live()
    toks = tokens(b)
    referenced = set()
    literals = 0
    for i in live:
        for o in i.operands:
            referenced.add(o)
            literals += isinstance(o, Lit)
    return {
        "d_constants": literals + sum(i.op is Opcode.CONST for i in live),
        "d_arith": sum(t in _ARITH for t in toks),
        "d_compares": sum(t in _COMPARE for t in toks),
        "d_tree_depth": tree_depth(b),
        "d_operands": len(referenced),
        "d_instructions": len(live),
        "d_unique_opcodes": len(set(toks)),
        "d_vars": sum(i.op is Opcode.VAR for i in live),
        "d_selects": sum(i.op is Opcode.SELECT for i in live),
        "d_bitwidth_ops": sum(i.op in SHIFTS for i in live),
        "d_block_insts": sum(i.op is Opcode.BLOCK for i in live),
        "d_phi_insts": sum(i.op is Opcode.PHI for i in live),
    }


def count_features(lhs: Block, rhs: Block) -> dict[str, float]:
    cl, cr = _counts(lhs), _counts(rhs)
    return {k: float(abs(cl[k] - cr[k])) for k in cl}


def extract(lhs: Block, rhs: Block, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    ls, rs = token_string(lhs), token_string(rhs)
    jac, omin, omax, dice, tv = set_similarities(
        token_set(lhs), token_set(rhs), cfg.tversky_alpha, cfg.tversky_beta)
    vals = dict(
        icd_sim=icd_similarity(ls, rs),
        lcs_ratio=lcs_ratio(ls, rs),
        cosine_centrality=centrality_cosine(build_dfg(lhs), build_dfg(rhs)),
        dice=dice, tversky=tv, jaccard=jac, overlap_max=omax, overlap_min=omin,
        **count_features(lhs, rhs),
    )
    fv = FeatureVector(**vals)
    assert all(math.isfinite(v) for v in fv)
    return fv


def extract_many(lhs: Block, rhss: list[Block], cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    if not rhss:
        return np.zeros((0, len(FEATURE_NAMES)))
    return np.array([extract(lhs, r, cfg) for r in rhss], dtype=float)
