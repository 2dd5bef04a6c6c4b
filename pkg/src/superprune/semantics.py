"""Bit-exact evaluation and the brute-force equivalence oracle.

Evaluation is vectorized: every input is a ``uint64`` array and one call
evaluates a block on a whole batch of assignments. All operations are total:

* ``udiv x, 0`` is all-ones, ``urem x, 0`` is ``x``;
* ``sdiv x, 0`` is ``1`` for negative ``x`` and ``-1`` otherwise, ``srem x, 0`` is ``x``;
* ``INT_MIN sdiv -1`` wraps to ``INT_MIN``;
* shifting by the width or more gives 0 (``ashr`` fills with the sign bit).
"""

from __future__ import annotations

import enum
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .ir import Block, Instruction, Lit, Opcode, Ref

U64 = np.uint64


@dataclass(frozen=True)
class InputAssignment:
    values: dict[int, int]
    phi_selectors: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"values": {str(k): v for k, v in sorted(self.values.items())},
                           "phi": {str(k): v for k, v in sorted(self.phi_selectors.items())}},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> InputAssignment:
        d = json.loads(text)
        return cls({int(k): v for k, v in d["values"].items()},
                   {int(k): v for k, v in d["phi"].items()})


@dataclass(frozen=True)
class OracleConfig:
    exhaustive_bit_budget: int = 20
    sample_count: int = 100_000
    seed: int = 0
    per_candidate_timeout: float = 5.0
    per_lhs_time_limit: float = 300.0

    def __post_init__(self):
        if min(self.exhaustive_bit_budget, self.sample_count) <= 0:
            raise ValueError("oracle budgets must be positive")
        if self.per_candidate_timeout <= 0 or self.per_lhs_time_limit <= 0:
            raise ValueError("time limits must be positive")

    def digest(self) -> bytes:
        # time limits do not change a decided verdict, so they stay out of the key
        key = {k: v for k, v in asdict(self).items() if "time" not in k}
        return hashlib.blake2b(json.dumps(key, sort_keys=True).encode(), digest_size=8).digest()


class Status(enum.Enum):
    EQUIVALENT = "equivalent"
    NOT_EQUIVALENT = "not_equivalent"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    status: Status
    counterexample: InputAssignment | None = None
    sampled: bool = False

    @property
    def equivalent(self) -> bool:
        return self.status is Status.EQUIVALENT


def _mask(width: int):
    return U64((1 << width) - 1)


def _signed(v: np.ndarray, width: int) -> np.ndarray:
    s = v.astype(np.int64)
    return np.where(s >= (1 << (width - 1)), s - (1 << width), s)


def _binary(op: Opcode, a: np.ndarray, b: np.ndarray, width: int) -> np.ndarray:
    m = _mask(width)
    if op in (Opcode.ADD, Opcode.ADDNSW):
        return (a + b) & m
    if op in (Opcode.SUB, Opcode.SUBNSW):
        return (a - b) & m
    if op in (Opcode.MUL, Opcode.MULNSW):
        return (a * b) & m
    if op is Opcode.AND:
        return a & b
    if op is Opcode.OR:
        return a | b
    if op is Opcode.XOR:
        return a ^ b
    if op is Opcode.UDIV:
        safe = np.where(b == 0, U64(1), b)
        return np.where(b == 0, m, a // safe)
    if op is Opcode.UREM:
        safe = np.where(b == 0, U64(1), b)
        return np.where(b == 0, a, a % safe)
    if op in (Opcode.SDIV, Opcode.SREM):
        sa, sb = _signed(a, width), _signed(b, width)
        mag_b = np.where(sb == 0, 1, np.abs(sb))
        mag_a = np.abs(sa)
        if op is Opcode.SDIV:
            q = mag_a // mag_b
            q = np.where((sa < 0) != (sb < 0), -q, q)
            q = np.where(sb == 0, np.where(sa < 0, 1, -1), q)
            return q.astype(U64) & m
        r = mag_a % mag_b
        r = np.where(sa < 0, -r, r)
        r = np.where(sb == 0, sa, r)
        return r.astype(U64) & m
    if op in (Opcode.SHL, Opcode.LSHR):
        big = b >= U64(width)
        amt = np.where(big, U64(0), b)
        res = (a << amt) & m if op is Opcode.SHL else a >> amt
        return np.where(big, U64(0), res)
    if op is Opcode.ASHR:
        amt = np.minimum(b, U64(width - 1)).astype(np.int64)
        return (_signed(a, width) >> amt).astype(U64) & m
    if op is Opcode.EQ:
        return (a == b).astype(U64)
    if op is Opcode.NE:
        return (a != b).astype(U64)
    if op is Opcode.ULT:
        return (a < b).astype(U64)
    if op is Opcode.ULE:
        return (a <= b).astype(U64)
    if op in (Opcode.SLT, Opcode.SLE):
        # operand width is not the (i1) result width; callers pass it in
        raise AssertionError("signed compares are dispatched by eval_arrays")
    raise ValueError(f"no binary semantics for {op}")


def eval_arrays(b: Block, values: dict[int, np.ndarray], selectors: dict[int, np.ndarray],
                n: int) -> np.ndarray:
    """Evaluate ``b`` on ``n`` assignments at once; returns the root values."""
    env: dict[int, np.ndarray] = {}

    def get(o, width: int) -> np.ndarray:
        if isinstance(o, Lit):
            return np.full(n, o.value, dtype=U64)
        return env[o.id]

    for inst in b.live():
        op = inst.op
        if op is Opcode.VAR:
            env[inst.id] = np.asarray(values[inst.id], dtype=U64) & _mask(inst.width)
        elif op is Opcode.BLOCK:
            env[inst.id] = np.asarray(selectors[inst.id], dtype=U64)
        elif op is Opcode.CONST:
            env[inst.id] = np.full(n, inst.value, dtype=U64)
        elif op is Opcode.SELECT:
            c, x, y = (get(o, inst.width) for o in inst.operands)
            env[inst.id] = np.where(c != 0, x, y)
        elif op is Opcode.PHI:
            sel = env[inst.operands[0].id]
            arms = np.stack([get(o, inst.width) for o in inst.operands[1:]])
            idx = (sel % U64(len(arms))).astype(np.intp)
            env[inst.id] = arms[idx, np.arange(n)]
        elif op in (Opcode.SLT, Opcode.SLE):
            w = _operand_width(b, inst.operands[0])
            x, y = (_signed(get(o, w), w) for o in inst.operands)
            env[inst.id] = ((x < y) if op is Opcode.SLT else (x <= y)).astype(U64)
        else:
            x, y = (get(o, inst.width) for o in inst.operands)
            w = inst.width if op not in (Opcode.EQ, Opcode.NE, Opcode.ULT, Opcode.ULE) \
                else _operand_width(b, inst.operands[0])
            env[inst.id] = _binary(op, x, y, w)
    return env[b.root]


def _operand_width(b: Block, o) -> int:
    return o.width if isinstance(o, Lit) else b.insts[o.id].width


def eval_block(b: Block, a: InputAssignment) -> int:
    values = {k: np.array([v], dtype=U64) for k, v in a.values.items()}
    sels = {k: np.array([v], dtype=U64) for k, v in a.phi_selectors.items()}
    return int(eval_arrays(b, values, sels, 1)[0])


# ------------------------------------------------------------ input spaces

def _space(b: Block) -> list[tuple[Instruction, int]]:
    """(declaration, radix) for every free input: 2**width for vars, preds for blocks."""
    return [(d, (1 << d.width) if d.op is Opcode.VAR else d.value) for d in b.decls]


def free_bits(b: Block) -> int:
    bits = 0
    for d, radix in _space(b):
        bits += d.width if d.op is Opcode.VAR else (radix - 1).bit_length()
    return bits


def _decompose(b: Block, idx: np.ndarray):
    values, sels = {}, {}
    rest = idx.astype(U64)
    for d, radix in _space(b):
        r = U64(radix)
        digit = rest % r
        rest = rest // r
        (values if d.op is Opcode.VAR else sels)[d.id] = digit
    return values, sels


def _assignment(values, sels, k: int) -> InputAssignment:
    return InputAssignment({i: int(v[k]) for i, v in values.items()},
                           {i: int(v[k]) for i, v in sels.items()})


def assignment_columns(assignments: list[InputAssignment], b: Block):
    values = {d.id: np.array([a.values[d.id] for a in assignments], dtype=U64)
              for d in b.inputs}
    sels = {d.id: np.array([a.phi_selectors[d.id] for a in assignments], dtype=U64)
            for d in b.blocks}
    return values, sels


def probe_vectors(b: Block, n: int, seed: int) -> list[InputAssignment]:
    """Corner-case assignments first, then seeded random ones, ``n`` in total.

    Assignments are pairwise distinct as long as the input space allows it.
    Phi selectors cycle through their indices.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    inputs, blocks = b.inputs, b.blocks
    space = 1
    for _, radix in _space(b):
        space *= radix

    def full(fn) -> dict[int, int]:
        return {d.id: fn(d.width) & ((1 << d.width) - 1) for d in inputs}

    corners = [full(lambda w: 0), full(lambda w: -1), full(lambda w: 1),
               full(lambda w: 1 << (w - 1))]
    for d in inputs:
        for v in (-1, 1, (1 << (d.width - 1)) - 1):
            mix = dict.fromkeys((e.id for e in inputs), 0)
            mix[d.id] = v & ((1 << d.width) - 1)
            corners.append(mix)

    out: list[InputAssignment] = []
    seen: set = set()
    rng = np.random.default_rng(seed)

    def push(vals: dict[int, int]) -> None:
        k = len(out)
        sels = {d.id: k % d.value for d in blocks}
        key = (tuple(sorted(vals.items())), tuple(sorted(sels.items())))
        if key in seen and len(seen) < space:
            return
        seen.add(key)
        out.append(InputAssignment(vals, sels))

    for c in corners:
        if len(out) >= n:
            break
        push(c)
    attempts = 0
    while len(out) < n:
        vals = {d.id: int(rng.integers(0, 1 << d.width)) for d in inputs}
        before = len(out)
        push(vals)
        attempts += 1
        if len(out) == before and attempts > 50 * n:
            seen.clear()  # space exhausted: allow repeats
    return out


def check_equivalence(lhs: Block, rhs: Block, cfg: OracleConfig = OracleConfig()) -> Verdict:
    """Decide whether ``rhs`` computes the same root value as ``lhs`` everywhere.

    Small input spaces are enumerated completely; larger ones are checked on
    corner cases plus ``cfg.sample_count`` seeded random assignments, and an
    all-agree result is reported as equivalent with ``sampled=True``.
    """
    if lhs.signature() != rhs.signature():
        raise ValueError("lhs and rhs must declare the same inputs")
    if lhs.width != rhs.width:
        return Verdict(Status.NOT_EQUIVALENT, probe_vectors(lhs, 1, cfg.seed)[0])
    deadline = time.monotonic() + cfg.per_candidate_timeout
    chunk = 1 << 16

    if free_bits(lhs) <= cfg.exhaustive_bit_budget:
        total = 1
        for _, radix in _space(lhs):
            total *= radix
        for start in range(0, total, chunk):
            idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
            values, sels = _decompose(lhs, idx)
            diff = _first_diff(lhs, rhs, values, sels, len(idx))
            if diff is not None:
                return Verdict(Status.NOT_EQUIVALENT, _assignment(values, sels, diff))
            if time.monotonic() > deadline:
                return Verdict(Status.UNKNOWN)
        return Verdict(Status.EQUIVALENT)

    corners = probe_vectors(lhs, 16, cfg.seed)
    values, sels = assignment_columns(corners, lhs)
    diff = _first_diff(lhs, rhs, values, sels, len(corners))
    if diff is not None:
        return Verdict(Status.NOT_EQUIVALENT, corners[diff])
    rng = np.random.default_rng(cfg.seed)
    done = 0
    while done < cfg.sample_count:
        m = min(chunk, cfg.sample_count - done)
        values = {d.id: rng.integers(0, 1 << d.width, size=m, dtype=np.uint64)
                  for d in lhs.inputs}
        sels = {d.id: rng.integers(0, d.value, size=m).astype(U64) for d in lhs.blocks}
        diff = _first_diff(lhs, rhs, values, sels, m)
        if diff is not None:
            return Verdict(Status.NOT_EQUIVALENT, _assignment(values, sels, diff), sampled=True)
        done += m
        if time.monotonic() > deadline:
            return Verdict(Status.UNKNOWN, sampled=True)
    return Verdict(Status.EQUIVALENT, sampled=True)


def _first_diff(lhs, rhs, values, sels, n) -> int | None:
    bad = np.flatnonzero(eval_arrays(lhs, values, sels, n) != eval_arrays(rhs, values, sels, n))
    return int(bad[0]) if bad.size else None
