"""Bounded bottom-up enumeration of candidate right-hand sides.

Candidates are hash-consed terms over the LHS variables and a small
constant pool. A term's cost counts every distinct instruction once, so
shared subterms are paid for once, as in the DAG the term becomes.

Enumeration runs under a cost ceiling that grows until enough candidates
exist to fill ``candidate_cap``; all candidates at or below the ceiling
are known, so the cheapest ``cap`` of them in (cost, text) order are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from bisect import bisect_right

from .ir import (COMMUTATIVE, COMPARES, DEFAULT_COSTS, Block, CostModel, Instruction, Lit,
                 Opcode, Ref, make_block, print_block)

# term shapes:
#   ("v", width, decl_id)          variable
#   ("k", width, value)            literal
#   ("b", preds, decl_id)          block declaration (only inside phi)
#   (op, width, child, ...)        instruction
Term = tuple

_LEAVES = ("v", "k", "b")

DEFAULT_OPS = frozenset({
    Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.UDIV, Opcode.SDIV, Opcode.UREM, Opcode.SREM,
    Opcode.AND, Opcode.OR, Opcode.XOR, Opcode.SHL, Opcode.LSHR, Opcode.ASHR,
    Opcode.EQ, Opcode.NE, Opcode.ULT, Opcode.SLT, Opcode.ULE, Opcode.SLE, Opcode.SELECT,
})

_BOOL_OPS = frozenset({Opcode.AND, Opcode.OR, Opcode.XOR})
_COMM = frozenset(op.value for op in COMMUTATIVE)


@dataclass(frozen=True)
class SynthConfig:
    max_instructions: int = 3
    constant_pool: tuple[int, ...] = (0, 1, 2, -1)
    candidate_cap: int = 300
    opcode_set: frozenset[Opcode] = field(default=DEFAULT_OPS)

    def __post_init__(self):
        if self.candidate_cap < 1:
            raise ValueError("candidate_cap must be >= 1")
        if self.max_instructions < 0:
            raise ValueError("max_instructions must be >= 0")


def _canon(op: Opcode, width: int, kids: tuple) -> Term:
    if op in COMMUTATIVE:
        kids = tuple(sorted(kids))
    return (op.value, width) + kids


def block_to_term(b: Block) -> Term:
    terms: dict[int, Term] = {}
    for inst in b.live():
        if inst.op is Opcode.VAR:
            terms[inst.id] = ("v", inst.width, inst.id)
        elif inst.op is Opcode.BLOCK:
            terms[inst.id] = ("b", inst.value, inst.id)
        elif inst.op is Opcode.CONST:
            terms[inst.id] = ("k", inst.width, inst.value)
        else:
            kids = tuple(terms[o.id] if isinstance(o, Ref) else ("k", o.width, o.value)
                         for o in inst.operands)
            terms[inst.id] = _canon(inst.op, inst.width, kids)
    return terms[b.root]


def term_to_block(t: Term, decls: tuple[Instruction, ...]) -> Block:
    """Lower a term to a block that declares exactly ``decls``."""
    insts: list[Instruction] = list(decls)
    ids: dict[Term, int] = {}
    nxt = len(decls)

    def lower(t: Term):
        nonlocal nxt
        kind = t[0]
        if kind == "k":
            return Lit(t[2], t[1])
        if kind in ("v", "b"):
            return Ref(t[2])
        if t in ids:
            return Ref(ids[t])
        operands = tuple(lower(k) for k in t[2:])
        ids[t] = nxt
        insts.append(Instruction(nxt, Opcode(kind), t[1], operands))
        nxt += 1
        return Ref(ids[t])

    if t[0] == "k":
        insts.append(Instruction(nxt, Opcode.CONST, t[1], (), t[2]))
        root = nxt
    else:
        root = lower(t).id
    return make_block(insts, root)


class _Space:
    """All terms under an instruction bound and cost ceiling."""

    def __init__(self, lhs: Block, cfg: SynthConfig, costs: CostModel, ceiling: float):
        self.cfg = cfg
        self.costs = costs
        self.ceiling = ceiling
        self.root_width = lhs.width
        widths = {lhs.width} | {d.width for d in lhs.inputs}
        ops = cfg.opcode_set - {Opcode.PHI, Opcode.BLOCK, Opcode.VAR, Opcode.CONST}
        if ops & (COMPARES | {Opcode.SELECT}):
            widths.add(1)
        self.widths = sorted(widths)
        self.ops = sorted(ops, key=lambda o: o.value)
        self.op_cost = {o.value: costs[o] for o in Opcode}
        # term -> (cost, frozenset of instruction terms, round it first appeared)
        self.info: dict[Term, tuple[int, frozenset, int]] = {}
        self.by_width: dict[int, list[Term]] = {w: [] for w in self.widths}
        # instruction term -> terms that contain it, for finding shared subterms
        self.containing: dict[Term, list[Term]] = {}
        for d in lhs.inputs:
            self._add(("v", d.width, d.id), 0, frozenset())
        for w in self.widths:
            for c in sorted({c & ((1 << w) - 1) for c in cfg.constant_pool}):
                self._add(("k", w, c), 0, frozenset())
        self._grow()

    def _add(self, t: Term, cost: int, nodes: frozenset, gen: int = 0) -> None:
        self.info[t] = (cost, nodes, gen)
        self.by_width.setdefault(t[1], []).append(t)
        for n in nodes:
            self.containing.setdefault(n, []).append(t)

    def _make(self, name: str, width: int, kids: tuple, gen: int) -> None:
        if all(k[0] == "k" for k in kids):
            return  # folds to a constant
        t = (name, width) + (tuple(sorted(kids)) if name in _COMM else kids)
        info = self.info
        if t in info:
            return
        nodes = frozenset().union(*(info[k][1] for k in kids)) | {t}
        if len(nodes) > self.cfg.max_instructions:
            return
        cost = sum(self.op_cost[n[0]] for n in nodes)
        if cost > self.ceiling:
            return
        self._add(t, cost, nodes, gen)

    def _partners(self, pool: list[Term], costs: list[int], nodes: frozenset,
                  spare: float, width: int, gen: int) -> list[Term]:
        """Terms of ``pool`` that can join ``nodes`` without obviously breaking the budget."""
        out = pool[:bisect_right(costs, spare)]
        if nodes:
            seen = set(out)
            info = self.info
            for n in nodes:
                for t in self.containing.get(n, ()):
                    if t[1] == width and t not in seen and info[t][2] <= gen:
                        seen.add(t)
                        out.append(t)
        return out

    def _grow(self) -> None:
        # round r only combines terms of which at least one was new in round r - 1
        info = self.info
        for r in range(1, self.cfg.max_instructions + 1):
            last = r - 1
            before = len(info)
            snapshot = {}
            for w in self.widths:
                pool = sorted((t for t in self.by_width.get(w, ())), key=lambda t: info[t][0])
                snapshot[w] = (pool, [info[t][0] for t in pool])
            for op in self.ops:
                name = op.value
                budget = self.ceiling - self.costs[op]
                if budget < 0:
                    continue
                pools = {}
                for w, (pool, pc) in snapshot.items():
                    k = bisect_right(pc, budget)
                    pools[w] = (pool[:k], pc[:k])
                if op is Opcode.SELECT:
                    conds = [t for t in pools[1][0] if t[0] != "k"]
                    for w in self.widths:
                        pool, pc = pools[w]
                        for c in conds:
                            cc, cn, cg = info[c]
                            for x in self._partners(pool, pc, cn, budget - cc, w, last):
                                xn = cn | info[x][1]
                                spare = budget - sum(self.op_cost[n[0]] for n in xn)
                                if spare < 0:
                                    continue
                                xg = max(cg, info[x][2])
                                for y in self._partners(pool, pc, xn, spare, w, last):
                                    if x != y and max(xg, info[y][2]) == last:
                                        self._make(name, w, (c, x, y), r)
                    continue
                out_w = 1 if op in COMPARES else None
                comm = op in COMMUTATIVE
                for w in self.widths:
                    if w == 1 and op not in _BOOL_OPS and op not in COMPARES:
                        continue
                    pool, pc = pools[w]
                    for a in pool:
                        ca, an, ag = info[a]
                        for b in self._partners(pool, pc, an, budget - ca, w, last):
                            bg = info[b][2]
                            if (ag != last and bg != last) or (comm and b < a):
                                continue
                            self._make(name, out_w or w, (a, b), r)
            if len(info) == before:
                break

    def roots(self) -> list[Term]:
        return [t for t in self.by_width.get(self.root_width, ())]


def _term_text(t: Term, header: list[str]) -> str:
    """Same string as ``print_block(term_to_block(t, decls), "result")``, built directly."""
    lines = list(header)
    ids: dict[Term, int] = {}

    def ref(k: Term) -> str:
        if k[0] == "k":
            return f"{k[2]}:i{k[1]}"
        if k[0] in ("v", "b"):
            return f"%{k[2]}"
        return f"%{lower(k)}"

    def lower(u: Term) -> int:
        if u in ids:
            return ids[u]
        ops = ", ".join(ref(k) for k in u[2:])
        ids[u] = len(lines)
        lines.append(f"%{ids[u]}:i{u[1]} = {u[0]} {ops}")
        return ids[u]

    if t[0] == "k":
        root = len(lines)
        lines.append(f"%{root}:i{t[1]} = const {t[2]}")
    elif t[0] == "v":
        root = t[2]
    else:
        root = lower(t)
    lines.append(f"result %{root}")
    return "\n".join(lines)


def _candidates(lhs: Block, cfg: SynthConfig, costs: CostModel, ceiling: float):
    space = _Space(lhs, cfg, costs, ceiling)
    own = block_to_term(lhs)
    return [(space.info[t][0], t) for t in space.roots() if t != own]


def _max_cost(cfg: SynthConfig, costs: CostModel) -> int:
    ops = cfg.opcode_set or {Opcode.ADD}
    return cfg.max_instructions * max(costs[o] for o in ops)


def enumerate_candidates(lhs: Block, cfg: SynthConfig = SynthConfig(),
                         costs: CostModel = DEFAULT_COSTS) -> list[Block]:
    """Cheapest ``cfg.candidate_cap`` candidates, ordered by (cost, canonical text)."""
    top = _max_cost(cfg, costs)
    ceiling = 0
    while True:
        found = _candidates(lhs, cfg, costs, ceiling)
        if len(found) >= cfg.candidate_cap or ceiling >= top:
            break
        ceiling += 1
    decls = lhs.decls
    header = print_block(lhs).splitlines()[:len(decls)]
    ranked = sorted((cost, _term_text(t, header), t) for cost, t in found)
    return [term_to_block(t, decls) for _, _, t in ranked[:cfg.candidate_cap]]


def count_space(lhs: Block, cfg: SynthConfig = SynthConfig(),
                costs: CostModel = DEFAULT_COSTS) -> int:
    """Size of the whole deduplicated space before truncation.

    Exponential in ``max_instructions``; meant for small configurations.
    """
    return len(_candidates(lhs, cfg, costs, float("inf")))
