"""Souper-style integer IR: data model, text format, dataflow graphs, costs.

A block is a topologically ordered list of instructions with a single root.
Declarations (``var`` and ``block``) always come first and are kept even when
the root does not use them, so a left-hand side and every candidate built
for it share one input signature. All other instructions must be reachable
from the root; unreachable ones are dropped on construction.

Text format, one instruction per line::

    %0:i8 = var
    %1:i8 = mul %0, 2:i8
    infer %1

Candidate files end with ``result %<id>`` instead of ``infer``. Comments
start with ``;``. Several statements may share a line when separated by
``;`` only if the remainder is itself a statement (used by tests, e.g.
``"%0:i8 = var ; infer %0"``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Union


class Opcode(str, enum.Enum):
    VAR = "var"
    CONST = "const"
    ADD = "add"
    ADDNSW = "addnsw"
    SUB = "sub"
    SUBNSW = "subnsw"
    MUL = "mul"
    MULNSW = "mulnsw"
    UDIV = "udiv"
    SDIV = "sdiv"
    UREM = "urem"
    SREM = "srem"
    AND = "and"
    OR = "or"
    XOR = "xor"
    SHL = "shl"
    LSHR = "lshr"
    ASHR = "ashr"
    EQ = "eq"
    NE = "ne"
    ULT = "ult"
    SLT = "slt"
    ULE = "ule"
    SLE = "sle"
    SELECT = "select"
    PHI = "phi"
    BLOCK = "block"

    def __str__(self) -> str:
        return self.value


DECLS = frozenset({Opcode.VAR, Opcode.BLOCK})
COMPARES = frozenset({Opcode.EQ, Opcode.NE, Opcode.ULT, Opcode.SLT, Opcode.ULE, Opcode.SLE})
SHIFTS = frozenset({Opcode.SHL, Opcode.LSHR, Opcode.ASHR})
COMMUTATIVE = frozenset(
    {Opcode.ADD, Opcode.ADDNSW, Opcode.MUL, Opcode.MULNSW, Opcode.AND, Opcode.OR,
     Opcode.XOR, Opcode.EQ, Opcode.NE}
)
BINARY = frozenset(op for op in Opcode if op not in
                   {Opcode.VAR, Opcode.CONST, Opcode.SELECT, Opcode.PHI, Opcode.BLOCK})

WIDTHS = (1, 4, 8, 16, 32)


def arity(op: Opcode) -> int | None:
    """Fixed operand count, or None for phi (block ref + one value per predecessor)."""
    if op in (Opcode.VAR, Opcode.CONST, Opcode.BLOCK):
        return 0
    if op is Opcode.SELECT:
        return 3
    if op is Opcode.PHI:
        return None
    return 2


_NORMALIZE = {
    Opcode.ADDNSW: "add",
    Opcode.SUBNSW: "sub",
    Opcode.MULNSW: "mul",
    Opcode.SHL: "mul",
    Opcode.UDIV: "div",
    Opcode.SDIV: "div",
    Opcode.UREM: "rem",
    Opcode.SREM: "rem",
    Opcode.ULT: "lt",
    Opcode.SLT: "lt",
    Opcode.ULE: "le",
    Opcode.SLE: "le",
    Opcode.LSHR: "shr",
    Opcode.ASHR: "shr",
}

TOKENS = ("var", "const", "add", "sub", "mul", "div", "rem", "and", "or", "xor",
          "shr", "eq", "ne", "lt", "le", "select", "phi", "block")


def normalize_opcode(op: Opcode | str) -> str:
    """Group opcodes that differ only in flags or signedness; shl counts as mul."""
    if isinstance(op, str) and not isinstance(op, Opcode):
        if op in TOKENS:
            return op
        op = Opcode(op)
    return _NORMALIZE.get(op, op.value)


class Ref(NamedTuple):
    id: int


class Lit(NamedTuple):
    value: int
    width: int


Operand = Union[Ref, Lit]


@dataclass(frozen=True)
class Instruction:
    id: int
    op: Opcode
    width: int
    operands: tuple[Operand, ...] = ()
    value: int | None = None  # const value, or predecessor count of a block


class IRError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(where + message)


class IRSyntaxError(IRError):
    pass


class WidthMismatch(IRError):
    pass


class UndefinedId(IRError):
    pass


class ArityError(IRError):
    pass


def _mask(width: int) -> int:
    return (1 << width) - 1


@dataclass(frozen=True)
class Block:
    """Canonical block: ids equal positions, declarations first.

    Build through :func:`make_block` or :func:`parse_block`; both renumber,
    validate and drop dead code, so two blocks compare equal exactly when
    they are structurally identical.
    """

    insts: tuple[Instruction, ...]
    root: int
    _live: frozenset[int] = field(default=frozenset(), compare=False, repr=False)

    @property
    def root_inst(self) -> Instruction:
        return self.insts[self.root]

    @property
    def width(self) -> int:
        return self.insts[self.root].width

    @property
    def decls(self) -> tuple[Instruction, ...]:
        return tuple(i for i in self.insts if i.op in DECLS)

    @property
    def inputs(self) -> tuple[Instruction, ...]:
        return tuple(i for i in self.insts if i.op is Opcode.VAR)

    @property
    def blocks(self) -> tuple[Instruction, ...]:
        return tuple(i for i in self.insts if i.op is Opcode.BLOCK)

    def signature(self) -> tuple[tuple[str, int, int | None], ...]:
        return tuple((i.op.value, i.width, i.value) for i in self.decls)

    def live(self) -> list[Instruction]:
        """Instructions reachable from the root, in block order."""
        return [i for i in self.insts if i.id in self._live]

    def __str__(self) -> str:
        return print_block(self)


def _reachable(insts: dict[int, Instruction], root: int) -> set[int]:
    seen: set[int] = set()
    stack = [root]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        stack.extend(o.id for o in insts[i].operands if isinstance(o, Ref))
    return seen


def make_block(insts: Iterable[Instruction], root: int) -> Block:
    """Validate, drop dead code and renumber into canonical order.

    Declarations keep their relative order. Other instructions are laid
    out in depth-first postorder from the root, operands left to right.
    """
    by_id = {i.id: i for i in insts}
    if root not in by_id:
        raise UndefinedId(f"root %{root} is not defined")
    for inst in by_id.values():
        _check(inst, by_id)
    order: list[int] = [i.id for i in by_id.values() if i.op in DECLS]
    placed = set(order)

    # iterative postorder so deep chains do not hit the recursion limit
    stack: list[tuple[int, int]] = [(root, 0)]
    while stack:
        node, k = stack.pop()
        if node in placed:
            continue
        ops = [o.id for o in by_id[node].operands if isinstance(o, Ref)]
        if k < len(ops):
            stack.append((node, k + 1))
            if ops[k] not in placed:
                stack.append((ops[k], 0))
        else:
            placed.add(node)
            order.append(node)

    renum = {old: new for new, old in enumerate(order)}
    out = []
    for old in order:
        inst = by_id[old]
        operands = tuple(Ref(renum[o.id]) if isinstance(o, Ref) else o for o in inst.operands)
        out.append(Instruction(renum[old], inst.op, inst.width, operands, inst.value))
    new_root = renum[root]
    live = _reachable({i.id: i for i in out}, new_root)
    return Block(tuple(out), new_root, frozenset(live))


def _operand_width(o: Operand, by_id: dict[int, Instruction]) -> int:
    if isinstance(o, Lit):
        return o.width
    if o.id not in by_id:
        raise UndefinedId(f"%{o.id} is not defined")
    return by_id[o.id].width


def _check(inst: Instruction, by_id: dict[int, Instruction]) -> None:
    op = inst.op
    n = arity(op)
    if op is Opcode.BLOCK:
        if inst.value is None or inst.value < 2:
            raise ArityError("block needs a predecessor count >= 2")
        return
    if inst.width not in WIDTHS:
        raise WidthMismatch(f"unsupported width i{inst.width}")
    if n is not None and len(inst.operands) != n:
        raise ArityError(f"{op} takes {n} operands, got {len(inst.operands)}")
    for o in inst.operands:
        if isinstance(o, Ref):
            if o.id not in by_id:
                raise UndefinedId(f"%{o.id} is not defined")
            if o.id >= inst.id and by_id[o.id].op not in DECLS:
                # ids only need to be defined; cycles are caught here
                if _depends_on(by_id, o.id, inst.id):
                    raise IRError(f"cycle through %{inst.id}")
    if op is Opcode.CONST:
        if inst.value is None:
            raise ArityError("const needs a value")
        return
    if op is Opcode.VAR:
        return
    widths = [_operand_width(o, by_id) for o in inst.operands]
    if op in COMPARES:
        if inst.width != 1:
            raise WidthMismatch(f"{op} produces i1, declared i{inst.width}")
        if widths[0] != widths[1]:
            raise WidthMismatch(f"{op} operands have widths i{widths[0]} and i{widths[1]}")
    elif op is Opcode.SELECT:
        if widths[1] != inst.width or widths[2] != inst.width:
            raise WidthMismatch(f"select arms must be i{inst.width}")
    elif op is Opcode.PHI:
        first = inst.operands[0] if inst.operands else None
        if not isinstance(first, Ref) or by_id[first.id].op is not Opcode.BLOCK:
            raise ArityError("phi must start with a block reference")
        preds = by_id[first.id].value
        if len(inst.operands) - 1 != preds:
            raise ArityError(f"phi over a {preds}-way block needs {preds} values")
        if any(w != inst.width for w in widths[1:]):
            raise WidthMismatch(f"phi values must be i{inst.width}")
    else:
        if any(w != inst.width for w in widths):
            raise WidthMismatch(f"{op} operands must be i{inst.width}, got {widths}")
    for o in inst.operands:
        if isinstance(o, Lit) and not 0 <= o.value <= _mask(o.width):
            raise WidthMismatch(f"literal {o.value} does not fit i{o.width}")


def _depends_on(by_id: dict[int, Instruction], start: int, target: int) -> bool:
    return target in _reachable(by_id, start)


# ---------------------------------------------------------------- text format

_ID = r"%([A-Za-z0-9_.]+)"
_DEF_RE = re.compile(rf"^{_ID}(?::i(\d+))?\s*=\s*([a-z]+)\s*(.*)$")
_ROOT_RE = re.compile(rf"^(infer|result)\s+{_ID}\s*$")
_LIT_RE = re.compile(r"^(-?\d+):i(\d+)$")
_REF_RE = re.compile(rf"^{_ID}$")


def _statements(text: str) -> Iterable[tuple[int, int, str]]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        col = 1
        for part in raw.split(";"):
            stmt = part.strip()
            if stmt and (_DEF_RE.match(stmt) or _ROOT_RE.match(stmt)):
                yield lineno, col + part.index(stmt), stmt
            elif stmt and col == 1:
                yield lineno, col + part.index(stmt), stmt
            elif stmt:
                break  # free-form comment text after ';'
            col += len(part) + 1


def parse_block(text: str) -> Block:
    """Parse IR text into a canonical :class:`Block`."""
    names: dict[str, int] = {}
    insts: dict[int, Instruction] = {}
    root: int | None = None
    for line, col, stmt in _statements(text):
        m = _ROOT_RE.match(stmt)
        if m:
            if root is not None:
                raise IRSyntaxError("more than one root line", line, col)
            if m.group(2) not in names:
                raise UndefinedId(f"%{m.group(2)} is not defined", line, col)
            root = names[m.group(2)]
            continue
        m = _DEF_RE.match(stmt)
        if not m:
            raise IRSyntaxError(f"cannot parse {stmt!r}", line, col)
        name, width_s, mnemonic, rest = m.groups()
        if name in names:
            raise IRSyntaxError(f"%{name} redefined", line, col)
        try:
            op = Opcode(mnemonic)
        except ValueError:
            raise IRSyntaxError(f"unknown opcode {mnemonic!r}", line, col) from None
        iid = len(names)
        value = None
        operands: list[Operand] = []
        rest = rest.strip()
        if op in (Opcode.CONST, Opcode.BLOCK):
            if not re.fullmatch(r"-?\d+", rest):
                raise IRSyntaxError(f"{op} expects an integer, got {rest!r}", line, col)
            value = int(rest)
        elif rest:
            for tok in (t.strip() for t in rest.split(",")):
                lm = _LIT_RE.match(tok)
                rm = _REF_RE.match(tok)
                if lm:
                    w = int(lm.group(2))
                    operands.append(Lit(int(lm.group(1)) & _mask(w), w))
                elif rm:
                    if rm.group(1) not in names:
                        raise UndefinedId(f"%{rm.group(1)} is not defined", line, col)
                    operands.append(Ref(names[rm.group(1)]))
                else:
                    raise IRSyntaxError(f"bad operand {tok!r}", line, col)
        if op is Opcode.BLOCK:
            width = 0
        elif width_s is None:
            raise IRSyntaxError(f"%{name} needs a width", line, col)
        else:
            width = int(width_s)
        if op is Opcode.CONST:
            value &= _mask(width)
        inst = Instruction(iid, op, width, tuple(operands), value)
        try:
            _check(inst, insts)
        except IRError as e:
            raise type(e)(str(e), line, col) from None
        names[name] = iid
        insts[iid] = inst
    if root is None:
        raise IRSyntaxError("missing 'infer' or 'result' line")
    if insts[root].op is Opcode.BLOCK:
        raise IRSyntaxError("a block declaration cannot be the root")
    return make_block(insts.values(), root)


def _fmt_operand(o: Operand) -> str:
    return f"%{o.id}" if isinstance(o, Ref) else f"{o.value}:i{o.width}"


def print_block(b: Block, keyword: str = "infer") -> str:
    """Canonical text; ``keyword`` is ``infer`` for LHS files, ``result`` for candidates."""
    lines = []
    for inst in b.insts:
        if inst.op is Opcode.BLOCK:
            lines.append(f"%{inst.id} = block {inst.value}")
        elif inst.op is Opcode.CONST:
            lines.append(f"%{inst.id}:i{inst.width} = const {inst.value}")
        elif inst.operands:
            ops = ", ".join(_fmt_operand(o) for o in inst.operands)
            lines.append(f"%{inst.id}:i{inst.width} = {inst.op} {ops}")
        else:
            lines.append(f"%{inst.id}:i{inst.width} = {inst.op}")
    lines.append(f"{keyword} %{b.root}")
    return "\n".join(lines)


# ------------------------------------------------------------- graph & costs

@dataclass(frozen=True)
class DataflowGraph:
    nodes: dict[int, str]
    edges: tuple[tuple[int, int], ...]  # producer -> consumer, one per operand use

    def degrees(self) -> dict[int, int]:
        deg = dict.fromkeys(self.nodes, 0)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg


def build_dfg(b: Block) -> DataflowGraph:
    live = b.live()
    nodes = {i.id: i.op.value for i in live}
    edges = tuple((o.id, i.id) for i in live for o in i.operands if isinstance(o, Ref))
    return DataflowGraph(nodes, edges)


def tree_depth(b: Block) -> int:
    depth: dict[int, int] = {}
    for inst in b.live():
        refs = [depth[o.id] for o in inst.operands if isinstance(o, Ref)]
        depth[inst.id] = 1 + max(refs, default=0)
    return depth[b.root]


@dataclass(frozen=True)
class CostModel:
    costs: dict[Opcode, int]

    def __getitem__(self, op: Opcode) -> int:
        return self.costs[op]


def default_cost_model() -> CostModel:
    costs = dict.fromkeys(Opcode, 1)
    for op in (Opcode.VAR, Opcode.CONST, Opcode.BLOCK):
        costs[op] = 0
    for op in (Opcode.MUL, Opcode.MULNSW):
        costs[op] = 2
    for op in (Opcode.UDIV, Opcode.SDIV, Opcode.UREM, Opcode.SREM):
        costs[op] = 3
    return CostModel(costs)


DEFAULT_COSTS = default_cost_model()


def block_cost(b: Block, m: CostModel = DEFAULT_COSTS) -> int:
    return sum(m[i.op] for i in b.live())
