import random

import pytest
from hypothesis import strategies as st

from superprune.ir import Instruction, Lit, Opcode, Ref, make_block, parse_block

SAME_WIDTH = [Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.UDIV, Opcode.SDIV, Opcode.UREM,
              Opcode.SREM, Opcode.AND, Opcode.OR, Opcode.XOR, Opcode.SHL, Opcode.LSHR,
              Opcode.ASHR, Opcode.ADDNSW, Opcode.SUBNSW, Opcode.MULNSW]
COMPARE = [Opcode.EQ, Opcode.NE, Opcode.ULT, Opcode.ULE, Opcode.SLT, Opcode.SLE]


def P(text: str):
    """Parse with ``;`` as a line separator, for compact test fixtures."""
    return parse_block(text)


def random_block(rng: random.Random, width: int = 4, n_vars: int = 1, n_ops: int = 3):
    """A random well-typed block: a chain of same-width ops, optionally topped by select."""
    insts = [Instruction(i, Opcode.VAR, width) for i in range(n_vars)]

    def operand():
        if rng.random() < 0.3:
            return Lit(rng.randrange(1 << width), width)
        return Ref(rng.randrange(len(insts)))

    for _ in range(n_ops):
        op = rng.choice(SAME_WIDTH)
        insts.append(Instruction(len(insts), op, width, (operand(), operand())))
    if rng.random() < 0.3:
        cmp = Instruction(len(insts), rng.choice(COMPARE), 1, (operand(), operand()))
        arms = (operand(), operand())
        insts.append(cmp)
        insts.append(Instruction(len(insts), Opcode.SELECT, width, (Ref(cmp.id), *arms)))
    return make_block(insts, len(insts) - 1)


@st.composite
def blocks(draw, widths=(4, 8), max_vars=2, max_ops=4):
    seed = draw(st.integers(0, 2**32 - 1))
    width = draw(st.sampled_from(widths))
    n_vars = draw(st.integers(1, max_vars))
    n_ops = draw(st.integers(1, max_ops))
    return random_block(random.Random(seed), width, n_vars, n_ops)


@pytest.fixture
def mul2():
    return P("%0:i8 = var ; %1:i8 = mul %0, 2:i8 ; infer %1")


# ---------------------------------------------------------- acceptance report

_CRITERIA: dict[str, tuple[int, str]] = {}
_VERDICTS: dict[int, tuple[str, str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _CRITERIA[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    number, title = _CRITERIA[report.nodeid]
    if report.when == "call" or report.failed:
        if report.passed:
            _VERDICTS.setdefault(number, ("PASS", title))
        else:
            _VERDICTS[number] = ("FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        verdict, title = _VERDICTS[number]
        terminalreporter.write_line(f"{verdict} criterion {number}: {title}")
