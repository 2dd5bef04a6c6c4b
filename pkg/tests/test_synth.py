import pytest
from hypothesis import given, settings

from superprune.ir import Opcode, block_cost, print_block
from superprune.synth import SynthConfig, count_space, enumerate_candidates

from conftest import P, blocks

SMALL = SynthConfig(max_instructions=1, candidate_cap=300)


def texts(cands):
    return [print_block(c, "result") for c in cands]


def test_identity_lhs_starts_with_free_leaves():
    x = P("%0:i8 = var ; infer %0")
    cands = enumerate_candidates(x, SMALL)
    costs = [block_cost(c) for c in cands]
    assert costs[:4] == [0, 0, 0, 0]
    assert {c.root_inst.value for c in cands[:4]} == {0, 1, 2, 255}
    assert "%0:i8 = var\n%1:i8 = add 0:i8, %0\nresult %1" in texts(cands)
    assert x not in cands


def test_shl1_among_candidates_for_mul2():
    for w in (4, 8):
        lhs = P(f"%0:i{w} = var ; %1:i{w} = mul %0, 2:i{w} ; infer %1")
        shl = P(f"%0:i{w} = var ; %1:i{w} = shl %0, 1:i{w} ; result %1")
        cands = enumerate_candidates(lhs)
        assert shl in cands
        assert lhs not in cands


def test_sorted_unique_capped(mul2):
    cands = enumerate_candidates(mul2)
    assert len(cands) == 300
    keys = [(block_cost(c), print_block(c)) for c in cands]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_type_preservation():
    lhs = P("%0:i8 = var ; %1:i8 = var ; %2:i1 = eq %0, %1 ; infer %2")
    for c in enumerate_candidates(lhs):
        assert c.width == 1
        assert c.signature() == lhs.signature()


def test_commutative_dedup():
    lhs = P("%0:i8 = var ; %1:i8 = var ; %2:i8 = sub %0, %1 ; infer %2")
    t = texts(enumerate_candidates(lhs, SMALL))
    adds = [s for s in t if " add %0, %1" in s or " add %1, %0" in s]
    assert len(adds) == 1
    subs = [s for s in t if " sub %0, %1" in s or " sub %1, %0" in s]
    assert len(subs) == 1  # sub %0, %1 is the LHS itself and is excluded


def test_no_phi_by_default():
    lhs = P("%0 = block 2 ; %1:i8 = var ; %2:i8 = var ; %3:i8 = phi %0, %1, %2 ; infer %3")
    cands = enumerate_candidates(lhs)
    assert all(i.op is not Opcode.PHI for c in cands for i in c.insts)
    assert all(c.signature() == lhs.signature() for c in cands)


def test_opcode_set_restricts():
    cfg = SynthConfig(max_instructions=2, opcode_set=frozenset({Opcode.ADD}))
    ops = {i.op for c in enumerate_candidates(P("%0:i8 = var ; infer %0"), cfg) for i in c.insts}
    assert ops <= {Opcode.VAR, Opcode.CONST, Opcode.ADD}


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(candidate_cap=0)


def test_count_space_leaves_only():
    x = P("%0:i8 = var ; infer %0")
    assert count_space(x, SynthConfig(max_instructions=0)) == 4
    xy = P("%0:i8 = var ; %1:i8 = var ; %2:i8 = add %0, %1 ; infer %2")
    assert count_space(xy, SynthConfig(max_instructions=0)) == 6


def test_count_space_monotone_and_bounds():
    x = P("%0:i4 = var ; infer %0")
    counts = [count_space(x, SynthConfig(max_instructions=m)) for m in (0, 1, 2)]
    assert counts == sorted(counts)
    assert counts[2] >= len(enumerate_candidates(x, SynthConfig(max_instructions=2)))


def test_deterministic(mul2):
    assert texts(enumerate_candidates(mul2)) == texts(enumerate_candidates(mul2))


@settings(max_examples=15, deadline=None)
@given(blocks(widths=(4,), max_vars=1, max_ops=2))
def test_candidates_well_formed(lhs):
    cands = enumerate_candidates(lhs, SynthConfig(candidate_cap=50))
    keys = [(block_cost(c), print_block(c)) for c in cands]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    assert all(c.width == lhs.width and c.signature() == lhs.signature() for c in cands)
    assert lhs not in cands
