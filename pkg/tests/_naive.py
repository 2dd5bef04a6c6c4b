"""A deliberately plain scalar evaluator used to cross-check the vectorized one.

It shares nothing with ``superprune.semantics`` except the Block data type.
"""

from superprune.ir import Lit


def _signed(v, w):
    return v - (1 << w) if v >> (w - 1) else v


def naive_eval(block, env, sels=None):
    sels = sels or {}
    vals, widths = {}, {}

    def get(o):
        if isinstance(o, Lit):
            return o.value & ((1 << o.width) - 1), o.width
        return vals[o.id], widths[o.id]

    for inst in block.insts:
        op, w = inst.op.value, inst.width
        m = (1 << w) - 1 if w else 0
        widths[inst.id] = w
        if op == "var":
            vals[inst.id] = env[inst.id] & m
            continue
        if op == "block":
            vals[inst.id] = sels[inst.id]
            continue
        if op == "const":
            vals[inst.id] = inst.value & m
            continue
        if op == "select":
            (c, _), (a, _), (b, _) = map(get, inst.operands)
            vals[inst.id] = a if c else b
            continue
        if op == "phi":
            arms = [get(o)[0] for o in inst.operands[1:]]
            vals[inst.id] = arms[vals[inst.operands[0].id] % len(arms)]
            continue
        (a, wa), (b, _) = map(get, inst.operands)
        sa, sb = _signed(a, wa), _signed(b, wa)
        if op in ("add", "addnsw"):
            r = a + b
        elif op in ("sub", "subnsw"):
            r = a - b
        elif op in ("mul", "mulnsw"):
            r = a * b
        elif op == "and":
            r = a & b
        elif op == "or":
            r = a | b
        elif op == "xor":
            r = a ^ b
        elif op == "udiv":
            r = m if b == 0 else a // b
        elif op == "urem":
            r = a if b == 0 else a % b
        elif op == "sdiv":
            if sb == 0:
                r = 1 if sa < 0 else -1
            else:
                q = abs(sa) // abs(sb)
                r = -q if (sa < 0) != (sb < 0) else q
        elif op == "srem":
            if sb == 0:
                r = a
            else:
                q = abs(sa) % abs(sb)
                r = -q if sa < 0 else q
        elif op == "shl":
            r = 0 if b >= w else a << b
        elif op == "lshr":
            r = 0 if b >= w else a >> b
        elif op == "ashr":
            r = sa >> min(b, w - 1)
        elif op == "eq":
            r = int(a == b)
        elif op == "ne":
            r = int(a != b)
        elif op == "ult":
            r = int(a < b)
        elif op == "ule":
            r = int(a <= b)
        elif op == "slt":
            r = int(sa < sb)
        elif op == "sle":
            r = int(sa <= sb)
        else:
            raise AssertionError(op)
        vals[inst.id] = r & m
    return vals[block.root]
