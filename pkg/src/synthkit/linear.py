"""Linear normal form for arithmetic terms.

A term of numeric sort is viewed as  sum(coeff_i * leaf_i) + const  where the
leaves are maximal non-arithmetic subterms: uninterpreted constants and
applications, outputs, and floor-division terms.  Anything non-linear is
rejected; the language only multiplies by numeric constants.  Coefficients
and the constant come back as int when they are whole, Fraction otherwise.
"""
from __future__ import annotations

from typing import Dict, Tuple

from .simplex import narrow
from .terms import Term, UnsupportedError


_memo: Dict[int, Tuple[Tuple[Tuple[Term, object], ...], object]] = {}


def linform(t: Term) -> Tuple[Dict[Term, object], object]:
    hit = _memo.get(t.tid)
    if hit is not None:
        return dict(hit[0]), hit[1]
    coeffs: Dict[Term, object] = {}
    const = 0

    def add(node: Term, c) -> None:
        nonlocal const
        if node.op == "num":
            const += c * node.value
        elif node.op == "add":
            for a in node.args:
                add(a, c)
        elif node.op == "mul":
            k, body = node.args
            if k.op != "num":
                raise UnsupportedError(f"non-constant coefficient in {node}")
            add(body, c * k.value)
        elif node.op in ("app", "div", "mod"):
            coeffs[node] = coeffs.get(node, 0) + c
        elif node.op == "ite":
            raise UnsupportedError("ite must be lifted before linearization")
        else:
            raise UnsupportedError(f"not an arithmetic term: {node}")

    add(t, 1)
    out = {k: narrow(v) for k, v in coeffs.items() if v != 0}
    const = narrow(const)
    _memo[t.tid] = (tuple(out.items()), const)
    return out, const
