"""Sorts, symbols, and hash-consed terms.

Everything downstream (solvers, projection, the synthesis loop) works on the
term language built here: quantifier-free formulas over equality, linear
integer/real arithmetic, and uninterpreted functions.  Terms are interned, so
structural equality is object identity and term ids give a stable, global
construction order that the rest of the engine uses for deterministic
tie-breaking.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple


class SynthError(Exception):
    """Base class for engine errors."""


class UnsupportedError(SynthError):
    """Input is outside the supported quantifier-free fragment."""


@dataclass(frozen=True)
class Sort:
    name: str

    def __str__(self) -> str:
        return self.name


BOOL = Sort("Bool")
INT = Sort("Int")
REAL = Sort("Real")


def is_numeric(sort: Sort) -> bool:
    return sort == INT or sort == REAL


# Symbol kinds.  Outputs are the synthesis targets; uncomputable symbols may
# appear in specifications but never in synthesized programs.
COMPUTABLE = "computable"
UNCOMPUTABLE = "uncomputable"
OUTPUT = "output"


@dataclass(frozen=True)
class Symbol:
    name: str
    arg_sorts: Tuple[Sort, ...]
    sort: Sort
    kind: str = COMPUTABLE

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=False)
class Term:
    """Interned term node.  Compare with `is`; never construct directly."""

    op: str
    args: Tuple["Term", ...]
    sort: Sort
    sym: Optional[Symbol] = None
    value: Optional[Fraction] = None
    tid: int = -1

    def __str__(self) -> str:
        return to_sexpr(self)

    def __repr__(self) -> str:
        return to_sexpr(self)


class _TermStore:
    """Interning table.  Append-only; construction goes through one lock."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._table: Dict[tuple, Term] = {}
        self._count = 0

    def mk(self, op: str, args: Sequence[Term], sort: Sort,
           sym: Optional[Symbol] = None, value: Optional[Fraction] = None) -> Term:
        key = (op, sym, value, sort, tuple(t.tid for t in args))
        hit = self._table.get(key)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._table.get(key)
            if hit is not None:
                return hit
            t = Term(op, tuple(args), sort, sym, value, self._count)
            self._count += 1
            self._table[key] = t
            return t


_STORE = _TermStore()

TRUE = _STORE.mk("true", (), BOOL)
FALSE = _STORE.mk("false", (), BOOL)


def mk_app(sym: Symbol, *args: Term) -> Term:
    if len(args) != sym.arity:
        raise SynthError(f"{sym.name} expects {sym.arity} arguments, got {len(args)}")
    for a, want in zip(args, sym.arg_sorts):
        if a.sort != want:
            raise SynthError(f"argument of {sym.name} has sort {a.sort}, expected {want}")
    return _STORE.mk("app", args, sym.sort, sym=sym)


def mk_const(sym: Symbol) -> Term:
    return mk_app(sym)


def mk_num(value, sort: Sort = INT) -> Term:
    v = Fraction(value)
    if sort == INT and v.denominator != 1:
        raise SynthError(f"non-integer literal {v} at sort Int")
    if not is_numeric(sort):
        raise SynthError("numerals must be Int or Real")
    return _STORE.mk("num", (), sort, value=v)


def mk_bool(b: bool) -> Term:
    return TRUE if b else FALSE


def _flatten(op: str, fs: Iterable[Term]) -> List[Term]:
    out: List[Term] = []
    for f in fs:
        if f.op == op:
            out.extend(f.args)
        else:
            out.append(f)
    return out


def mk_and(*fs: Term) -> Term:
    flat = []
    for f in _flatten("and", fs):
        if f is FALSE:
            return FALSE
        if f is not TRUE and f not in flat:
            flat.append(f)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return _STORE.mk("and", flat, BOOL)


def mk_or(*fs: Term) -> Term:
    flat = []
    for f in _flatten("or", fs):
        if f is TRUE:
            return TRUE
        if f is not FALSE and f not in flat:
            flat.append(f)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return _STORE.mk("or", flat, BOOL)


def mk_not(f: Term) -> Term:
    if f is TRUE:
        return FALSE
    if f is FALSE:
        return TRUE
    if f.op == "not":
        return f.args[0]
    return _STORE.mk("not", (f,), BOOL)


def mk_implies(a: Term, b: Term) -> Term:
    return _STORE.mk("implies", (a, b), BOOL)


def mk_ite(c: Term, a: Term, b: Term) -> Term:
    if a.sort != b.sort:
        raise SynthError("ite branches must share a sort")
    if c is TRUE:
        return a
    if c is FALSE:
        return b
    return _STORE.mk("ite", (c, a, b), a.sort)


def mk_eq(a: Term, b: Term) -> Term:
    if a.sort != b.sort:
        raise SynthError(f"equating sorts {a.sort} and {b.sort}")
    if a is b:
        return TRUE
    if a.op == "num" and b.op == "num":
        return mk_bool(a.value == b.value)
    if b.tid < a.tid:
        a, b = b, a
    return _STORE.mk("eq", (a, b), BOOL)


def mk_le(a: Term, b: Term) -> Term:
    if not (is_numeric(a.sort) and a.sort == b.sort):
        raise SynthError("<= needs numeric operands of one sort")
    if a.op == "num" and b.op == "num":
        return mk_bool(a.value <= b.value)
    return _STORE.mk("le", (a, b), BOOL)


def mk_lt(a: Term, b: Term) -> Term:
    if not (is_numeric(a.sort) and a.sort == b.sort):
        raise SynthError("< needs numeric operands of one sort")
    if a.op == "num" and b.op == "num":
        return mk_bool(a.value < b.value)
    return _STORE.mk("lt", (a, b), BOOL)


def mk_ge(a: Term, b: Term) -> Term:
    return mk_le(b, a)


def mk_gt(a: Term, b: Term) -> Term:
    return mk_lt(b, a)


def mk_add(*ts: Term) -> Term:
    flat = _flatten("add", ts)
    if not flat:
        raise SynthError("empty sum")
    sort = flat[0].sort
    for t in flat:
        if t.sort != sort:
            raise SynthError("mixed-sort sum")
    if len(flat) == 1:
        return flat[0]
    return _STORE.mk("add", flat, sort)


def mk_mul(coeff, t: Term) -> Term:
    """Scalar multiple.  Only linear terms exist in this language."""
    c = Fraction(coeff)
    if c == 1:
        return t
    if c == 0:
        return mk_num(0, t.sort)
    if t.op == "num":
        return mk_num(c * t.value, t.sort)
    if t.sort == INT and c.denominator != 1:
        raise SynthError("fractional coefficient at sort Int")
    return _STORE.mk("mul", (mk_num(c, t.sort), t), t.sort)


def mk_neg(t: Term) -> Term:
    return mk_mul(-1, t)


def mk_sub(a: Term, b: Term) -> Term:
    return mk_add(a, mk_mul(-1, b))


def mk_div(t: Term, k: int) -> Term:
    """Integer floor division by a positive constant."""
    if t.sort != INT or k <= 0:
        raise SynthError("div needs an Int numerator and a positive constant divisor")
    if t.op == "num":
        return mk_num(t.value.numerator // k)
    return _STORE.mk("div", (t, mk_num(k)), INT)


def mk_mod(t: Term, k: int) -> Term:
    if t.sort != INT or k <= 0:
        raise SynthError("mod needs an Int numerator and a positive constant divisor")
    if t.op == "num":
        return mk_num(t.value.numerator % k)
    return _STORE.mk("mod", (t, mk_num(k)), INT)


ATOM_OPS = ("app", "eq", "le", "lt", "true", "false")


def is_atom(t: Term) -> bool:
    return t.op in ATOM_OPS and t.sort == BOOL


@dataclass(frozen=True)
class Literal:
    """Atom with a polarity."""

    atom: Term
    pos: bool = True

    def negate(self) -> "Literal":
        return Literal(self.atom, not self.pos)

    def term(self) -> Term:
        return self.atom if self.pos else mk_not(self.atom)

    def __str__(self) -> str:
        return to_sexpr(self.term())

    __repr__ = __str__


def lit_key(lit: Literal) -> Tuple[int, bool]:
    return (lit.atom.tid, lit.pos)


def lits_term(lits: Iterable[Literal]) -> Term:
    return mk_and(*(l.term() for l in lits))


def subterms(t: Term) -> Iterator[Term]:
    """All distinct subterms, children before parents."""
    seen: Set[int] = set()
    stack = [(t, False)]
    while stack:
        node, expanded = stack.pop()
        if node.tid in seen:
            continue
        if expanded:
            seen.add(node.tid)
            yield node
        else:
            stack.append((node, True))
            for a in node.args:
                stack.append((a, False))


def symbols_of(t: Term) -> Set[Symbol]:
    out: Set[Symbol] = set()
    for s in subterms(t):
        if s.sym is not None:
            out.add(s.sym)
    return out


def contains_any(t: Term, syms: Set[Symbol]) -> bool:
    if not syms:
        return False
    return any(s.sym in syms for s in subterms(t) if s.sym is not None)


def is_computable(t: Term) -> bool:
    """True when every symbol in t is computable (theory operators always are)."""
    return all(s.kind == COMPUTABLE for s in symbols_of(t))


def term_size(t: Term, _memo: Dict[int, int] = {}) -> int:
    got = _memo.get(t.tid)
    if got is not None:
        return got
    n = 1 + sum(term_size(a) for a in t.args)
    _memo[t.tid] = n
    return n


def remake(node: Term, args: Tuple[Term, ...]) -> Term:
    """Rebuild a node with new arguments through the simplifying constructors."""
    op = node.op
    if op == "app":
        return mk_app(node.sym, *args)
    if op == "eq":
        return mk_eq(args[0], args[1])
    if op == "le":
        return mk_le(args[0], args[1])
    if op == "lt":
        return mk_lt(args[0], args[1])
    if op == "and":
        return mk_and(*args)
    if op == "or":
        return mk_or(*args)
    if op == "not":
        return mk_not(args[0])
    if op == "implies":
        return mk_implies(args[0], args[1])
    if op == "ite":
        return mk_ite(args[0], args[1], args[2])
    if op == "add":
        return mk_add(*args)
    if op == "mul":
        return mk_mul(args[0].value, args[1])
    if op == "div":
        return mk_div(args[0], int(args[1].value))
    if op == "mod":
        return mk_mod(args[0], int(args[1].value))
    return _STORE.mk(op, args, node.sort, node.sym, node.value)


def substitute(t: Term, mapping: Dict[Symbol, Term]) -> Term:
    """Replace constant-symbol occurrences; parallel, capture-free (all ground)."""
    if not mapping:
        return t
    memo: Dict[int, Term] = {}

    def go(node: Term) -> Term:
        hit = memo.get(node.tid)
        if hit is not None:
            return hit
        if node.op == "app" and node.sym in mapping and not node.args:
            out = mapping[node.sym]
        elif node.args:
            args = tuple(go(a) for a in node.args)
            out = node if args == node.args else remake(node, args)
        else:
            out = node
        memo[node.tid] = out
        return out

    return go(t)


def replace_terms(t: Term, mapping: Dict[Term, Term]) -> Term:
    """Bottom-up replacement of whole subterms."""
    if not mapping:
        return t
    memo: Dict[int, Term] = {}

    def go(node: Term) -> Term:
        hit = memo.get(node.tid)
        if hit is not None:
            return hit
        out = mapping.get(node)
        if out is None:
            if node.args:
                args = tuple(go(a) for a in node.args)
                out = node if args == node.args else remake(node, args)
            else:
                out = node
            # a rewritten node may itself be a key
            again = mapping.get(out)
            if again is not None:
                out = again
        memo[node.tid] = out
        return out

    return go(t)


def nnf(f: Term) -> Term:
    """Negation normal form.

    Eliminates implies, Bool-sorted ite, and Bool-sorted equality (iff);
    afterwards negation appears only directly on atoms.
    """
    pos_memo: Dict[int, Term] = {}
    neg_memo: Dict[int, Term] = {}

    def pos(t: Term) -> Term:
        got = pos_memo.get(t.tid)
        if got is not None:
            return got
        if t.op == "and":
            out = mk_and(*(pos(a) for a in t.args))
        elif t.op == "or":
            out = mk_or(*(pos(a) for a in t.args))
        elif t.op == "not":
            out = neg(t.args[0])
        elif t.op == "implies":
            out = mk_or(neg(t.args[0]), pos(t.args[1]))
        elif t.op == "ite":
            c, a, b = t.args
            out = mk_or(mk_and(pos(c), pos(a)), mk_and(neg(c), pos(b)))
        elif t.op == "eq" and t.args[0].sort == BOOL:
            a, b = t.args
            out = mk_or(mk_and(pos(a), pos(b)), mk_and(neg(a), neg(b)))
        elif is_atom(t):
            out = t
        else:
            raise UnsupportedError(f"not a formula: {t}")
        pos_memo[t.tid] = out
        return out

    def neg(t: Term) -> Term:
        got = neg_memo.get(t.tid)
        if got is not None:
            return got
        if t.op == "and":
            out = mk_or(*(neg(a) for a in t.args))
        elif t.op == "or":
            out = mk_and(*(neg(a) for a in t.args))
        elif t.op == "not":
            out = pos(t.args[0])
        elif t.op == "implies":
            out = mk_and(pos(t.args[0]), neg(t.args[1]))
        elif t.op == "ite":
            c, a, b = t.args
            out = mk_or(mk_and(pos(c), neg(a)), mk_and(neg(c), neg(b)))
        elif t.op == "eq" and t.args[0].sort == BOOL:
            a, b = t.args
            out = mk_or(mk_and(pos(a), neg(b)), mk_and(neg(a), pos(b)))
        elif t is TRUE:
            out = FALSE
        elif t is FALSE:
            out = TRUE
        elif is_atom(t):
            out = mk_not(t)
        else:
            raise UnsupportedError(f"not a formula: {t}")
        neg_memo[t.tid] = out
        return out

    return pos(f)


def literals_of(f: Term, within: Optional[Set[Symbol]] = None,
                without: Optional[Set[Symbol]] = None) -> List[Literal]:
    """Literals of nnf(f) in first-occurrence order.

    `within` keeps only literals mentioning one of the given symbols;
    `without` keeps only literals mentioning none of them.
    """
    out: List[Literal] = []
    seen: Set[Literal] = set()

    def walk(t: Term) -> None:
        if t.op in ("and", "or"):
            for a in t.args:
                walk(a)
            return
        if t.op == "not":
            lit = Literal(t.args[0], False)
        elif t is TRUE or t is FALSE:
            return
        else:
            lit = Literal(t, True)
        if lit in seen:
            return
        if within is not None and not contains_any(lit.atom, within):
            return
        if without is not None and contains_any(lit.atom, without):
            return
        seen.add(lit)
        out.append(lit)

    walk(nnf(f))
    return out


def _num_str(v: Fraction, sort: Sort) -> str:
    if v.denominator == 1:
        s = str(v.numerator) if sort == INT else f"{v.numerator}.0"
        return s if v >= 0 else f"(- {s.lstrip('-')})"
    body = f"(/ {abs(v.numerator)}.0 {v.denominator}.0)" if sort == REAL \
        else f"(/ {abs(v.numerator)} {v.denominator})"
    return body if v >= 0 else f"(- {body})"


def to_sexpr(t: Term) -> str:
    if t.op == "true":
        return "true"
    if t.op == "false":
        return "false"
    if t.op == "num":
        return _num_str(t.value, t.sort)
    if t.op == "app":
        if not t.args:
            return t.sym.name
        return "(" + " ".join([t.sym.name] + [to_sexpr(a) for a in t.args]) + ")"
    names = {"and": "and", "or": "or", "not": "not", "implies": "=>", "ite": "ite",
             "eq": "=", "le": "<=", "lt": "<", "add": "+", "mul": "*",
             "div": "div", "mod": "mod"}
    return "(" + " ".join([names[t.op]] + [to_sexpr(a) for a in t.args]) + ")"
