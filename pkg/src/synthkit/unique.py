"""Reading forced values for an output straight out of an asserted state.

When the current region already pins an output to a computable term, the
realizer search can skip projection: a congruence class names the term
directly, bounds pin a numeric value, or a tableau row solves the output in
terms of other variables.  `solve_unique` runs a goal-directed backward
search with five reduction rules (fixed value, class representative, row
elimination, congruence, summation) and reports the asserted literals each
step leaned on, so the caller gets both the term and its justification.

Rows are definitional (they encode term structure), so only bound tags and
congruence explanations contribute to justifications.  Row elimination works
on a clone with the used row dropped, which bounds the search depth by the
row count; congruence recursion is cycle-guarded per goal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from .egraph import EGraph
from .linear import linform
from .simplex import Simplex
from .smt import ArithFrame, _atom_theories
from .terms import (COMPUTABLE, Literal, Sort, Symbol, Term, is_numeric,
                    mk_add, mk_and, mk_app, mk_mul, mk_not, mk_num, remake,
                    to_sexpr)


def _computable(t: Term) -> bool:
    if t.op == "app" and t.sym.kind != COMPUTABLE:
        return False
    return all(_computable(a) for a in t.args)


def _allowed(sym: Symbol) -> bool:
    return sym.kind == COMPUTABLE


@dataclass
class Step:
    """One applied reduction rule, with the literals it used."""
    rule: str
    goal: Term
    result: Term
    used: List[Literal] = field(default_factory=list)
    premises: List["Step"] = field(default_factory=list)

    def render(self, indent: int = 0) -> str:
        pad = "  " * indent
        used = " ".join(to_sexpr(l.term()) for l in self.used)
        line = f"{pad}({self.rule} {to_sexpr(self.goal)} ~> {to_sexpr(self.result)}"
        if used:
            line += f" :by {used}"
        if not self.premises:
            return line + ")"
        subs = "\n".join(p.render(indent + 1) for p in self.premises)
        return f"{line}\n{subs}\n{pad})"


@dataclass
class Solved:
    term: Term
    justification: List[Literal]
    derivation: Step


class Snapshot:
    """EUF plus arithmetic state asserted from one literal set."""

    def __init__(self, lits: Sequence[Literal]) -> None:
        seen: Set[Tuple[int, bool]] = set()
        self.lits: List[Literal] = []
        for l in lits:
            k = (l.atom.tid, l.pos)
            if k not in seen:
                seen.add(k)
                self.lits.append(l)
        self.eg = EGraph()
        self.frame = ArithFrame()
        self.ok = True
        queue: List[Tuple[Term, bool]] = []
        for l in self.lits:
            to_euf, to_arith = _atom_theories(l.atom)
            for arg in l.atom.args:
                self.eg.intern(arg)
            if to_euf:
                if self.eg.assert_literal(l) is not None:
                    self.ok = False
                    return
            if to_arith:
                queue.append((l.atom, l.pos))
        for t in list(self.eg.nodes.values()):
            if is_numeric(t.sort):
                self.frame.ensure(t)
        for atom, truth in queue:
            if self.frame.assert_atom(atom, truth) is not None:
                self.ok = False
                return
        if self.frame.spx.check() is not None:
            self.ok = False


def _linear_term(parts: List[Tuple[Fraction, Term]], const: Fraction,
                 sort: Sort) -> Term:
    """Build sum(c*t) + const, folding when everything is a numeral."""
    total = const
    symbolic: List[Term] = []
    for c, t in parts:
        if t.op == "num":
            total += c * t.value
        else:
            symbolic.append(mk_mul(c, t))
    if not symbolic:
        return mk_num(total, sort)
    if total != 0:
        symbolic.append(mk_num(total, sort))
    return symbolic[0] if len(symbolic) == 1 else mk_add(*symbolic)


class _Search:
    def __init__(self, snap: Snapshot) -> None:
        self.snap = snap
        self.rep_table = snap.eg.rep_table(_allowed)
        self.memo: Dict[Tuple[int, int], Optional[Tuple[Term, List[Literal], Step]]] = {}
        self.versions: int = 0

    def solve(self, t: Term, spx: Simplex, version: int,
              seen: frozenset) -> Optional[Tuple[Term, List[Literal], Step]]:
        key = (t.tid, version)
        if key in self.memo:
            return self.memo[key]
        if (t.tid, version) in seen:
            return None
        seen = seen | {(t.tid, version)}
        out = self._apply_rules(t, spx, version, seen)
        self.memo[key] = out
        return out

    def _apply_rules(self, t, spx, version, seen):
        if _computable(t):
            return t, [], Step("ground", t, t)
        got = self._fixed(t, spx)
        if got is not None:
            return got
        got = self._rep(t)
        if got is not None:
            return got
        got = self._gauss(t, spx, version, seen)
        if got is not None:
            return got
        got = self._congruence(t, spx, version, seen)
        if got is not None:
            return got
        return self._summation(t, spx, version, seen)

    def _fixed(self, t, spx):
        if not is_numeric(t.sort):
            return None
        v = self.snap.frame.vid.get(t)
        if v is None:
            return None
        got = spx.is_fixed(v)
        if got is None:
            return None
        value, tags = got
        res = mk_num(value + self.snap.frame.offset.get(t, Fraction(0)))
        used = [l for l in tags if isinstance(l, Literal)]
        return res, used, Step("fixed", t, res, used)

    def _rep(self, t):
        if t.tid not in self.snap.eg.nodes:
            return None
        got = self.snap.eg.rep_of(t, _allowed, self.rep_table)
        if got is None:
            return None
        rep, just = got
        if not _computable(rep):
            return None
        return rep, just, Step("rep", t, rep, just)

    def _gauss(self, t, spx, version, seen):
        if not is_numeric(t.sort):
            return None
        v = self.snap.frame.vid.get(t)
        if v is None:
            return None
        if v in spx.rows:
            pivots = [None]
        else:
            pivots = sorted(b for b in spx.cols.get(v, ()) if v in spx.rows.get(b, {}))
            if not pivots:
                return None
        for b in pivots:
            sub = spx.clone()
            if b is not None:
                sub._pivot(b, v, sub.val[b])
            row = dict(sub.rows[v])
            sub.drop_row(v)
            self.versions += 1
            got = self._gauss_row(t, row, sub, self.versions, seen)
            if got is not None:
                return got
        return None

    def _gauss_row(self, t, row, sub, ver, seen):
        parts: List[Tuple[Fraction, Term]] = []
        const = self.snap.frame.offset.get(t, Fraction(0))
        used: List[Literal] = []
        steps: List[Step] = []
        for xv, c in row.items():
            leaf = self.snap.frame.term_of.get(xv)
            if leaf is None:
                return None
            got = self.solve(leaf, sub, ver, seen)
            if got is None:
                return None
            s, j, st = got
            # leaf = var + offset, so var contributes (solved leaf - offset)
            parts.append((c, s))
            const -= c * self.snap.frame.offset.get(leaf, Fraction(0))
            used.extend(j)
            steps.append(st)
        res = _linear_term(parts, const, t.sort)
        return res, used, Step("gauss", t, res, used, steps)

    def _congruence(self, t, spx, version, seen):
        if t.tid not in self.snap.eg.nodes:
            return None
        for m in self.snap.eg.class_terms(t):
            if m.op != "app" or not m.args or not _allowed(m.sym):
                continue
            parts: List[Term] = []
            used = self.snap.eg.justify(t, m)
            steps: List[Step] = []
            ok = True
            for a in m.args:
                got = self.solve(a, spx, version, seen)
                if got is None:
                    ok = False
                    break
                s, j, st = got
                parts.append(s)
                used = used + j
                steps.append(st)
            if ok:
                res = mk_app(m.sym, *parts)
                return res, used, Step("congruence", t, res, used, steps)
        return None

    def _summation(self, t, spx, version, seen):
        if not is_numeric(t.sort) or t.op in ("app", "num"):
            return None
        coeffs, const = linform(t)
        parts: List[Tuple[Fraction, Term]] = []
        used: List[Literal] = []
        steps: List[Step] = []
        for leaf, c in coeffs.items():
            if leaf is t:
                return None
            got = self.solve(leaf, spx, version, seen)
            if got is None:
                return None
            s, j, st = got
            parts.append((c, s))
            used.extend(j)
            steps.append(st)
        res = _linear_term(parts, const, t.sort)
        return res, used, Step("sum", t, res, used, steps)


def _dedup_lits(lits: Sequence[Literal]) -> List[Literal]:
    out: List[Literal] = []
    seen: Set[Tuple[int, bool]] = set()
    for l in lits:
        k = (l.atom.tid, l.pos)
        if k not in seen:
            seen.add(k)
            out.append(l)
    return out


def _justification_clean(just: Sequence[Literal], ysym: Symbol) -> bool:
    """Only computable symbols and the solved output may appear."""
    def ok(t: Term) -> bool:
        if t.op == "app" and t.sym.kind != COMPUTABLE and t.sym != ysym:
            return False
        return all(ok(a) for a in t.args)
    return all(ok(l.atom) for l in just)


def solve_unique(ysym: Symbol, lits: Sequence[Literal],
                 on_trace: Optional[Callable[[Step], None]] = None
                 ) -> Optional[Solved]:
    """Computable term forced equal to the output, with its justification.

    None means the asserted state does not derive a value; for purely
    congruence-driven goals that can be incomplete (semantic uniqueness
    without a witness in the class structure stays undetected).
    """
    snap = Snapshot(lits)
    if not snap.ok:
        return None
    goal = mk_app(ysym)
    search = _Search(snap)
    got = search.solve(goal, snap.frame.spx, 0, frozenset())
    if got is None:
        return None
    term, just, step = got
    just = _dedup_lits(just)
    term = _fold(term)
    if not _computable(term) or not _justification_clean(just, ysym):
        return None
    if on_trace is not None:
        on_trace(step)
    return Solved(term, just, step)


def _fold(t: Term) -> Term:
    """Collapse constant arithmetic the solved form accumulated."""
    if not is_numeric(t.sort) or t.op in ("app", "num"):
        return t
    coeffs, const = linform(t)
    return _linear_term([(c, leaf) for leaf, c in coeffs.items()], const, t.sort)


def _subst_term(t: Term, ysym: Symbol, r: Term) -> Term:
    if t.op == "app" and t.sym == ysym and not t.args:
        return r
    if not t.args:
        return t
    return remake(t, tuple(_subst_term(a, ysym, r) for a in t.args))


def euf_condition(ysym: Symbol, lits: Sequence[Literal]
                  ) -> Optional[Tuple[Term, Term]]:
    """Realizer read off the congruence class, with the asserted region
    (output replaced by the realizer) as its condition."""
    snap = Snapshot(lits)
    if not snap.ok:
        return None
    goal = mk_app(ysym)
    if goal.tid not in snap.eg.nodes:
        return None
    got = snap.eg.rep_of(goal, _allowed, None)
    if got is None:
        return None
    rep, just = got
    if not _computable(rep) or not _justification_clean(just, ysym):
        return None
    parts = []
    for l in snap.lits:
        atom = _subst_term(l.atom, ysym, rep)
        parts.append(atom if l.pos else mk_not(atom))
    return mk_and(*parts), rep
