"""Model-based projection for EUF with linear arithmetic.

`mbp` eliminates a set of symbols (constants and function symbols) from a
literal cube that a model satisfies, returning a cube over the remaining
signature that still implies the existential.  Function applications headed
by an eliminated symbol are grouped by their argument values in the model
(one group per virtual point), replaced by placeholder constants, and guarded
by disequalities between groups; the placeholders and eliminated constants
are then substituted away class representative first, falling back to
model-tight bound offsets and finally to the model value itself for numeric
sorts.  Constants of uninterpreted sorts with no representative get their
literals dropped, which is the one place the result is only valid over
carriers large enough to realize the disequalities.

`mbpr` additionally extracts a realizer for a single output constant: a term
over the remaining signature that can be plugged in for the output.  The EUF
search enumerates class representatives and one-step applications over them;
the arithmetic search solves equalities, shifts bounds, and can always fall
back to the model value, so numeric and Boolean outputs always have some
realizer.  `ANY` signals that the output is unconstrained.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .egraph import EGraph
from .linear import linform
from . import smt
from .terms import (BOOL, COMPUTABLE, FALSE, INT, OUTPUT, TRUE, UNCOMPUTABLE,
                    Literal, Sort, Symbol, SynthError, Term, UnsupportedError,
                    contains_any, is_numeric, lit_key, mk_add, mk_and, mk_app,
                    mk_bool, mk_div, mk_eq, mk_mul, mk_num, mk_sub, remake,
                    replace_terms, substitute, subterms, symbols_of, term_size,
                    to_sexpr)


class _Any:
    """Realizer standing for an arbitrary value of the right sort."""

    def __repr__(self) -> str:
        return "_"


ANY = _Any()

_placeholder_count = itertools.count()


def _fresh_placeholder(sort: Sort) -> Symbol:
    return Symbol(f".p{next(_placeholder_count)}", (), sort, COMPUTABLE)


def _build_egraph(lits: Sequence[Literal]) -> EGraph:
    eg = EGraph()
    for lit in lits:
        a = lit.atom
        if a.op == "eq" or (a.op == "app" and a.sort == BOOL):
            conflict = eg.assert_literal(lit)
            if conflict is not None:
                raise SynthError("projection input is contradictory")
        for arg in a.args:
            eg.intern(arg)
    return eg


def _subst_lit(lit: Literal, mapping: Dict[Symbol, Term]) -> Optional[Literal]:
    atom = substitute(lit.atom, mapping)
    if atom is TRUE or atom is FALSE:
        if (atom is TRUE) != lit.pos:
            raise SynthError("substitution falsified a literal")
        return None
    return Literal(atom, lit.pos)


def _rewrite_lit(lit: Literal, mapping: Dict[Term, Term]) -> Optional[Literal]:
    atom = replace_terms(lit.atom, mapping)
    if atom is TRUE or atom is FALSE:
        if (atom is TRUE) != lit.pos:
            raise SynthError("rewrite falsified a literal")
        return None
    return Literal(atom, lit.pos)


def _dedup(lits: Iterable[Literal]) -> List[Literal]:
    seen = set()
    out = []
    for l in lits:
        k = lit_key(l)
        if k not in seen:
            seen.add(k)
            out.append(l)
    return out


def _bound_candidates(sym: Symbol, lits: Sequence[Literal], model: smt.Model
                      ) -> List[Term]:
    """Substitution terms for an arithmetic constant: shifted tightest bounds."""
    c_term = mk_app(sym)
    yval = model.eval(c_term)
    lowers: List[Tuple[Fraction, Term]] = []
    uppers: List[Tuple[Fraction, Term]] = []
    for lit in lits:
        a = lit.atom
        if a.op not in ("le", "lt") or not contains_any(a, {sym}):
            continue
        try:
            coeffs, const = linform(mk_sub(a.args[0], a.args[1]))
        except UnsupportedError:
            continue
        c = coeffs.get(c_term)
        if c is None or abs(c) != 1 or any(
                contains_any(leaf, {sym}) for leaf in coeffs if leaf is not c_term):
            continue
        rest = [mk_mul(-k / c, leaf) for leaf, k in coeffs.items() if leaf is not c_term]
        if const != 0:
            rest.append(mk_num(-const / c, c_term.sort))
        bound = mk_add(*rest) if rest else mk_num(0, c_term.sort)
        # c*y + rest' <= 0 reads y <= bound when c > 0, y >= bound otherwise;
        # a negated literal flips the side (strictness only shifts the offset)
        is_upper = (c > 0) == lit.pos
        (uppers if is_upper else lowers).append((model.eval(bound), bound))
    out = []
    if lowers:
        lval, lterm = max(lowers, key=lambda p: (p[0], -term_size(p[1])))
        k = yval - lval
        out.append(mk_add(lterm, mk_num(k, c_term.sort)) if k != 0 else lterm)
    if uppers:
        uval, uterm = min(uppers, key=lambda p: (p[0], term_size(p[1])))
        k = uval - yval
        out.append(mk_sub(uterm, mk_num(k, c_term.sort)) if k != 0 else uterm)
    return out


def mbp(model: smt.Model, xs: Set[Symbol], lits: Sequence[Literal]
        ) -> List[Literal]:
    """Project the symbols xs out of a cube the model satisfies."""
    work = _dedup(lits)
    if not any(contains_any(l.atom, xs) for l in work):
        return work
    eg = _build_egraph(work)
    allowed = lambda sym: sym not in xs

    # one placeholder constant per (function, argument values) point
    apps = sorted({s for l in work for s in subterms(l.atom)
                   if s.op == "app" and s.sym in xs and s.args},
                  key=lambda t: (term_size(t), to_sexpr(t)))
    rewrite: Dict[Term, Term] = {}
    groups: Dict[tuple, Tuple[Term, List[Term]]] = {}
    table = eg.rep_table(allowed)
    for app in apps:
        key = (app.sym, tuple(str(model.eval(a)) for a in app.args))
        if key in groups:
            groups[key][1].append(app)
            rewrite[replace_terms(app, rewrite)] = mk_app(groups[key][0].sym)
            continue
        z = mk_app(_fresh_placeholder(app.sort))
        groups[key] = (z, [app])
        rewrite[replace_terms(app, rewrite)] = z

    guards: List[Tuple[Term, Term]] = []
    by_sym: Dict[Symbol, List[tuple]] = {}
    for key in groups:
        by_sym.setdefault(key[0], []).append(key)
    for sym, keys in by_sym.items():
        for k1, k2 in itertools.combinations(keys, 2):
            args1 = groups[k1][1][0].args
            args2 = groups[k2][1][0].args
            pos = next(i for i in range(len(args1))
                       if model.eval(args1[i]) != model.eval(args2[i]))
            guards.append((replace_terms(args1[pos], rewrite),
                           replace_terms(args2[pos], rewrite)))

    def purge(t: Term) -> Term:
        """Rewrite xs-containing subterms to class representatives when possible."""
        if not contains_any(t, xs):
            return t
        if t.tid in eg.nodes:
            got = eg.rep_of(t, allowed, table)
            if got is not None:
                return got[0]
        if t.args:
            return remake(t, tuple(purge(a) for a in t.args))
        return t

    out: List[Literal] = []
    for l in work:
        r = _rewrite_lit(l, rewrite)
        if r is None:
            continue
        atom = purge(r.atom)
        if atom is TRUE or atom is FALSE:
            if (atom is TRUE) != r.pos:
                raise SynthError("rewrite falsified a literal")
            continue
        out.append(Literal(atom, r.pos))
    for a1, a2 in guards:
        atom = mk_eq(purge(a1), purge(a2))
        if atom is TRUE:
            raise SynthError("projection guard collapsed")
        if atom is FALSE:
            continue
        out.append(Literal(atom, False))

    # eliminate placeholder constants and xs constants one at a time
    todo: List[Tuple[Symbol, Optional[Term]]] = []
    for key, (z, members) in groups.items():
        todo.append((z.sym, members[0]))
    for sym in sorted({s for l in out for s in symbols_of(l.atom) if s in xs},
                      key=lambda s: s.name):
        if not sym.arg_sorts:
            todo.append((sym, mk_app(sym)))
    value_of: Dict[Symbol, object] = {sym: model.eval(member)
                                      for sym, member in todo}
    for sym in value_of:
        model.const_val.setdefault(sym, value_of[sym])

    dropped: Set[Symbol] = set()
    placeholder_syms = {z.sym for z, _ in groups.values()}

    def class_rep(member: Optional[Term]) -> Optional[Term]:
        if member is None or member.tid not in eg.nodes:
            return None
        got = eg.rep_of(member, allowed, table)
        return got[0] if got is not None else None

    for sym, member in todo:
        target = mk_app(sym)
        cands: List[Term] = []
        rep = class_rep(member)
        if rep is not None:
            cands.append(rep)
        if is_numeric(sym.sort):
            cands.extend(_bound_candidates(sym, out, model))
            cands.append(mk_num(value_of[sym], sym.sort))
        elif sym.sort == BOOL:
            cands.append(mk_bool(bool(value_of[sym])))
        replacement = None
        banned = xs | placeholder_syms | dropped
        for cand in cands:
            if not contains_any(cand, banned) and model.eval(cand) == value_of[sym]:
                replacement = cand
                break
        if replacement is None:
            dropped.add(sym)
            continue
        nxt = []
        for l in out:
            r = _subst_lit(l, {sym: replacement})
            if r is not None:
                nxt.append(r)
        out = nxt

    final = []
    remaining = xs | dropped
    for l in out:
        if contains_any(l.atom, remaining):
            if any(s.args and s.sym in xs for s in subterms(l.atom)):
                raise UnsupportedError(
                    f"cannot express projection guard: {to_sexpr(l.atom)}")
            continue
        final.append(l)
    final = _dedup(final)
    for l in final:
        if not model.eval_lit(l):
            raise SynthError(f"projection output not satisfied: {l}")
    return final


# ---------------------------------------------------------------- realizers


def _is_computable_term(t: Term) -> bool:
    return all(s.kind == COMPUTABLE for s in symbols_of(t))


def _candidate_order(ts: Iterable[Term]) -> List[Term]:
    seen = set()
    out = []
    for t in sorted(ts, key=lambda t: (term_size(t), to_sexpr(t))):
        if t.tid not in seen:
            seen.add(t.tid)
            out.append(t)
    return out


def _check_candidate(lits: Sequence[Literal], y: Term, r: Term) -> bool:
    goal = [l.term() for l in lits] + [mk_eq(y, r)]
    return smt.check(mk_and(*goal)).is_sat


def _substituted(lits: Sequence[Literal], ysym: Symbol, r: Term) -> List[Literal]:
    out = []
    for l in lits:
        s = _subst_lit(l, {ysym: r})
        if s is not None:
            out.append(s)
    return _dedup(out)


def _mbpr_euf(model: smt.Model, ysym: Symbol, lits: Sequence[Literal],
              extra_funs: Sequence[Symbol] = ()) -> Tuple[List[Literal], object]:
    y = mk_app(ysym)
    eg = _build_egraph(lits)
    allowed = lambda sym: sym != ysym and sym.kind != UNCOMPUTABLE
    table = eg.rep_table(allowed)

    reps = [rep for rep, _ in table.values()]
    cands = [r for r in reps if r.sort == ysym.sort]
    funs = sorted({s.sym for l in lits for s in subterms(l.atom)
                   if s.op == "app" and s.args and allowed(s.sym)} |
                  {f for f in extra_funs if f.arg_sorts and allowed(f)},
                  key=lambda s: s.name)
    by_sort: Dict[Sort, List[Term]] = {}
    for r in reps:
        by_sort.setdefault(r.sort, []).append(r)
    for f in funs:
        if f.sort != ysym.sort:
            continue
        pools = [by_sort.get(s, []) for s in f.arg_sorts]
        combos = 1
        for p in pools:
            combos *= len(p)
        if combos == 0 or combos > 256:
            continue
        for args in itertools.product(*pools):
            cands.append(mk_app(f, *args))
    if ysym.sort == BOOL:
        cands.extend([TRUE, FALSE])

    for r in _candidate_order(cands):
        if contains_any(r, {ysym}) or not _is_computable_term(r):
            continue
        if _check_candidate(lits, y, r):
            return _substituted(lits, ysym, r), r
    return mbp(model, {ysym}, lits), None


def _ackermann_closure(model: smt.Model, ysym: Symbol, lits: Sequence[Literal]
                       ) -> List[Literal]:
    """Add argument guards for applications whose arguments mention the output."""
    out = list(lits)
    apps = sorted({s for l in lits for s in subterms(l.atom)
                   if s.op == "app" and s.args},
                  key=lambda t: (term_size(t), to_sexpr(t)))
    by_sym: Dict[Symbol, List[Term]] = {}
    for a in apps:
        by_sym.setdefault(a.sym, []).append(a)
    for sym, group in by_sym.items():
        for a1, a2 in itertools.combinations(group, 2):
            if not (contains_any(a1, {ysym}) or contains_any(a2, {ysym})):
                continue
            vals1 = [model.eval(t) for t in a1.args]
            vals2 = [model.eval(t) for t in a2.args]
            if vals1 == vals2:
                lit = Literal(mk_eq(a1, a2), True)
            else:
                pos = next(i for i in range(len(vals1)) if vals1[i] != vals2[i])
                lit = Literal(mk_eq(a1.args[pos], a2.args[pos]), False)
            if lit.atom is not TRUE and lit.atom is not FALSE:
                out.append(lit)
    return _dedup(out)


def _mbpr_arith(model: smt.Model, ysym: Symbol, lits: Sequence[Literal]
                ) -> Tuple[List[Literal], object]:
    y = mk_app(ysym)
    yval = model.eval(y)
    work = _ackermann_closure(model, ysym, lits)

    solved: List[Term] = []
    for lit in work:
        a = lit.atom
        if not lit.pos or a.op != "eq" or not is_numeric(a.args[0].sort):
            continue
        try:
            coeffs, const = linform(mk_sub(a.args[0], a.args[1]))
        except UnsupportedError:
            continue
        c = coeffs.get(y)
        if c is None:
            continue
        if y.sort == INT and abs(c) != 1:
            # c*y = rest requires rounding: candidate rest div |c|
            scale = Fraction(1) if c < 0 else Fraction(-1)
            num = [mk_mul(scale * k, leaf) for leaf, k in coeffs.items()
                   if leaf is not y]
            if const != 0:
                num.append(mk_num(scale * const))
            t = mk_add(*num) if num else mk_num(0)
            if not contains_any(t, {ysym}):
                solved.append(mk_div(t, int(abs(c))))
            continue
        rest = [mk_mul(-k / c, leaf) for leaf, k in coeffs.items() if leaf is not y]
        if const != 0:
            rest.append(mk_num(-const / c, y.sort))
        t = mk_add(*rest) if rest else mk_num(0, y.sort)
        if not contains_any(t, {ysym}):
            solved.append(t)

    eg = _build_egraph(work)
    allowed = lambda sym: sym != ysym and sym.kind != UNCOMPUTABLE
    reps = [rep for rep, _ in eg.rep_table(allowed).values()
            if rep.sort == ysym.sort]
    tiers = [solved, _bound_candidates(ysym, work, model), reps]

    ordered: List[Term] = []
    trailing: List[Term] = []
    seen: Set[int] = set()
    for tier in tiers:
        for r in _candidate_order(tier):
            if r.tid in seen or contains_any(r, {ysym}) or not _is_computable_term(r):
                continue
            seen.add(r.tid)
            # symbol-free candidates always pass the check but give point
            # conditions, so they go last
            (ordered if symbols_of(r) else trailing).append(r)
    fallback = mk_num(yval, ysym.sort)
    if fallback.tid not in seen:
        trailing.append(fallback)
    for r in ordered + trailing:
        if _check_candidate(work, y, r):
            return _substituted(work, ysym, r), r
    return mbp(model, {ysym}, lits), None


def mbpr(model: smt.Model, ysym: Symbol, lits: Sequence[Literal],
         extra_funs: Sequence[Symbol] = ()) -> Tuple[List[Literal], object]:
    """Projection with realizer for one output constant.

    Returns (condition literals, realizer) where the realizer is a Term, ANY
    when the output is unconstrained, or None when no computable realizer
    exists (the condition is then a plain projection).
    """
    if ysym.arg_sorts:
        raise UnsupportedError("only constant outputs are supported")
    work = _dedup(lits)
    if not any(contains_any(l.atom, {ysym}) for l in work):
        return work, ANY
    if is_numeric(ysym.sort):
        return _mbpr_arith(model, ysym, work)
    return _mbpr_euf(model, ysym, work, extra_funs)
