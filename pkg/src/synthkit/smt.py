"""Quantifier-free SMT checking for EUF with linear integer/real arithmetic.

Lazy CDCL(T): a propositional core enumerates assignments over the formula's
atoms, each full assignment is replayed into a congruence closure and a
simplex instance, and theory conflicts come back as blocking lemmas.  The two
theories combine model-wise: every numeric term the e-graph knows gets a
simplex value; value-equal terms in different classes trigger an equality
split, and congruence-implied equalities unknown to arithmetic become lemmas.
The loop terminates because every round either blocks the current assignment
with a clause over existing atoms or introduces an interface equality drawn
from a finite pair universe.

Checks are one-shot: build a checker, run it, read the result.  Cores are
subsets of the caller's assumption literals.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .egraph import EGraph
from .linear import linform
from .sat import SatSolver, minimize_core
from .simplex import DeltaRational, Simplex, dr, exact_div, lia_check
from .terms import (BOOL, FALSE, INT, TRUE, COMPUTABLE, Literal, Sort, Symbol,
                    SynthError, Term, UnsupportedError, is_atom, is_numeric,
                    literals_of, mk_and, mk_app, mk_div, mk_eq, mk_implies,
                    mk_le, mk_lt, mk_mul, mk_not, mk_num, mk_sub,
                    replace_terms, subterms)


@dataclass(frozen=True)
class EVal:
    """Element of an uninterpreted sort's finite carrier."""

    sort: str
    idx: int

    def __str__(self) -> str:
        return f"{self.sort}!{self.idx}"


class Model:
    """Total interpretation extracted from a satisfiable check."""

    def __init__(self, atom_truth: Dict[Term, bool],
                 const_val: Dict[Symbol, object],
                 fun_val: Dict[Symbol, Tuple[Dict[tuple, object], object]],
                 carriers: Dict[Sort, int]) -> None:
        self.atom_truth = atom_truth
        self.const_val = const_val
        self.fun_val = fun_val
        self.carriers = carriers
        self._memo: Dict[int, object] = {}

    def sort_default(self, sort: Sort):
        if sort == BOOL:
            return False
        if is_numeric(sort):
            return Fraction(0)
        return EVal(sort.name, 0)

    def eval(self, t: Term):
        got = self._memo.get(t.tid)
        if got is None:
            got = self._eval(t)
            self._memo[t.tid] = got
        return got

    def _eval(self, t: Term):
        op = t.op
        if op == "true":
            return True
        if op == "false":
            return False
        if op == "num":
            return t.value
        if op == "app":
            if not t.args:
                v = self.const_val.get(t.sym)
                return self.sort_default(t.sym.sort) if v is None else v
            table, dflt = self.fun_val.get(t.sym, ({}, self.sort_default(t.sym.sort)))
            key = tuple(self.eval(a) for a in t.args)
            return table.get(key, dflt)
        if op == "and":
            return all(self.eval(a) for a in t.args)
        if op == "or":
            return any(self.eval(a) for a in t.args)
        if op == "not":
            return not self.eval(t.args[0])
        if op == "implies":
            return (not self.eval(t.args[0])) or self.eval(t.args[1])
        if op == "ite":
            return self.eval(t.args[1]) if self.eval(t.args[0]) else self.eval(t.args[2])
        if op == "eq":
            return self.eval(t.args[0]) == self.eval(t.args[1])
        if op == "le":
            return self.eval(t.args[0]) <= self.eval(t.args[1])
        if op == "lt":
            return self.eval(t.args[0]) < self.eval(t.args[1])
        if op == "add":
            return sum(self.eval(a) for a in t.args)
        if op == "mul":
            return self.eval(t.args[0]) * self.eval(t.args[1])
        if op == "div":
            k = self.eval(t.args[1])
            return Fraction(self.eval(t.args[0]).numerator // k.numerator)
        if op == "mod":
            k = self.eval(t.args[1])
            return Fraction(self.eval(t.args[0]).numerator % k.numerator)
        raise SynthError(f"cannot evaluate {t}")

    def eval_lit(self, lit: Literal) -> bool:
        v = self.eval(lit.atom)
        return bool(v) if lit.pos else not v


@dataclass
class Result:
    kind: str                      # "sat" | "unsat" | "unknown"
    model: Optional[Model] = None
    core: List[Literal] = field(default_factory=list)

    @property
    def is_sat(self) -> bool:
        return self.kind == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.kind == "unsat"


_internal_count = itertools.count()


def _fresh_const(sort: Sort) -> Symbol:
    return Symbol(f".k{next(_internal_count)}", (), sort, COMPUTABLE)


def preprocess(f: Term) -> Tuple[Term, List[Term]]:
    """Rewrite mod, lift non-Bool ite, and emit floor-division definitions.

    Returns the rewritten formula plus side constraints that must hold with it.
    """
    side: List[Term] = []
    mods = {s: mk_sub(s.args[0], mk_mul(s.args[1].value, mk_div(s.args[0], int(s.args[1].value))))
            for s in subterms(f) if s.op == "mod"}
    if mods:
        f = replace_terms(f, mods)

    while True:
        ites = [s for s in subterms(f) if s.op == "ite" and s.sort != BOOL]
        if not ites:
            break
        target = next(s for s in ites
                      if not any(x.op == "ite" and x.sort != BOOL and x is not s
                                 for x in subterms(s)))
        k = mk_app(_fresh_const(target.sort))
        c, a, b = target.args
        side.append(mk_and(mk_implies(c, mk_eq(k, a)),
                           mk_implies(mk_not(c), mk_eq(k, b))))
        f = replace_terms(f, {target: k})
        side = [replace_terms(s, {target: k}) for s in side]

    whole = mk_and(f, *side) if side else f
    for s in subterms(whole):
        if s.op == "div":
            t, kterm = s.args
            k = int(kterm.value)
            side.append(mk_le(mk_mul(k, s), t))                      # k*d <= t
            side.append(mk_le(t, mk_sub(mk_mul(k, s), mk_num(1 - k))))  # t <= k*d + k-1
    return f, side


def _atom_theories(a: Term) -> Tuple[bool, bool]:
    """(goes to the e-graph, goes to arithmetic)."""
    if a.op in ("le", "lt"):
        return False, True
    if a.op == "eq":
        return True, is_numeric(a.args[0].sort)
    if a.op == "app":
        return True, False
    return False, False


_ATOM_NF: Dict[int, tuple] = {}   # atom tid -> (coeffs, const, diff term)


class ArithFrame:
    """Simplex plus the embedding of numeric terms into its variables.

    Every numeric term t gets one variable v with t = v + offset; compound
    linear terms become definitional rows over their leaves.  Atoms assert as
    bounds tagged with the originating literal, so simplex conflict cores map
    straight back to literals.
    """

    def __init__(self) -> None:
        self.spx = Simplex()
        self.vid: Dict[Term, int] = {}
        self.offset: Dict[Term, Fraction] = {}
        self.term_of: Dict[int, Term] = {}
        # (atom tid, truth) -> ("trivial", holds) | ("bounds", [(v, lower, value)])
        self.bound_memo: Dict[Tuple[int, bool], tuple] = {}

    def ensure(self, t: Term) -> Tuple[Optional[int], Fraction]:
        """Simplex var and constant offset with t = var + offset."""
        if t.op == "num":
            return None, t.value
        got = self.vid.get(t)
        if got is not None:
            return got, self.offset.get(t, Fraction(0))
        coeffs, const = linform(t)
        if len(coeffs) == 1 and const == 0:
            (leaf, c), = coeffs.items()
            if leaf is t and c == 1:
                v = self.spx.new_var(is_int=(t.sort == INT))
                self.vid[t] = v
                self.term_of[v] = t
                return v, Fraction(0)
        expr: Dict[int, Fraction] = {}
        for leaf, c in coeffs.items():
            lv, loff = self.ensure(leaf)
            if lv is not None:
                expr[lv] = expr.get(lv, Fraction(0)) + c
            const += c * loff
        v = self.spx.new_var(is_int=(t.sort == INT))
        self.spx.add_row(v, expr)
        self.vid[t] = v
        self.offset[t] = const
        self.term_of[v] = t
        return v, const

    def assert_atom(self, atom: Term, truth: bool) -> Optional[List[Literal]]:
        if atom.op == "eq" and not truth:
            return None  # the split clause asserts one strict side instead
        got = self.bound_memo.get((atom.tid, truth))
        if got is None:
            got = self._prep_atom(atom, truth)
            self.bound_memo[(atom.tid, truth)] = got
        if got[0] == "trivial":
            return None if got[1] == truth else [got[2]]
        _, tag, bounds = got
        spx = self.spx
        for v, lower, value in bounds:
            c = spx.assert_bound(v, lower, value, tag)
            if c is not None:
                return c
        return None

    def _prep_atom(self, atom: Term, truth: bool) -> tuple:
        """Normalize once; reasserting an atom then costs only the bound pushes."""
        nf = _ATOM_NF.get(atom.tid)
        if nf is None:
            s, t = atom.args
            diff = mk_sub(s, t)
            nf = (*linform(diff), diff)
            _ATOM_NF[atom.tid] = nf
        coeffs, const, diff = nf
        tag = Literal(atom, truth)
        if not coeffs:
            holds = {"le": const <= 0, "lt": const < 0, "eq": const == 0}[atom.op]
            return ("trivial", holds, tag)
        if len(coeffs) == 1:
            (leaf, c), = coeffs.items()
            v, off = self.ensure(leaf)
            rhs = (-const - c * off) / c
            flip = c < 0
        else:
            v, off = self.ensure(diff)     # diff = var + off, so diff ~ 0 is var ~ -off
            rhs = -off
            flip = False
        # the atom now reads: var ~ rhs (direction flipped when the single
        # coefficient was negative)
        if atom.op == "eq":
            return ("bounds", tag, ((v, True, dr(rhs)), (v, False, dr(rhs))))
        strict_pos = atom.op == "lt"
        if not truth:
            # not(s <= t) is t < s; not(s < t) is t <= s
            strict_pos = not strict_pos
            flip = not flip
        lower = flip
        eps = 0
        if strict_pos:
            eps = 1 if lower else -1
        bound = (v, lower, DeltaRational(Fraction(rhs), Fraction(eps)))
        return ("bounds", tag, (bound,))


class Checker:
    def __init__(self, formula: Term, assumptions: Sequence[Literal] = (),
                 max_rounds: int = 20000) -> None:
        self.max_rounds = max_rounds
        self.sat = SatSolver()
        self.var_of_atom: Dict[Term, int] = {}
        self.atom_of_var: Dict[int, Term] = {}
        self.theory_atoms: List[Term] = []      # lifted atoms, registration order
        self.split_done: Set[Term] = set()
        self.frame = ArithFrame()   # rows persist across rounds, bounds do not

        f2, side = preprocess(formula)
        self._assert_root(f2)
        for s in side:
            self._assert_root(s)
        self._set_assumptions(assumptions)

    def _set_assumptions(self, assumptions: Sequence[Literal]) -> None:
        self.assumptions = list(assumptions)
        self.failed = None
        self.sat_assumptions: List[int] = []
        for lit in self.assumptions:
            v = self._atom_var_for(lit.atom)
            if v is None:
                truth = lit.atom is TRUE
                if truth != lit.pos:
                    self.failed = [lit]
                continue
            self.sat_assumptions.append(v if lit.pos else -v)

    # -------------------------------------------------------------- encoding

    def _assert_root(self, f: Term) -> None:
        self.sat.add_clause([self._encode(f)])

    def _atom_var_for(self, atom: Term) -> Optional[int]:
        if atom is TRUE or atom is FALSE:
            return None
        lifted, side = preprocess(atom)
        for s in side:
            self._assert_root(s)
        if not is_atom(lifted) or (lifted.op == "eq" and lifted.args[0].sort == BOOL):
            v = self._encode(lifted)
            self.var_of_atom.setdefault(atom, v)
            self.atom_of_var.setdefault(v, lifted)
            return v
        return self._register_atom(lifted, atom)

    def _register_atom(self, lifted: Term, original: Optional[Term] = None) -> int:
        v = self.var_of_atom.get(lifted)
        if v is None:
            v = self.sat.new_var()
            self.var_of_atom[lifted] = v
            self.atom_of_var[v] = lifted
            if any(_atom_theories(lifted)):
                self.theory_atoms.append(lifted)
            if lifted.op == "eq" and is_numeric(lifted.args[0].sort):
                self._add_eq_split(lifted, v)
        if original is not None and original is not lifted:
            self.var_of_atom.setdefault(original, v)
        return v

    def _add_eq_split(self, eq: Term, v: int) -> None:
        if eq in self.split_done:
            return
        self.split_done.add(eq)
        s, t = eq.args
        l1 = self._register_atom(mk_lt(s, t))
        l2 = self._register_atom(mk_lt(t, s))
        self.sat.add_clause([v, l1, l2])

    def _encode(self, f: Term) -> int:
        if f is TRUE or f is FALSE:
            v = self.sat.new_var()
            self.sat.add_clause([v if f is TRUE else -v])
            return v
        if is_atom(f) and not (f.op == "eq" and f.args[0].sort == BOOL):
            return self._register_atom(f)
        op = f.op
        if op == "not":
            return -self._encode(f.args[0])
        if op == "implies":
            a, b = (self._encode(x) for x in f.args)
            return self._encode_or([-a, b])
        if op == "and":
            return -self._encode_or([-self._encode(x) for x in f.args])
        if op == "or":
            return self._encode_or([self._encode(x) for x in f.args])
        if op == "ite":
            c, a, b = (self._encode(x) for x in f.args)
            v = self.sat.new_var()
            for cl in ([-v, -c, a], [-v, c, b], [v, -c, -a], [v, c, -b]):
                self.sat.add_clause(cl)
            return v
        if op == "eq" and f.args[0].sort == BOOL:
            a, b = (self._encode(x) for x in f.args)
            v = self.sat.new_var()
            for cl in ([-v, -a, b], [-v, a, -b], [v, a, b], [v, -a, -b]):
                self.sat.add_clause(cl)
            return v
        raise UnsupportedError(f"not a formula: {f}")

    def _encode_or(self, lits: List[int]) -> int:
        v = self.sat.new_var()
        self.sat.add_clause([-v] + lits)
        for l in lits:
            self.sat.add_clause([v, -l])
        return v

    # -------------------------------------------------------------- main loop

    def _lemma(self, lits: Iterable[Literal]) -> None:
        clause = []
        for l in lits:
            v = self.var_of_atom.get(l.atom)
            if v is None:
                v = self._register_atom(l.atom)
            clause.append(v if l.pos else -v)
        self.sat.add_clause(clause)

    def run_with(self, assumptions: Sequence[Literal]) -> Result:
        """Re-solve under new assumptions, keeping learned clauses and rows."""
        self._set_assumptions(assumptions)
        return self.run()

    def run(self) -> Result:
        if self.failed is not None:
            return Result("unsat", core=self.failed)
        if not self.sat.ok:
            return Result("unsat", core=[])
        for _ in range(self.max_rounds):
            got = self.sat.solve(self.sat_assumptions)
            if got is None:
                return Result("unknown")
            if got is False:
                core_lits = set(self.sat.core)
                core = []
                for l in self.assumptions:
                    v = self.var_of_atom.get(l.atom)
                    if v is not None and (v if l.pos else -v) in core_lits and l not in core:
                        core.append(l)
                return Result("unsat", core=core)
            out = self._theory_round(self.sat.model)
            if out is not None:
                return out
        return Result("unknown")

    # -------------------------------------------------------------- theories

    def _theory_round(self, assignment: Dict[int, bool]) -> Optional[Result]:
        eg = EGraph()
        frame = self.frame
        spx = frame.spx
        vid = frame.vid
        mark = spx.push()
        try:
            return self._theory_round_inner(assignment, eg, frame, spx, vid)
        finally:
            spx.pop(mark)

    def _theory_round_inner(self, assignment, eg, frame, spx, vid):
        arith_queue: List[Tuple[Term, bool]] = []
        for atom in self.theory_atoms:
            v = self.var_of_atom[atom]
            truth = assignment.get(v)
            if truth is None:
                continue
            to_euf, to_arith = _atom_theories(atom)
            for arg in atom.args:
                eg.intern(arg)   # combination must see terms under arith atoms
            if to_euf:
                conflict = eg.assert_literal(Literal(atom, truth))
                if conflict is not None:
                    self._lemma([l.negate() for l in conflict])
                    return None
            if to_arith:
                arith_queue.append((atom, truth))

        for t in list(eg.nodes.values()):
            if is_numeric(t.sort):
                frame.ensure(t)

        for atom, truth in arith_queue:
            core = frame.assert_atom(atom, truth)
            if core is not None:
                self._lemma([l.negate() for l in core])
                return None

        core = spx.check()
        if core is not None:
            self._lemma([l.negate() for l in core])
            return None
        if any(spx.is_int):
            status, licore = lia_check(spx)
            if status == "unsat":
                self._lemma([l.negate() for l in licore])
                return None
            if status == "unknown":
                return Result("unknown")

        vals = spx.model()

        def value_of(t: Term) -> Fraction:
            if t.op == "num":
                return t.value
            return vals[vid[t]] + frame.offset.get(t, Fraction(0))

        shared = [t for t in eg.nodes.values() if is_numeric(t.sort)]
        progress = False
        by_val: Dict[Tuple[str, Fraction], List[Term]] = {}
        for t in shared:
            by_val.setdefault((t.sort.name, value_of(t)), []).append(t)
        for group in by_val.values():
            for s, t in itertools.combinations(group, 2):
                if not eg.same(s, t):
                    eq = mk_eq(s, t)
                    if eq is TRUE or eq is FALSE or eq in self.var_of_atom:
                        continue
                    self._register_atom(eq)
                    progress = True
        by_root: Dict[int, List[Term]] = {}
        for t in shared:
            by_root.setdefault(eg.find(t.tid), []).append(t)
        for group in by_root.values():
            for s, t in itertools.combinations(group, 2):
                if value_of(s) != value_of(t):
                    just = eg.justify(s, t)
                    self._lemma([l.negate() for l in just] + [Literal(mk_eq(s, t), True)])
                    progress = True
        if progress:
            return None

        return Result("sat", model=self._build_model(assignment, eg, value_of, vid))

    # -------------------------------------------------------------- model

    def _build_model(self, assignment, eg: EGraph, value_of, vid) -> Model:
        atom_truth = {a: assignment[v] for a, v in self.var_of_atom.items()
                      if v in assignment}

        class_idx: Dict[int, int] = {}
        carriers: Dict[Sort, int] = {}
        for root, mems in eg.classes():
            sort = mems[0].sort
            if sort == BOOL or is_numeric(sort):
                continue
            class_idx[root] = carriers.get(sort, 0)
            carriers[sort] = carriers.get(sort, 0) + 1

        true_root = eg.find(TRUE.tid)
        false_root = eg.find(FALSE.tid)

        def term_value(t: Term):
            if is_numeric(t.sort):
                if t.op == "num" or t in vid:
                    return value_of(t)
                return Fraction(0)
            if t.sort == BOOL:
                if t.tid in eg.nodes:
                    r = eg.find(t.tid)
                    if r == true_root:
                        return True
                    if r == false_root:
                        return False
                return bool(atom_truth.get(t))
            if t.tid in eg.nodes:
                r = eg.find(t.tid)
                if r in class_idx:
                    return EVal(t.sort.name, class_idx[r])
            carriers.setdefault(t.sort, 1)
            return EVal(t.sort.name, 0)

        const_val: Dict[Symbol, object] = {}
        fun_tables: Dict[Symbol, Dict[tuple, object]] = {}
        pool = list(eg.nodes.values()) + list(vid.keys()) + \
            [a for a in self.var_of_atom if a.op == "app"]
        seen: Set[int] = set()
        for top in pool:
            for s in subterms(top):
                if s.tid in seen or s.op != "app":
                    continue
                seen.add(s.tid)
                if not s.args:
                    const_val.setdefault(s.sym, term_value(s))
                else:
                    key = tuple(term_value(a) for a in s.args)
                    fun_tables.setdefault(s.sym, {})[key] = term_value(s)

        fun_val = {sym: (table, next(iter(table.values())))
                   for sym, table in fun_tables.items()}
        for sort in list(carriers):
            carriers[sort] = max(carriers[sort], 1)
        return Model(atom_truth, const_val, fun_val, carriers)


class Session:
    """One formula, many assumption sets; learned clauses carry over."""

    def __init__(self, formula: Term) -> None:
        self.ck = Checker(formula)

    def check(self, assumptions: Sequence[Literal] = (),
              minimize: bool = False) -> Result:
        res = self.ck.run_with(assumptions)
        if minimize and res.is_unsat and len(res.core) > 1:
            core = minimize_core(res.core, self._probe)
            return Result("unsat", core=core)
        return res

    def _probe(self, sub):
        res = self.ck.run_with(list(sub))
        return res.core if res.is_unsat else False


def check(formula: Term, assumptions: Sequence[Literal] = (),
          minimize: bool = False) -> Result:
    ck = Checker(formula, assumptions)
    res = ck.run()
    if minimize and res.is_unsat and len(res.core) > 1:
        core = minimize_core(res.core, _core_probe(ck))
        return Result("unsat", core=core)
    return res


def _core_probe(ck: Checker):
    def probe(sub):
        res = ck.run_with(list(sub))
        return res.core if res.is_unsat else False
    return probe


def implicant(formula: Term, model: Model, minimize: bool = True) -> List[Literal]:
    """A literal cube over formula's atoms, true in the model, implying it."""
    atoms: List[Term] = []
    seen: Set[Term] = set()
    for lit in literals_of(formula):
        if lit.atom not in seen:
            seen.add(lit.atom)
            atoms.append(lit.atom)
    lits = [Literal(a, bool(model.eval(a))) for a in atoms]
    ck = Checker(mk_not(formula), lits)
    res = ck.run()
    if not res.is_unsat:
        raise SynthError("model does not satisfy the formula")
    core = res.core
    if minimize:
        core = minimize_core(core, _core_probe(ck))
    return core
