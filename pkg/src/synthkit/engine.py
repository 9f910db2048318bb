"""Outer synthesis loop: accumulate guarded realizers until covered.

Each round asks the region enumerator for a satisfiable, hidden-symbol-free
implicant of the remaining specification, reads a realizer for every output
off that region (forced-value shortcut first, then projection with witness
extraction), and appends the guarded case.  Regions admitting no computable
realizer strengthen the working specification instead; their guards
accumulate separately so the caller can see which inputs were abandoned.

Without hidden symbols the region enumerator is bypassed: a plain
satisfiability check supplies models of the uncovered part, and the case
guard is the specification with the realizers substituted in, which keeps
case counts low on scaled benchmarks.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import mbp, smt, unique
from .mbp import ANY
from .terms import (BOOL, FALSE, INT, REAL, TRUE, COMPUTABLE, Literal, Sort,
                    Symbol, SynthError, Term, contains_any, is_numeric,
                    mk_and, mk_app, mk_eq, mk_not, mk_num, mk_or, remake,
                    subterms, term_size, to_sexpr)
from .uproject import ForallProjector

EventHook = Optional[Callable[[str, dict], None]]


@dataclass
class SynthesisProblem:
    spec: Term
    outputs: List[Symbol]
    hidden: List[Symbol] = field(default_factory=list)
    name: str = ""
    vocabulary: List[Symbol] = field(default_factory=list)
    logic: str = ""                  # EUF | LIA | LRA | EUFLIA | EUFLRA
    mode: str = "partial"            # requested check-synth mode

    def constant_pool(self) -> List[Symbol]:
        """Computable constants usable as fallback values, smallest first."""
        pool = {s for s in self.vocabulary
                if s.kind == COMPUTABLE and not s.arg_sorts}
        for t in subterms(self.spec):
            if t.op == "app" and not t.args and t.sym.kind == COMPUTABLE:
                pool.add(t.sym)
        return sorted(pool, key=lambda s: s.name)


@dataclass
class EngineConfig:
    mode: str = "partial"            # "partial" or "total"
    max_iters: int = 10000
    timeout: Optional[float] = None  # seconds
    debug_invariants: bool = False
    fold: bool = True
    on_event: EventHook = None


@dataclass
class Case:
    guard: Term
    values: Dict[Symbol, object]     # Term, or ANY when unconstrained

    def computable(self) -> bool:
        return all(isinstance(v, Term) for v in self.values.values())


@dataclass
class Solution:
    status: str                      # total | partial_maximal | partial_nonmaximal | exhausted
    condition: Term
    cases: List[Case]
    c_bot: Term = FALSE
    iterations: int = 0
    elapsed: float = 0.0
    outputs: List[Symbol] = field(default_factory=list)

    def record(self) -> dict:
        return {
            "status": self.status,
            "condition": to_sexpr(self.condition),
            "cases": [
                {
                    "guard": to_sexpr(c.guard),
                    "values": {s.name: ("_" if v is ANY else to_sexpr(v))
                               for s, v in c.values.items()},
                }
                for c in self.cases
            ],
            "c_bot": to_sexpr(self.c_bot),
            "iterations": self.iterations,
            "elapsed": round(self.elapsed, 6),
        }


@dataclass
class Verdict:
    ok: bool
    counter: Optional[smt.Model] = None
    detail: str = ""


def _subst(t: Term, mapping: Dict[Symbol, Term]) -> Term:
    if t.op == "app" and not t.args and t.sym in mapping:
        return mapping[t.sym]
    if not t.args:
        return t
    return remake(t, tuple(_subst(a, mapping) for a in t.args))


def _sort_default(sort: Sort, pool: Sequence[Symbol]):
    if is_numeric(sort):
        return mk_num(0, sort)
    if sort == BOOL:
        return FALSE
    for s in pool:
        if s.sort == sort:
            return mk_app(s)
    return None


class Engine:
    def __init__(self, problem: SynthesisProblem, cfg: EngineConfig) -> None:
        self.p = problem
        self.cfg = cfg
        self.guards: List[Term] = []      # accumulated case guards (C parts)
        self.bot_guards: List[Term] = []  # projections abandoned for lack of a realizer
        self.cases: List[Case] = []
        self.extra_blocks: List[Term] = []  # spec strengthenings from bot regions
        self.had_bot = False
        self.deadline = None if cfg.timeout is None else time.monotonic() + cfg.timeout
        self.projector: Optional[ForallProjector] = None
        if problem.hidden:
            self.projector = ForallProjector(
                problem.spec, set(problem.hidden),
                on_event=self._projector_event if cfg.on_event else None)

    # ------------------------------------------------------------------ events

    def _emit(self, kind: str, **data) -> None:
        if self.cfg.on_event is not None:
            self.cfg.on_event(kind, data)

    def _projector_event(self, kind: str, lits: List[Literal]) -> None:
        self._emit("uproject." + kind,
                   lits=[("" if l.pos else "!") + to_sexpr(l.atom) for l in lits])

    # ------------------------------------------------------------------ loop

    def run(self) -> Solution:
        start = time.monotonic()
        status = None
        for it in range(self.cfg.max_iters):
            if self.deadline is not None and time.monotonic() > self.deadline:
                status = "exhausted"
                break
            got = self._next_region()
            if got == "done":
                status = "covered"
                break
            if got == "unknown":
                status = "exhausted"
                break
            region_lits, model = got
            self._emit("region", lits=[to_sexpr(l.term()) for l in region_lits])
            self._handle_region(region_lits, model)
            if self.cfg.debug_invariants:
                self._check_invariant()
        else:
            status = "exhausted"
        if status is None:
            status = "exhausted"

        condition = mk_or(*self.guards)
        c_bot = mk_or(*self.bot_guards)
        if status == "covered":
            if self.had_bot:
                status = "partial_nonmaximal"
            elif smt.check(mk_not(condition)).is_unsat:
                status = "total"
            else:
                status = "partial_maximal"
        sol = Solution(status, condition, self.cases, c_bot,
                       iterations=len(self.cases) + len(self.bot_guards),
                       elapsed=time.monotonic() - start,
                       outputs=list(self.p.outputs))
        if self.cfg.fold:
            sol = fold_any_cases(self.p, sol)
        resolve_any(self.p, sol)
        return sol

    def _next_region(self):
        """A satisfiable hidden-free implicant of spec-and-not-C, or a verdict."""
        if self.projector is not None:
            r = self.projector.next_region(deadline=self.deadline)
            if r.status == "exhausted":
                return "done"
            if r.status != "region":
                return "unknown"
            return r.lits, r.model
        parts = [self.p.spec]
        parts += [mk_not(g) for g in self.guards]
        parts += self.extra_blocks
        f = mk_and(*parts)
        res = smt.check(f)
        if res.is_unsat:
            return "done"
        if res.kind != "sat":
            return "unknown"
        lits = smt.implicant(f, res.model, minimize=True)
        return lits, res.model

    def _handle_region(self, region: List[Literal], model) -> None:
        lits = list(region)
        values: Dict[Symbol, object] = {}
        realized = True
        for y in self.p.outputs:
            sol = unique.solve_unique(y, lits)
            if sol is not None:
                self._emit("unique", output=y.name, term=to_sexpr(sol.term))
                values[y] = sol.term
                lits = mbp._substituted(lits, y, sol.term)
                model = self._remodel(lits, model)
                continue
            cond, r = mbp.mbpr(model, y, lits, extra_funs=self._funs())
            if r is None:
                realized = False
                lits = cond
                break
            values[y] = r
            lits = cond
            model = self._remodel(lits, model)
        if not realized:
            # no computable witness: abandon these inputs and strengthen
            for y in self.p.outputs:
                if any(contains_any(l.atom, {y}) for l in lits):
                    lits = mbp.mbp(model, {y}, lits)
            pi = mk_and(*(l.term() for l in lits))
            self.had_bot = True
            self.bot_guards.append(pi)
            self.extra_blocks.append(mk_not(pi))
            if self.projector is not None:
                self.projector.block([l.negate() for l in lits])
            self._emit("bot", guard=to_sexpr(pi))
            return
        if self.projector is None and all(isinstance(v, Term) for v in values.values()):
            # guard by the spec with realizers substituted: weakest sound case
            guard = _subst(self.p.spec, dict(values))
        else:
            guard = mk_and(*(l.term() for l in lits))
        self.guards.append(guard)
        self.cases.append(Case(guard, values))
        if self.projector is not None:
            self.projector.block([l.negate() for l in lits])
        self._emit("case", guard=to_sexpr(guard),
                   values={y.name: ("_" if v is ANY else to_sexpr(v))
                           for y, v in values.items()})

    def _funs(self) -> List[Symbol]:
        return [s for s in self.p.vocabulary
                if s.arg_sorts and s.kind == COMPUTABLE]

    def _remodel(self, lits: List[Literal], model):
        """Substitutions can invalidate the region model; refresh it."""
        if all(model.eval_lit(l) for l in lits):
            return model
        res = smt.check(TRUE, lits)
        if not res.is_sat:
            raise SynthError("substituted region became unsatisfiable")
        return res.model

    def _check_invariant(self) -> None:
        sol = Solution("partial_maximal", mk_or(*self.guards), list(self.cases))
        resolve_any(self.p, sol)
        v = verify(self.p, sol)
        if not v.ok:
            raise SynthError(f"case invariant broken: {v.detail}")


def synthesize(problem: SynthesisProblem, cfg: Optional[EngineConfig] = None
               ) -> Solution:
    return Engine(problem, cfg or EngineConfig()).run()


# ---------------------------------------------------------------- programs


def resolve_any(problem: SynthesisProblem, sol: Solution) -> Solution:
    """Concretize unconstrained outputs with sort defaults, in place."""
    pool = problem.constant_pool()
    for case in sol.cases:
        for y, v in list(case.values.items()):
            if v is ANY:
                d = _sort_default(y.sort, pool)
                if d is None:
                    raise SynthError(
                        f"no computable constant of sort {y.sort.name} "
                        f"to stand in for the unconstrained output {y.name}")
                case.values[y] = d
    return sol


def fold_any_cases(problem: SynthesisProblem, sol: Solution) -> Solution:
    """Merge an unconstrained case into a trailing default case when its
    guard complements the other guards."""
    anys = [i for i, c in enumerate(sol.cases)
            if any(v is ANY for v in c.values.values())]
    if len(anys) != 1:
        return sol
    i = anys[0]
    rest = [c for j, c in enumerate(sol.cases) if j != i]
    if not rest:
        sol.cases = [Case(TRUE, dict(sol.cases[i].values))]
        return sol
    others = mk_or(*(c.guard for c in rest))
    g = sol.cases[i].guard
    if not smt.check(mk_and(g, others)).is_unsat:
        return sol
    if not smt.check(mk_and(mk_not(g), mk_not(others))).is_unsat:
        return sol
    default = rest[-1]
    merged = rest[:-1] + [Case(TRUE, dict(default.values))]
    sol.cases = merged
    return sol


def program_value(sol: Solution, y: Symbol, model: smt.Model) -> Optional[Term]:
    """The term the case list would pick for this model, by guard order."""
    for case in sol.cases:
        if model.eval(case.guard) is True or case.guard is TRUE:
            v = case.values.get(y)
            return v if isinstance(v, Term) else None
    return None


def verify(problem: SynthesisProblem, sol: Solution,
           maximality_samples: int = 0) -> Verdict:
    """Check that every guarded branch satisfies the spec and the guards
    cover the claimed condition, using evaluation-order semantics."""
    if sol.condition is FALSE:
        return Verdict(True)
    prior: List[Term] = []
    for idx, case in enumerate(sol.cases):
        if not case.computable():
            return Verdict(False, detail=f"case {idx} not computable")
        mapping = {y: v for y, v in case.values.items()}
        body = _subst(problem.spec, mapping)
        f = mk_and(sol.condition, case.guard,
                   *(mk_not(g) for g in prior), mk_not(body))
        res = smt.check(f)
        if not res.is_unsat:
            if res.kind != "sat":
                return Verdict(False, detail=f"case {idx}: solver unknown")
            return Verdict(False, res.model, f"case {idx} violates the spec")
        prior.append(case.guard)
    cover = mk_and(sol.condition, *(mk_not(g) for g in prior))
    res = smt.check(cover)
    if not res.is_unsat:
        if res.kind != "sat":
            return Verdict(False, detail="coverage: solver unknown")
        return Verdict(False, res.model, "condition not covered by any case")
    if sol.status == "partial_maximal" and maximality_samples:
        v = _spot_check_maximality(problem, sol, maximality_samples)
        if v is not None:
            return v
    return Verdict(True)


def _spot_check_maximality(problem: SynthesisProblem, sol: Solution,
                           samples: int) -> Optional[Verdict]:
    """Bounded instantiation check: no uncovered input should admit output
    values under every sampled assignment to the hidden constants."""
    consts = [s for s in problem.hidden if not s.arg_sorts and is_numeric(s.sort)]
    if len(consts) != len(problem.hidden):
        return None  # function-valued hidden symbols: skip
    combos = list(itertools.product([-1, 0, 1, 2], repeat=len(consts)))
    combos = combos[:samples] if consts else [()]
    insts = []
    for combo in combos:
        mapping = {c: mk_num(v, c.sort) for c, v in zip(consts, combo)}
        insts.append(_subst(problem.spec, mapping))
    f = mk_and(mk_not(sol.condition), mk_not(sol.c_bot), *insts)
    res = smt.check(f)
    if res.is_sat:
        return Verdict(False, res.model,
                       "uncovered input admits outputs on sampled instances")
    return None
