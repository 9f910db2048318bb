"""Region enumeration for specs that mention symbols the program cannot read.

`ForallProjector` enumerates satisfiable cubes over the readable signature
that entail the spec no matter how the hidden symbols are interpreted.  A
small SAT solver (the "map") picks subsets of a literal pool seeded with two
groups: literals of the negated spec that mention hidden symbols, and
literals of the spec that avoid them.  Each pick U is examined:

  * U is inconsistent on its own: its core is excluded and the map re-picks.
  * U contradicts the spec: the contradiction's core is projected onto the
    readable signature under U's model; the negated projection joins the
    pool and becomes a map clause, so later picks must leave the region the
    projection covers.
  * U and the spec hold together in some model M: if the readable pool
    literals true under M entail the spec, their core is the next region.
    Otherwise a map clause demands that some literal false under M be
    picked next time, which forces progress.

Clauses of the last kind weaken as the pool grows: every literal that joins
the pool later is an alternative escape for every earlier such clause.  The
widening is encoded through a chain of fresh variables, one hop per batch of
new literals, with the chain tail assumed false at each solve; stored
clauses are never touched.

The enumeration is resumable.  After consuming a region the caller invokes
`block` with literals whose disjunction covers the region's complement.  The
disjunction constrains the map exactly like a negated projection, and it
also strengthens the spec used in the entailment check, so a consumed region
can never be produced a second time.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from . import mbp, smt
from .sat import SatSolver, minimize_core
from .terms import (TRUE, Literal, Symbol, Term, contains_any, lit_key,
                    literals_of, mk_and, mk_not, mk_or)

EventHook = Optional[Callable[[str, List[Literal]], None]]


@dataclass
class Region:
    status: str                     # "region" | "exhausted" | "unknown"
    lits: List[Literal] = field(default_factory=list)
    model: Optional[smt.Model] = None

    @property
    def found(self) -> bool:
        return self.status == "region"


class ForallProjector:
    """Enumerate cubes whose truth forces the spec for all hidden values."""

    def __init__(self, phi: Term, hidden: Set[Symbol],
                 on_event: EventHook = None) -> None:
        self.phi = phi
        self.hidden = frozenset(hidden)
        self.on_event = on_event
        self.map = SatSolver(default_phase=True)
        self.pool: List[Literal] = []
        self.var_of: Dict[Tuple[int, bool], int] = {}
        self.visible: List[Literal] = []
        self.visible_keys: Set[Tuple[int, bool]] = set()
        self.blocks: List[Term] = []
        self.chain: Optional[int] = None
        self.exhausted = False
        self.returned: Set[FrozenSet[Tuple[int, bool]]] = set()
        self.use_blocks = False
        self._pick_sess = smt.Session(TRUE)
        self._phi_sess = smt.Session(phi)
        self._neg_sess: Optional[smt.Session] = None
        self._neg_key: Optional[Tuple[bool, int]] = None
        for lit in literals_of(mk_not(phi), within=set(self.hidden)):
            self._register(lit, visible=False)
        for lit in literals_of(phi, without=set(self.hidden)):
            self._register(lit, visible=True)

    # ------------------------------------------------------------- pool

    def _register(self, lit: Literal, visible: bool) -> int:
        key = lit_key(lit)
        v = self.var_of.get(key)
        if v is None:
            v = self.map.new_var()
            self.var_of[key] = v
            self.pool.append(lit)
            nv = self.var_of.get(lit_key(lit.negate()))
            if nv is not None:
                # a pick never contains both a literal and its negation
                self.map.add_clause([-v, -nv])
        if visible and key not in self.visible_keys:
            self.visible_keys.add(key)
            self.visible.append(lit)
        return v

    def _absorb(self, clause: Sequence[Literal]) -> None:
        """Clause over pick variables; new literals widen old escape clauses."""
        fresh = [l for l in clause if lit_key(l) not in self.visible_keys]
        vs = [self._register(l, visible=True) for l in clause]
        self.map.add_clause(vs)
        if fresh and self.chain is not None:
            escapes = [self.var_of[lit_key(l)] for l in fresh]
            nxt = self.map.new_var()
            for w in escapes:
                self.map.add_clause([-w, self.chain])
            self.map.add_clause([-nxt, self.chain])
            self.map.add_clause([-self.chain] + escapes + [nxt])
            self.chain = nxt

    def block(self, clause: Sequence[Literal]) -> None:
        """Report a consumed region; `clause` must cover its complement."""
        self._absorb(clause)
        self.blocks.append(mk_or(*(l.term() for l in clause)))

    def _emit(self, kind: str, lits: List[Literal]) -> None:
        if self.on_event is not None:
            self.on_event(kind, lits)

    def _shrink(self, core: Sequence[Literal], against: smt.Session,
                hidden_first: bool) -> List[Literal]:
        """Deletion-minimize a core against a formula, in pool order.

        Hidden-symbol literals go first when asked: deleting them early keeps
        projections small (fewer placeholder groups, fewer guards).
        """
        order = {lit_key(l): i for i, l in enumerate(self.pool)}
        hidden = set(self.hidden)

        def rank(l: Literal) -> Tuple[int, int]:
            pos = order.get(lit_key(l), len(self.pool))
            if hidden_first and not contains_any(l.atom, hidden):
                return (1, pos)
            return (0, pos)

        def probe(sub):
            res = against.check(list(sub))
            return res.core if res.is_unsat else False

        return minimize_core(sorted(core, key=rank), probe)

    def _neg_session(self) -> smt.Session:
        """Checker for the negated (optionally block-strengthened) spec."""
        key = (self.use_blocks, len(self.blocks) if self.use_blocks else 0)
        if key != self._neg_key:
            phi_strong = (mk_and(self.phi, *self.blocks)
                          if self.use_blocks else self.phi)
            self._neg_sess = smt.Session(mk_not(phi_strong))
            self._neg_key = key
        return self._neg_sess

    # ------------------------------------------------------------- search

    def next_region(self, max_rounds: int = 10000,
                    deadline: Optional[float] = None) -> Region:
        if self.exhausted:
            return Region("exhausted")
        for _ in range(max_rounds):
            if deadline is not None and time.monotonic() > deadline:
                return Region("unknown")
            assume = [-self.chain] if self.chain is not None else []
            got = self.map.solve(assume)
            if got is None:
                return Region("unknown")
            if got is False:
                self.exhausted = True
                self._emit("exhausted", [])
                return Region("exhausted")
            pick = [l for l in self.pool
                    if self.map.model.get(self.var_of[lit_key(l)])]
            self._emit("pick", pick)

            res = self._pick_sess.check(pick, minimize=True)
            if res.kind == "unknown":
                return Region("unknown")
            if res.is_unsat:
                self._emit("inconsistent", res.core)
                self.map.add_clause([-self.var_of[lit_key(l)] for l in res.core])
                continue
            model = res.model

            res = self._phi_sess.check(pick)
            if res.kind == "unknown":
                return Region("unknown")
            if res.is_unsat:
                core = self._shrink(pick, self._phi_sess, hidden_first=True)
                self._emit("core", core)
                proj = mbp.mbp(model, set(self.hidden), core)
                self._emit("projection", proj)
                self._absorb([l.negate() for l in proj])
                continue

            mprime = res.model
            true_vis = [l for l in self.visible if mprime.eval_lit(l)]
            neg_sess = self._neg_session()
            res = neg_sess.check(true_vis)
            if res.kind == "unknown":
                return Region("unknown")
            if res.is_unsat:
                region = self._shrink(true_vis, neg_sess, hidden_first=False)
                self._emit("region", region)
                key = frozenset(lit_key(l) for l in region)
                if key in self.returned:
                    # same answer twice: start checking against the
                    # block-strengthened spec from now on
                    self.use_blocks = True
                self.returned.add(key)
                return Region("region", region, mprime)

            false_lits = [l for l in self.pool if not mprime.eval_lit(l)]
            self._emit("escape", false_lits)
            if self.chain is None:
                self.chain = self.map.new_var()
            self.map.add_clause(
                [self.var_of[lit_key(l)] for l in false_lits] + [self.chain])
        return Region("unknown")
