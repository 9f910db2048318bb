"""CDCL SAT solver with assumptions and unsat cores.

Small and self-contained: two watched literals, first-UIP learning, VSIDS
activities with phase saving, geometric restarts.  Decisions break activity
ties by variable index, so runs are reproducible.  Assumption handling follows
the usual scheme: assumptions are forced as the first decisions and a final
conflict is resolved back onto them to produce a core.
"""
from __future__ import annotations

import heapq
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

UNDEF = 0


class SatSolver:
    def __init__(self, default_phase: bool = False) -> None:
        self.nvars = 0
        self.clauses: List[List[int]] = []
        self.watches: Dict[int, List[int]] = {}
        self.assign: List[int] = [UNDEF]          # 1-indexed; +1 true, -1 false
        self.level: List[int] = [0]
        self.reason: List[Optional[int]] = [None]  # clause index
        self.activity: List[float] = [0.0]
        self.phase: List[bool] = [False]
        self.default_phase = default_phase
        self.trail: List[int] = []
        self.trail_lim: List[int] = []
        # lazy decision heap: every unassigned var has an entry carrying its
        # current activity; stale or assigned entries are dropped when popped
        self.heap: List[Tuple[float, int]] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.var_decay = 0.95
        self.ok = True
        self.model: Dict[int, bool] = {}
        self.core: List[int] = []

    def new_var(self) -> int:
        self.nvars += 1
        self.assign.append(UNDEF)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(self.default_phase)
        heapq.heappush(self.heap, (0.0, self.nvars))
        return self.nvars

    def _ensure(self, lit: int) -> None:
        while abs(lit) > self.nvars:
            self.new_var()

    def value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause; returns False if the instance became trivially unsat."""
        if self.trail_lim:
            self._backtrack(0)  # keep the watch invariant simple
        out: List[int] = []
        for l in lits:
            self._ensure(l)
            if -l in out:
                return True  # tautology
            if l not in out:
                out.append(l)
        # top-level simplification against fixed values
        out2 = []
        for l in out:
            if self.level[abs(l)] == 0 and self.assign[abs(l)] != UNDEF:
                if self.value(l) > 0:
                    return True
                continue
            out2.append(l)
        if not out2:
            self.ok = False
            return False
        if len(out2) == 1:
            if not self._enqueue(out2[0], None):
                self.ok = False
                return False
            return self._propagate() is None or self._fail()
        ci = len(self.clauses)
        self.clauses.append(out2)
        self.watches.setdefault(out2[0], []).append(ci)
        self.watches.setdefault(out2[1], []).append(ci)
        return True

    def _fail(self) -> bool:
        self.ok = False
        return False

    def _enqueue(self, lit: int, reason: Optional[int]) -> bool:
        if self.value(lit) < 0:
            return False
        if self.value(lit) > 0:
            return True
        v = abs(lit)
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.phase[v] = lit > 0
        self.trail.append(lit)
        return True

    def _propagate(self) -> Optional[int]:
        """Unit propagation; returns a conflicting clause index or None."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            neg = -lit
            ws = self.watches.get(neg, [])
            i = 0
            while i < len(ws):
                ci = ws[i]
                cl = self.clauses[ci]
                if cl[0] == neg:
                    cl[0], cl[1] = cl[1], cl[0]
                if self.value(cl[0]) > 0:
                    i += 1
                    continue
                moved = False
                for k in range(2, len(cl)):
                    if self.value(cl[k]) >= 0:
                        cl[1], cl[k] = cl[k], cl[1]
                        self.watches.setdefault(cl[1], []).append(ci)
                        ws[i] = ws[-1]
                        ws.pop()
                        moved = True
                        break
                if moved:
                    continue
                if not self._enqueue(cl[0], ci):
                    return ci
                i += 1
        return None

    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for u in range(1, self.nvars + 1):
                self.activity[u] *= 1e-100
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.nvars + 1)
                         if self.assign[u] == UNDEF]
            heapq.heapify(self.heap)
        elif self.assign[v] == UNDEF:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def _analyze(self, confl: int) -> tuple:
        """First-UIP conflict analysis; returns (learned clause, backjump level)."""
        learned: List[int] = [0]
        seen = [False] * (self.nvars + 1)
        counter = 0
        lit = None
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        ci = confl
        while True:
            for q in self.clauses[ci]:
                if lit is not None and q == lit:
                    continue
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level[v] >= cur_level:
                        counter += 1
                    else:
                        learned.append(q)
            while True:
                lit = self.trail[idx]
                idx -= 1
                if seen[abs(lit)]:
                    break
            counter -= 1
            seen[abs(lit)] = False
            if counter == 0:
                break
            ci = self.reason[abs(lit)]
        learned[0] = -lit
        if len(learned) == 1:
            return learned, 0
        bl = max(self.level[abs(q)] for q in learned[1:])
        # put a max-level literal in the second watch slot
        for k in range(1, len(learned)):
            if self.level[abs(learned[k])] == bl:
                learned[1], learned[k] = learned[k], learned[1]
                break
        return learned, bl

    def _backtrack(self, lvl: int) -> None:
        heap = self.heap
        act = self.activity
        while len(self.trail_lim) > lvl:
            bound = self.trail_lim.pop()
            while len(self.trail) > bound:
                lit = self.trail.pop()
                v = abs(lit)
                self.assign[v] = UNDEF
                self.reason[v] = None
                heapq.heappush(heap, (-act[v], v))
        self.qhead = min(self.qhead, len(self.trail))

    def _decide(self) -> Optional[int]:
        heap = self.heap
        if len(heap) > 2 * self.nvars + 1024:  # compact accumulated stale entries
            heap = self.heap = [(-self.activity[u], u)
                                for u in range(1, self.nvars + 1)
                                if self.assign[u] == UNDEF]
            heapq.heapify(heap)
        assign = self.assign
        act = self.activity
        while heap:
            k, v = heapq.heappop(heap)
            if assign[v] == UNDEF and -k == act[v]:
                return v if self.phase[v] else -v
        return None

    def _analyze_final(self, confl: int, n_assumed: int) -> List[int]:
        """Resolve a conflict at assumption levels onto the assumptions."""
        core: List[int] = []
        seen = [False] * (self.nvars + 1)
        queue = [abs(q) for q in self.clauses[confl]]
        for v in queue:
            seen[v] = True
        while queue:
            v = queue.pop()
            if self.level[v] == 0:
                continue
            r = self.reason[v]
            if r is None:
                # decision: one of the assumptions
                lit = self.assign[v] * v
                core.append(lit)
            else:
                for q in self.clauses[r]:
                    u = abs(q)
                    if not seen[u]:
                        seen[u] = True
                        queue.append(u)
        return core

    def solve(self, assumptions: Sequence[int] = (),
              conflict_budget: Optional[int] = None) -> Optional[bool]:
        """Solve under assumptions.

        True: model in self.model.  False: self.core holds a subset of the
        assumptions whose conjunction is unsat.  None: budget exhausted.
        """
        if not self.ok:
            self.core = []
            return False
        self._backtrack(0)
        for a in assumptions:
            self._ensure(a)
        if self._propagate() is not None:
            self.ok = False
            self.core = []
            return False

        conflicts = 0
        restart_limit = 100
        restart_ceiling = restart_limit
        n_assumed = 0
        while True:
            confl = self._propagate()
            if confl is not None:
                conflicts += 1
                if len(self.trail_lim) <= n_assumed:
                    if len(self.trail_lim) == 0:
                        self.ok = False
                        self.core = []
                    else:
                        self.core = self._analyze_final(confl, n_assumed)
                    return False
                learned, bl = self._analyze(confl)
                if len(learned) == 1:
                    bl = 0
                self._backtrack(bl)
                n_assumed = min(n_assumed, bl)  # undone assumptions get replayed
                ci = len(self.clauses)
                self.clauses.append(learned)
                if len(learned) > 1:
                    self.watches.setdefault(learned[0], []).append(ci)
                    self.watches.setdefault(learned[1], []).append(ci)
                    self._enqueue(learned[0], ci)
                else:
                    self._enqueue(learned[0], None)
                self.var_inc /= self.var_decay
                if conflict_budget is not None and conflicts >= conflict_budget:
                    return None
                if conflicts >= restart_ceiling:
                    restart_limit = int(restart_limit * 1.5)
                    restart_ceiling = conflicts + restart_limit
                    self._backtrack(n_assumed)
                continue

            if n_assumed < len(assumptions):
                a = assumptions[n_assumed]
                n_assumed += 1
                val = self.value(a)
                if val > 0:
                    self.trail_lim.append(len(self.trail))  # dummy level, keeps counting simple
                    continue
                if val < 0:
                    self.core = self._final_core_of(a)
                    return False
                self.trail_lim.append(len(self.trail))
                self._enqueue(a, None)
                continue

            lit = self._decide()
            if lit is None:
                self.model = {v: self.assign[v] > 0 for v in range(1, self.nvars + 1)}
                return True
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, None)

    def _final_core_of(self, a: int) -> List[int]:
        """Core when assumption `a` is already false under earlier assumptions."""
        core = [a]
        seen = [False] * (self.nvars + 1)
        queue = [abs(a)]
        seen[abs(a)] = True
        while queue:
            v = queue.pop()
            if self.level[v] == 0:
                continue
            r = self.reason[v]
            if r is None:
                lit = self.assign[v] * v
                if lit != a:
                    core.append(lit)
            else:
                for q in self.clauses[r]:
                    u = abs(q)
                    if not seen[u]:
                        seen[u] = True
                        queue.append(u)
        return core


T = TypeVar("T")


def minimize_core(core: Sequence[T], still_conflicting: Callable[[Sequence[T]], bool]) -> List[T]:
    """Deletion-minimal subset of `core` keeping `still_conflicting` true.

    The callback must be monotone (supersets of a conflicting set conflict).
    It may return a conflicting sublist of its argument instead of True;
    minimization then jumps straight to that sublist, saving probes.
    """
    kept = list(core)
    tested: set = set()
    while True:
        nxt = next((x for x in kept if id(x) not in tested), None)
        if nxt is None:
            return kept
        cand = [x for x in kept if x is not nxt]
        got = still_conflicting(cand)
        if got is False or got is None:
            tested.add(id(nxt))
        elif got is True:
            kept = cand
        else:
            ids = {id(x) for x in got}
            kept = [x for x in cand if id(x) in ids]
