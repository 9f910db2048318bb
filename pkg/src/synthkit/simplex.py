"""Exact simplex over delta-rationals, with justified bounds.

General simplex in the solver style of Dutertre and de Moura: variables carry
lower/upper bounds and a current valuation, rows define basic variables as
linear combinations of nonbasic ones, and feasibility is restored by pivoting.
All arithmetic is exact: values are `int` while they stay integral and widen
to `Fraction` only when a division leaves the integers, which keeps the hot
paths on machine integers.  Strict bounds are represented by an infinitesimal
component, so `x < c` becomes `x <= c - eps`.  Pivot selection uses Bland's
rule throughout, which keeps runs terminating and reproducible.

Every asserted bound carries a caller tag (typically a literal).  Conflicts
come back as tag lists: the violated bound's tag plus the tags of the bounds
that block every column of the row.  Integer variables get their bounds
tightened to integers at assertion time; full integrality is the branch and
bound layer (`lia_check`) on top.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

from .terms import SynthError

BRANCH = object()   # tag for branch-and-bound decisions
PROBE = object()    # tag for is_fixed probes


def exact_div(a, b):
    """a / b without leaving the rationals; int when the quotient is whole."""
    if a.__class__ is int and b.__class__ is int:
        q, r = divmod(a, b)
        return q if r == 0 else Fraction(a, b)
    q = a / b
    return q.numerator if q.denominator == 1 else q


def narrow(x):
    """Collapse a whole Fraction back to int; leave everything else alone."""
    if x.__class__ is Fraction and x.denominator == 1:
        return x.numerator
    return x


class DeltaRational:
    """a + b*eps for an infinitesimal eps > 0; components are int or Fraction."""

    __slots__ = ("std", "eps")

    def __init__(self, std, eps=0):
        self.std = std
        self.eps = eps

    def __add__(self, o: "DeltaRational") -> "DeltaRational":
        return DeltaRational(self.std + o.std, self.eps + o.eps)

    def __sub__(self, o: "DeltaRational") -> "DeltaRational":
        return DeltaRational(self.std - o.std, self.eps - o.eps)

    def scale(self, c) -> "DeltaRational":
        return DeltaRational(self.std * c, self.eps * c)

    def __eq__(self, o) -> bool:
        return (o.__class__ is DeltaRational
                and self.std == o.std and self.eps == o.eps)

    def __hash__(self) -> int:
        return hash((self.std, self.eps))

    def __lt__(self, o: "DeltaRational") -> bool:
        if self.std != o.std:
            return self.std < o.std
        return self.eps < o.eps

    def __le__(self, o: "DeltaRational") -> bool:
        if self.std != o.std:
            return self.std < o.std
        return self.eps <= o.eps

    def __str__(self) -> str:
        if self.eps == 0:
            return str(self.std)
        return f"{self.std}{'+' if self.eps > 0 else '-'}{abs(self.eps)}e"

    def __repr__(self) -> str:
        return f"DeltaRational({self.std!r}, {self.eps!r})"


def dr(x, eps=0) -> DeltaRational:
    return DeltaRational(narrow(x), narrow(eps))


_ZERO = dr(0)


class Simplex:
    def __init__(self) -> None:
        self.is_int: List[bool] = []
        self.lo: List[Optional[Tuple[DeltaRational, object]]] = []
        self.hi: List[Optional[Tuple[DeltaRational, object]]] = []
        self.val: List[DeltaRational] = []
        self.rows: Dict[int, Dict[int, Fraction]] = {}
        self.cols: Dict[int, Set[int]] = {}
        self.trail: List[Tuple[int, str, object]] = []

    def new_var(self, is_int: bool = False) -> int:
        self.is_int.append(is_int)
        self.lo.append(None)
        self.hi.append(None)
        self.val.append(_ZERO)
        return len(self.is_int) - 1

    def add_row(self, s: int, expr: Dict[int, Fraction]) -> None:
        """Define fresh variable s as a linear combination of existing ones."""
        assert s not in self.rows
        row: Dict[int, Fraction] = {}
        for v, c in expr.items():
            sub = self.rows.get(v)
            if sub is None:
                row[v] = row.get(v, 0) + c
            else:
                for u, cu in sub.items():
                    row[u] = row.get(u, 0) + c * cu
        row = {v: narrow(c) for v, c in row.items() if c != 0}
        self.rows[s] = row
        value = _ZERO
        for v, c in row.items():
            self.cols.setdefault(v, set()).add(s)
            value = value + self.val[v].scale(c)
        self.val[s] = value

    # ------------------------------------------------------------------ bounds

    def _tighten(self, v: int, value: DeltaRational, lower: bool) -> DeltaRational:
        if not self.is_int[v]:
            return value
        c = value.std
        if lower:
            if value.eps > 0:
                n = math.floor(c) + 1
            else:
                n = math.ceil(c)
        else:
            if value.eps < 0:
                n = math.ceil(c) - 1
            else:
                n = math.floor(c)
        return dr(n)

    def assert_bound(self, v: int, lower: bool, value: DeltaRational,
                     tag: object) -> Optional[List[object]]:
        """Assert v >= value (lower) or v <= value; returns a conflict core or None."""
        value = self._tighten(v, value, lower)
        if lower:
            opp = self.hi[v]
            if opp is not None and opp[0] < value:
                return [tag, opp[1]]
            cur = self.lo[v]
            if cur is not None and value <= cur[0]:
                return None
            self.trail.append((v, "lo", cur))
            self.lo[v] = (value, tag)
            if v not in self.rows and value > self.val[v]:
                self._update(v, value)
        else:
            opp = self.lo[v]
            if opp is not None and value < opp[0]:
                return [tag, opp[1]]
            cur = self.hi[v]
            if cur is not None and cur[0] <= value:
                return None
            self.trail.append((v, "hi", cur))
            self.hi[v] = (value, tag)
            if v not in self.rows and self.val[v] > value:
                self._update(v, value)
        return None

    def _update(self, v: int, newval: DeltaRational) -> None:
        delta = newval - self.val[v]
        self.val[v] = newval
        for b in self.cols.get(v, ()):
            self.val[b] = self.val[b] + delta.scale(self.rows[b][v])

    def push(self) -> int:
        return len(self.trail)

    def pop(self, mark: int) -> None:
        while len(self.trail) > mark:
            v, which, old = self.trail.pop()
            if which == "lo":
                self.lo[v] = old
            else:
                self.hi[v] = old

    # ------------------------------------------------------------------ solving

    def check(self) -> Optional[List[object]]:
        """Restore feasibility; None when feasible, else a conflict core."""
        while True:
            broken = None
            for b in sorted(self.rows):
                lo, hi = self.lo[b], self.hi[b]
                if lo is not None and self.val[b] < lo[0]:
                    broken = (b, True)
                    break
                if hi is not None and hi[0] < self.val[b]:
                    broken = (b, False)
                    break
            if broken is None:
                return None
            b, need_up = broken
            row = self.rows[b]
            target = (self.lo[b] if need_up else self.hi[b])[0]
            pivot_col = None
            for x in sorted(row):
                a = row[x]
                if (a > 0) == need_up:
                    cap = self.hi[x]
                    if cap is None or self.val[x] < cap[0]:
                        pivot_col = x
                        break
                else:
                    cap = self.lo[x]
                    if cap is None or cap[0] < self.val[x]:
                        pivot_col = x
                        break
            if pivot_col is None:
                core = [(self.lo[b] if need_up else self.hi[b])[1]]
                for x in sorted(row):
                    a = row[x]
                    bound = self.hi[x] if (a > 0) == need_up else self.lo[x]
                    core.append(bound[1])
                return core
            self._pivot(b, pivot_col, target)

    def _pivot(self, b: int, x: int, target: DeltaRational) -> None:
        row = self.rows.pop(b)
        a = row[x]
        inv_a = exact_div(1, a)
        theta = (target - self.val[b]).scale(inv_a)
        # x's new defining row: x = (b - sum_{j != x} c_j x_j) / a
        new_row: Dict[int, Fraction] = {b: inv_a}
        for j, c in row.items():
            if j != x:
                new_row[j] = exact_div(-c, a)
        for j in row:
            self.cols[j].discard(b)
        for j, c in new_row.items():
            self.cols.setdefault(j, set()).add(x)
        self.rows[x] = new_row
        self.val[x] = self.val[x] + theta
        self.val[b] = target
        # substitute x out of every other row
        cols = self.cols
        for other in list(cols.get(x, ())):
            if other == x:
                continue
            orow = self.rows[other]
            cx = orow.pop(x, None)
            if cx is None:
                continue
            self.val[other] = self.val[other] + theta.scale(cx)
            cols[x].discard(other)
            for j, c in new_row.items():
                prev = orow.get(j)
                if prev is None:
                    orow[j] = cx * c
                    cols.setdefault(j, set()).add(other)
                    continue
                nxt = prev + cx * c
                if nxt == 0:
                    del orow[j]
                    cols[j].discard(other)
                else:
                    orow[j] = nxt

    # ------------------------------------------------------------------ queries

    def model(self) -> List[Fraction]:
        """Concrete rational values: pick eps small enough for every bound."""
        eps = Fraction(1)
        for v in range(len(self.val)):
            for bound, sense in ((self.lo[v], 1), (self.hi[v], -1)):
                if bound is None:
                    continue
                gap = (self.val[v] - bound[0]).scale(sense)
                # gap.std + gap.eps * eps must stay >= 0
                if gap.eps < 0 and gap.std > 0:
                    eps = min(eps, exact_div(-gap.std, gap.eps))
        eps = exact_div(eps, 2)
        return [x.std + x.eps * eps for x in self.val]

    def is_fixed(self, v: int) -> Optional[Tuple[Fraction, List[object]]]:
        """Value forced for v by the current constraints, if any.

        Requires a feasible state (call check() first).  Fast path when the
        bounds already pin v; otherwise probes both sides of the current value.
        """
        lo, hi = self.lo[v], self.hi[v]
        if lo is not None and hi is not None and lo[0] == hi[0] and lo[0].eps == 0:
            return lo[0].std, [lo[1], hi[1]]
        v0 = self.val[v]
        mark = self.push()
        c_up = self.assert_bound(v, False, DeltaRational(v0.std, v0.eps - 1), PROBE)
        if c_up is None:
            c_up = self.check()
        self.pop(mark)
        if c_up is None:
            self.check()
            return None
        mark = self.push()
        c_dn = self.assert_bound(v, True, DeltaRational(v0.std, v0.eps + 1), PROBE)
        if c_dn is None:
            c_dn = self.check()
        self.pop(mark)
        self.check()
        if c_dn is None:
            return None
        if v0.eps != 0:
            raise SynthError("variable fixed at a non-rational point")
        core = [t for t in c_up + c_dn if t is not PROBE]
        return v0.std, core

    def solved_row(self, v: int) -> Optional[Dict[int, Fraction]]:
        """Express v as a linear combination of other variables, if rows allow."""
        if v in self.rows:
            return dict(self.rows[v])
        users = [b for b in self.cols.get(v, ()) if v in self.rows.get(b, {})]
        if not users:
            return None
        b = min(users)
        self._pivot(b, v, self.val[b])
        return dict(self.rows[v])

    def drop_row(self, v: int) -> None:
        row = self.rows.pop(v, None)
        if row:
            for j in row:
                self.cols[j].discard(v)

    def clone(self) -> "Simplex":
        s = Simplex.__new__(Simplex)
        s.is_int = list(self.is_int)
        s.lo = list(self.lo)
        s.hi = list(self.hi)
        s.val = list(self.val)
        s.rows = {b: dict(r) for b, r in self.rows.items()}
        s.cols = {v: set(c) for v, c in self.cols.items()}
        s.trail = []
        return s


def lia_check(spx: Simplex, depth_cap: int = 64) -> Tuple[str, Optional[List[object]]]:
    """Branch and bound for integer feasibility on top of rational simplex.

    Returns ("sat", None) with an integral valuation in place, ("unsat", core)
    with branch tags stripped, or ("unknown", None) past the depth cap.
    """
    core = spx.check()
    if core is not None:
        return "unsat", [t for t in core if t is not BRANCH]
    v = _fractional_int_var(spx)
    if v is None:
        return "sat", None
    if depth_cap <= 0:
        return "unknown", None
    x = spx.val[v]
    down = math.floor(x.std) if (x.eps >= 0 or x.std != math.floor(x.std)) \
        else math.floor(x.std) - 1

    mark = spx.push()
    c1 = spx.assert_bound(v, False, dr(down), BRANCH)
    if c1 is None:
        status, c1 = lia_check(spx, depth_cap - 1)
        if status == "sat":
            spx.pop(mark)
            return "sat", None
        if status == "unknown":
            spx.pop(mark)
            return "unknown", None
    spx.pop(mark)

    mark = spx.push()
    c2 = spx.assert_bound(v, True, dr(down + 1), BRANCH)
    if c2 is None:
        status, c2 = lia_check(spx, depth_cap - 1)
        if status == "sat":
            spx.pop(mark)
            return "sat", None
        if status == "unknown":
            spx.pop(mark)
            return "unknown", None
    spx.pop(mark)

    seen = set()
    merged = []
    for t in list(c1) + list(c2):
        if t is BRANCH or id(t) in seen:
            continue
        seen.add(id(t))
        merged.append(t)
    return "unsat", merged


def _fractional_int_var(spx: Simplex) -> Optional[int]:
    for v in range(len(spx.val)):
        if spx.is_int[v]:
            x = spx.val[v]
            if x.eps != 0 or x.std.denominator != 1:
                return v
    return None
