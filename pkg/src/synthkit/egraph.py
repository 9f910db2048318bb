"""Congruence closure over ground terms, with explanations.

The proof forest follows Nieuwenhuis-Oliveras: every successful merge adds one
edge between the two terms that were equated, labeled either by the asserted
literal or by a congruence step; `justify` replays paths to recover the set of
asserted literals supporting an equality.  Distinct numerals, true, and false
act as pairwise-distinct value anchors, so merging two of their classes is a
conflict.

Class representatives: `rep_of` builds, per class, the smallest term whose
symbols all satisfy a given predicate (computable symbols, for synthesis), or
reports that none exists.  Definability is a least fixpoint over classes, so a
class counts as representable only when some member's head is allowed and all
argument classes are representable; ties break on term size, then on the
printed form.
"""
from __future__ import annotations

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .terms import (BOOL, FALSE, TRUE, Literal, Symbol, Term, mk_app, term_size,
                    to_sexpr, _STORE)

# forest edge labels
_LIT = 0
_CONG = 1


class EGraph:
    def __init__(self) -> None:
        self.nodes: Dict[int, Term] = {}
        self.parent: Dict[int, int] = {}
        self.size: Dict[int, int] = {}
        self.members: Dict[int, List[int]] = {}
        self.uses: Dict[int, List[int]] = {}          # root -> app tids with an arg in class
        self.sig: Dict[tuple, int] = {}               # (head, arg roots) -> app tid
        self.valtag: Dict[int, int] = {}              # root -> anchor constant tid
        self.diseqs: Dict[int, List[Tuple[int, int, Literal]]] = {}
        self.forest: Dict[int, Tuple[int, int, tuple]] = {}  # tid -> (neighbor, kind, data)
        self.asserted: List[Literal] = []
        self.conflict: Optional[List[Literal]] = None
        self.intern(TRUE)
        self.intern(FALSE)

    # ------------------------------------------------------------------ union-find

    def find(self, tid: int) -> int:
        root = tid
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[tid] != root:
            self.parent[tid], tid = root, self.parent[tid]
        return root

    def find_term(self, t: Term) -> Term:
        return self.nodes[self.find(t.tid)]

    def same(self, s: Term, t: Term) -> bool:
        return self.find(s.tid) == self.find(t.tid)

    # ------------------------------------------------------------------ interning

    def _headkey(self, t: Term):
        if t.op == "app":
            return ("app", t.sym)
        return (t.op, t.value)

    def intern(self, t: Term) -> None:
        if t.tid in self.nodes:
            return
        for a in t.args:
            self.intern(a)
        tid = t.tid
        self.nodes[tid] = t
        self.parent[tid] = tid
        self.size[tid] = 1
        self.members[tid] = [tid]
        if t.op in ("num", "true", "false"):
            self.valtag[tid] = tid
        if t.args:
            for a in t.args:
                self.uses.setdefault(self.find(a.tid), []).append(tid)
            key = (self._headkey(t), tuple(self.find(a.tid) for a in t.args))
            other = self.sig.get(key)
            if other is None:
                self.sig[key] = tid
            elif self.find(other) != self.find(tid):
                self._merge(tid, other, _CONG, ())

    # ------------------------------------------------------------------ assertions

    def assert_literal(self, lit: Literal) -> Optional[List[Literal]]:
        """Assert an equality, disequality, or Bool atom; None or a conflict."""
        if self.conflict is not None:
            return self.conflict
        a = lit.atom
        self.asserted.append(lit)
        if a.op == "eq":
            s, t = a.args
            self.intern(s)
            self.intern(t)
            if lit.pos:
                self._merge(s.tid, t.tid, _LIT, (lit,))
            else:
                self._diseq(s.tid, t.tid, lit)
        else:
            self.intern(a)
            anchor = TRUE if lit.pos else FALSE
            self._merge(a.tid, anchor.tid, _LIT, (lit,))
        return self.conflict

    def _diseq(self, s: int, t: int, tag: Literal) -> None:
        rs, rt = self.find(s), self.find(t)
        if rs == rt:
            self.conflict = self._dedup(self.explain(s, t) + [tag])
            return
        self.diseqs.setdefault(rs, []).append((s, t, tag))
        self.diseqs.setdefault(rt, []).append((s, t, tag))

    def _merge(self, a: int, b: int, kind: int, data: tuple) -> None:
        queue: List[Tuple[int, int, int, tuple]] = [(a, b, kind, data)]
        while queue and self.conflict is None:
            s, t, kind, data = queue.pop()
            rs, rt = self.find(s), self.find(t)
            if rs == rt:
                continue
            # keep the larger class as the new root
            if self.size[rs] > self.size[rt]:
                s, t, rs, rt = t, s, rt, rs
            self._forest_link(s, t, kind, data)
            self.parent[rs] = rt
            self.size[rt] += self.size[rs]
            self.members[rt].extend(self.members[rs])

            va, vb = self.valtag.get(rs), self.valtag.get(rt)
            if va is not None and vb is not None:
                self.conflict = self._dedup(self.explain(va, vb))
                return
            if va is not None:
                self.valtag[rt] = va

            for (x, y, tag) in self.diseqs.pop(rs, []):
                if self.find(x) == self.find(y):
                    self.conflict = self._dedup(self.explain(x, y) + [tag])
                    return
                self.diseqs.setdefault(rt, []).append((x, y, tag))

            for p in self.uses.pop(rs, []):
                node = self.nodes[p]
                key = (self._headkey(node), tuple(self.find(q.tid) for q in node.args))
                other = self.sig.get(key)
                if other is None:
                    self.sig[key] = p
                elif self.find(other) != self.find(p):
                    queue.append((p, other, _CONG, ()))
                self.uses.setdefault(rt, []).append(p)

    # ------------------------------------------------------------------ explanations

    def _forest_link(self, s: int, t: int, kind: int, data: tuple) -> None:
        # re-root s's explanation tree, then hang it under t
        path = []
        cur = s
        while cur in self.forest:
            nxt, k, d = self.forest[cur]
            path.append((cur, nxt, k, d))
            cur = nxt
        for (x, y, k, d) in reversed(path):
            del self.forest[x]
            self.forest[y] = (x, k, d)
        self.forest[s] = (t, kind, data)

    def _path_to_root(self, s: int) -> List[int]:
        out = [s]
        while out[-1] in self.forest:
            out.append(self.forest[out[-1]][0])
        return out

    def explain(self, s, t) -> List[Literal]:
        """Asserted literals supporting s ~ t (terms or tids)."""
        if isinstance(s, Term):
            s = s.tid
        if isinstance(t, Term):
            t = t.tid
        out: List[Literal] = []
        self._explain(s, t, out)
        return self._dedup(out)

    def _explain(self, s: int, t: int, out: List[Literal]) -> None:
        if s == t:
            return
        ps = self._path_to_root(s)
        pt = self._path_to_root(t)
        common = None
        in_ps = {x: i for i, x in enumerate(ps)}
        for x in pt:
            if x in in_ps:
                common = x
                break
        if common is None:
            raise AssertionError("explain on terms that were never merged")
        for x in ps[:in_ps[common]]:
            self._explain_edge(x, out)
        for x in pt[:pt.index(common)]:
            self._explain_edge(x, out)

    def _explain_edge(self, x: int, out: List[Literal]) -> None:
        nxt, kind, data = self.forest[x]
        if kind == _LIT:
            out.append(data[0])
        else:
            a, b = self.nodes[x], self.nodes[nxt]
            for p, q in zip(a.args, b.args):
                self._explain(p.tid, q.tid, out)

    @staticmethod
    def _dedup(lits: Iterable[Literal]) -> List[Literal]:
        seen: Set[Literal] = set()
        out = []
        for l in lits:
            if l not in seen:
                seen.add(l)
                out.append(l)
        return out

    def justify(self, s: Term, t: Term) -> List[Literal]:
        return self.explain(s, t)

    # ------------------------------------------------------------------ classes / reps

    def classes(self) -> List[Tuple[int, List[Term]]]:
        out = []
        for tid, mem in self.members.items():
            if self.find(tid) == tid:
                out.append((tid, [self.nodes[m] for m in mem]))
        return out

    def class_terms(self, t: Term) -> List[Term]:
        return [self.nodes[m] for m in self.members[self.find(t.tid)]]

    def rep_table(self, allowed: Callable[[Symbol], bool]) -> Dict[int, Tuple[Term, Term]]:
        """Per class root: (representative term, the member it was built from).

        A member is usable when its head is an allowed/interpreted symbol and
        every argument's class already has a representative.  Iterates to a
        fixpoint; among candidates the smallest (term size, printed form) wins.
        """
        def head_ok(m: Term) -> bool:
            if m.op == "app":
                return allowed(m.sym)
            return True  # numerals, true/false, arithmetic operators

        best: Dict[int, Tuple[int, str, Term, Term]] = {}
        changed = True
        while changed:
            changed = False
            for root, mems in self.classes():
                for m in map(lambda i: self.nodes[i], self.members[root]):
                    if not head_ok(m):
                        continue
                    parts = []
                    ok = True
                    for a in m.args:
                        got = best.get(self.find(a.tid))
                        if got is None:
                            ok = False
                            break
                        parts.append(got[2])
                    if not ok:
                        continue
                    if m.args:
                        r = _STORE.mk(m.op, tuple(parts), m.sort, m.sym, m.value)
                    else:
                        r = m
                    cand = (term_size(r), to_sexpr(r), r, m)
                    cur = best.get(root)
                    if cur is None or cand[:2] < cur[:2]:
                        best[root] = cand
                        changed = True
        return {root: (r, m) for root, (_, _, r, m) in best.items()}

    def rep_of(self, t: Term, allowed: Callable[[Symbol], bool],
               table: Optional[Dict[int, Tuple[Term, Term]]] = None
               ) -> Optional[Tuple[Term, List[Literal]]]:
        """Representative for t's class plus justification of t ~ rep, if any."""
        if table is None:
            table = self.rep_table(allowed)

        just: List[Literal] = []

        def build(node_tid: int) -> Optional[Term]:
            got = table.get(self.find(node_tid))
            if got is None:
                return None
            rep, member = got
            just.extend(self.explain(node_tid, member.tid))
            for a in member.args:
                if build(a.tid) is None:
                    return None
            return rep

        r = build(t.tid)
        if r is None:
            return None
        return r, self._dedup(just)
