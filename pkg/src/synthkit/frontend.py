"""Problem files in, case programs out.

The input format is SMT-LIB2-flavored S-expressions in `.synth` files.  On
top of the usual `set-logic` / `declare-sort` / `declare-const` /
`declare-fun` (all declaring computable symbols) there are four commands:

    (declare-uncomputable <name> <sort>)           constant the program
    (declare-uncomputable <name> (<sorts>) <sort>) or function cannot read
    (synth-const <name> <sort>)                    one output, repeatable
    (constraint <formula>)                         conjoined into the spec
    (check-synth :mode partial|total)

Comments run from `;` to end of line.  Errors carry line and column.

Printing goes the other way: `print_problem` emits a parseable `.synth`
file, and `print_program` renders a solution either in guarded-case syntax,

    ⟨C, case g1: v1; ...; default: vn⟩

or as SMT-LIB define-fun terms with nested ite.  `parse_program` reads the
case syntax back; the printers round-trip through it under test.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .engine import ANY, Case, Solution, SynthesisProblem
from .terms import (BOOL, COMPUTABLE, FALSE, INT, OUTPUT, REAL, TRUE,
                    UNCOMPUTABLE, Sort, Symbol, SynthError, Term, is_numeric,
                    mk_add, mk_and, mk_app, mk_div, mk_eq, mk_implies, mk_ite,
                    mk_le, mk_lt, mk_mod, mk_mul, mk_neg, mk_not, mk_num,
                    mk_or, mk_sub, to_sexpr)

LOGICS = ("EUF", "LIA", "LRA", "EUFLIA", "EUFLRA")


class ParseError(SynthError):
    def __init__(self, msg: str, line: int, col: int, source: str = "") -> None:
        where = f"{source}:{line}:{col}" if source else f"{line}:{col}"
        super().__init__(f"{where}: {msg}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------- reader

@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int


_PUNCT = "()"


def _tokenize(text: str, source: str) -> List[_Tok]:
    toks: List[_Tok] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in _PUNCT:
            toks.append(_Tok(ch, line, col))
            col += 1
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n;()":
                j += 1
            toks.append(_Tok(text[i:j], line, col))
            col += j - i
            i = j
    return toks


Node = Union[_Tok, "_SList"]


@dataclass(frozen=True)
class _SList:
    items: Tuple[Node, ...]
    line: int
    col: int


def _read_all(toks: List[_Tok], source: str) -> List[Node]:
    out: List[Node] = []
    stack: List[Tuple[List[Node], int, int]] = []
    for tok in toks:
        if tok.text == "(":
            stack.append(([], tok.line, tok.col))
        elif tok.text == ")":
            if not stack:
                raise ParseError("unmatched ')'", tok.line, tok.col, source)
            items, l, c = stack.pop()
            node = _SList(tuple(items), l, c)
            (stack[-1][0] if stack else out).append(node)
        else:
            (stack[-1][0] if stack else out).append(tok)
    if stack:
        _, l, c = stack[-1]
        raise ParseError("unclosed '('", l, c, source)
    return out


def _pos(node: Node) -> Tuple[int, int]:
    return node.line, node.col


# ---------------------------------------------------------------- parsing

_NUM_OPS = {"+", "-", "*", "div", "mod"}
_REL_OPS = {"<=", "<", ">=", ">"}


class _ProblemBuilder:
    def __init__(self, source: str) -> None:
        self.source = source
        self.sorts: Dict[str, Sort] = {"Bool": BOOL, "Int": INT, "Real": REAL}
        self.symbols: Dict[str, Symbol] = {}
        self.order: List[Symbol] = []
        self.custom_sorts: List[Sort] = []
        self.constraints: List[Term] = []
        self.logic = ""
        self.mode = "partial"
        self.checked = False

    def fail(self, msg: str, node: Node) -> None:
        line, col = _pos(node)
        raise ParseError(msg, line, col, self.source)

    # ------------------------------------------------------------ commands

    def command(self, node: Node) -> None:
        if not isinstance(node, _SList) or not node.items:
            self.fail("expected a command list", node)
        head = node.items[0]
        if isinstance(head, _SList):
            self.fail("command name must be a symbol", head)
        name = head.text
        args = node.items[1:]
        if name == "set-logic":
            self._set_logic(node, args)
        elif name in ("set-info", "set-option"):
            pass
        elif name == "declare-sort":
            self._declare_sort(node, args)
        elif name == "declare-const":
            self._declare_const(node, args, COMPUTABLE)
        elif name in ("declare-fun", "declare-computable"):
            self._declare_fun(node, args, COMPUTABLE)
        elif name == "declare-uncomputable":
            self._declare_any(node, args, UNCOMPUTABLE)
        elif name == "synth-const":
            self._declare_const(node, args, OUTPUT)
        elif name == "constraint":
            if len(args) != 1:
                self.fail("constraint takes one formula", node)
            f = self.term(args[0])
            if f.sort != BOOL:
                self.fail("constraint must be Bool", args[0])
            self.constraints.append(f)
        elif name == "check-synth":
            self._check_synth(node, args)
        else:
            self.fail(f"unknown command '{name}'", head)

    def _set_logic(self, node: Node, args: Sequence[Node]) -> None:
        if len(args) != 1 or isinstance(args[0], _SList):
            self.fail("set-logic takes one name", node)
        logic = args[0].text
        if logic not in LOGICS:
            self.fail(f"unsupported logic '{logic}'", args[0])
        self.logic = logic

    def _declare_sort(self, node: Node, args: Sequence[Node]) -> None:
        if not args or isinstance(args[0], _SList):
            self.fail("declare-sort takes a name", node)
        if len(args) > 1 and (isinstance(args[1], _SList) or args[1].text != "0"):
            self.fail("only arity-0 sorts are supported", args[1])
        name = args[0].text
        if name in self.sorts:
            self.fail(f"sort '{name}' already declared", args[0])
        sort = Sort(name)
        self.sorts[name] = sort
        self.custom_sorts.append(sort)

    def sort(self, node: Node) -> Sort:
        if isinstance(node, _SList):
            self.fail("expected a sort name", node)
        got = self.sorts.get(node.text)
        if got is None:
            self.fail(f"unknown sort '{node.text}'", node)
        return got

    def _declare_const(self, node: Node, args: Sequence[Node], kind: str) -> None:
        if len(args) != 2 or isinstance(args[0], _SList):
            self.fail("expected (name sort)", node)
        self._add_symbol(args[0], (), self.sort(args[1]), kind)

    def _declare_fun(self, node: Node, args: Sequence[Node], kind: str) -> None:
        if len(args) != 3 or isinstance(args[0], _SList) \
                or not isinstance(args[1], _SList):
            self.fail("expected (name (sorts) sort)", node)
        arg_sorts = tuple(self.sort(a) for a in args[1].items)
        self._add_symbol(args[0], arg_sorts, self.sort(args[2]), kind)

    def _declare_any(self, node: Node, args: Sequence[Node], kind: str) -> None:
        """Constant form (name sort) or function form (name (sorts) sort)."""
        if len(args) == 2:
            self._declare_const(node, args, kind)
        else:
            self._declare_fun(node, args, kind)

    def _add_symbol(self, name_node: _Tok, arg_sorts: Tuple[Sort, ...],
                    sort: Sort, kind: str) -> None:
        name = name_node.text
        prev = self.symbols.get(name)
        if prev is not None:
            if {prev.kind, kind} == {OUTPUT, UNCOMPUTABLE}:
                self.fail(f"output declared uncomputable: '{name}'", name_node)
            self.fail(f"symbol '{name}' already declared", name_node)
        sym = Symbol(name, arg_sorts, sort, kind)
        self.symbols[name] = sym
        self.order.append(sym)

    def _check_synth(self, node: Node, args: Sequence[Node]) -> None:
        self.checked = True
        if not args:
            return
        if len(args) != 2 or isinstance(args[0], _SList) \
                or args[0].text != ":mode" or isinstance(args[1], _SList):
            self.fail("expected (check-synth :mode partial|total)", node)
        mode = args[1].text
        if mode not in ("partial", "total"):
            self.fail(f"unknown mode '{mode}'", args[1])
        self.mode = mode

    # ------------------------------------------------------------ terms

    def term(self, node: Node) -> Term:
        if isinstance(node, _Tok):
            return self._atom(node)
        if not node.items:
            self.fail("empty application", node)
        head = node.items[0]
        if isinstance(head, _SList):
            self.fail("operator must be a symbol", head)
        op = head.text
        args = node.items[1:]
        if op in ("and", "or", "not", "=>", "ite", "=", "distinct"):
            return self._boolean(node, op, args)
        if op in _NUM_OPS or op in _REL_OPS or op == "/":
            return self._arith(node, op, args)
        sym = self.symbols.get(op)
        if sym is None:
            self.fail(f"undeclared symbol '{op}'", head)
        terms = [self.term(a) for a in args]
        if len(terms) != sym.arity:
            self.fail(f"'{op}' expects {sym.arity} arguments, got {len(terms)}", node)
        for t, want, a in zip(terms, sym.arg_sorts, args):
            if t.sort != want:
                self.fail(f"argument of '{op}' has sort {t.sort}, expected {want}", a)
        return mk_app(sym, *terms)

    def _atom(self, tok: _Tok) -> Term:
        text = tok.text
        if text == "true":
            return TRUE
        if text == "false":
            return FALSE
        num = _numeral(text)
        if num is not None:
            value, real = num
            return mk_num(value, REAL if real else INT)
        sym = self.symbols.get(text)
        if sym is None:
            self.fail(f"undeclared symbol '{text}'", tok)
        if sym.arity != 0:
            self.fail(f"'{text}' expects {sym.arity} arguments, got 0", tok)
        return mk_app(sym)

    def _boolean(self, node: _SList, op: str, args: Sequence[Node]) -> Term:
        terms = [self.term(a) for a in args]
        if op == "not":
            if len(terms) != 1:
                self.fail("not takes one argument", node)
            self._bool_args(node, args, terms)
            return mk_not(terms[0])
        if op in ("and", "or"):
            self._bool_args(node, args, terms)
            return mk_and(*terms) if op == "and" else mk_or(*terms)
        if op == "=>":
            if len(terms) < 2:
                self.fail("=> takes at least two arguments", node)
            self._bool_args(node, args, terms)
            out = terms[-1]
            for t in reversed(terms[:-1]):
                out = mk_implies(t, out)
            return out
        if op == "ite":
            if len(terms) != 3:
                self.fail("ite takes three arguments", node)
            if terms[0].sort != BOOL:
                self.fail("ite condition must be Bool", args[0])
            if terms[1].sort != terms[2].sort:
                self.fail("ite branches must share a sort", node)
            return mk_ite(terms[0], terms[1], terms[2])
        # = and distinct: chained over same-sorted arguments
        if len(terms) < 2:
            self.fail(f"{op} takes at least two arguments", node)
        for t, a in zip(terms[1:], args[1:]):
            if t.sort != terms[0].sort:
                self.fail(f"sort mismatch in {op}: {terms[0].sort} vs {t.sort}", a)
        if op == "=":
            return mk_and(*(mk_eq(a, b) for a, b in zip(terms, terms[1:])))
        pairs = [(terms[i], terms[j]) for i in range(len(terms))
                 for j in range(i + 1, len(terms))]
        return mk_and(*(mk_not(mk_eq(a, b)) for a, b in pairs))

    def _bool_args(self, node: _SList, args: Sequence[Node],
                   terms: Sequence[Term]) -> bool:
        for t, a in zip(terms, args):
            if t.sort != BOOL:
                self.fail(f"expected Bool, got {t.sort}", a)
        return True

    def _arith(self, node: _SList, op: str, args: Sequence[Node]) -> Term:
        terms = [self.term(a) for a in args]
        if not terms:
            self.fail(f"{op} takes arguments", node)
        for t, a in zip(terms, args):
            if not is_numeric(t.sort):
                self.fail(f"expected a numeric sort, got {t.sort}", a)
        for t, a in zip(terms[1:], args[1:]):
            if t.sort != terms[0].sort:
                self.fail(f"sort mismatch in {op}: {terms[0].sort} vs {t.sort}", a)
        if op in _REL_OPS:
            if len(terms) < 2:
                self.fail(f"{op} takes at least two arguments", node)
            rel = {"<=": mk_le, "<": mk_lt,
                   ">=": lambda a, b: mk_le(b, a),
                   ">": lambda a, b: mk_lt(b, a)}[op]
            return mk_and(*(rel(a, b) for a, b in zip(terms, terms[1:])))
        if op == "+":
            return mk_add(*terms)
        if op == "-":
            if len(terms) == 1:
                return mk_neg(terms[0])
            out = terms[0]
            for t in terms[1:]:
                out = mk_sub(out, t)
            return out
        if op == "*":
            if len(terms) != 2:
                self.fail("* takes two arguments", node)
            if terms[0].op == "num":
                return mk_mul(terms[0].value, terms[1])
            if terms[1].op == "num":
                return mk_mul(terms[1].value, terms[0])
            self.fail("one factor of * must be a numeral", node)
        if op == "/":
            if len(terms) == 2 and terms[0].op == "num" and terms[1].op == "num":
                if terms[1].value == 0:
                    self.fail("division by zero", node)
                return mk_num(terms[0].value / terms[1].value, REAL)
            self.fail("/ is only supported on numerals", node)
        # div, mod: constant positive divisor
        if len(terms) != 2:
            self.fail(f"{op} takes two arguments", node)
        if terms[1].op != "num" or terms[1].value <= 0 \
                or terms[1].value.denominator != 1:
            self.fail(f"{op} needs a positive integer divisor", args[1])
        make = mk_div if op == "div" else mk_mod
        try:
            return make(terms[0], int(terms[1].value))
        except SynthError as e:
            self.fail(str(e), node)

    # ------------------------------------------------------------ assembly

    def finish(self) -> SynthesisProblem:
        outputs = [s for s in self.order if s.kind == OUTPUT]
        hidden = [s for s in self.order if s.kind == UNCOMPUTABLE]
        spec = mk_and(*self.constraints) if self.constraints else TRUE
        logic = self.logic or _infer_logic(self.order, self.custom_sorts)
        return SynthesisProblem(spec, outputs, hidden, name=self.source,
                                vocabulary=list(self.order), logic=logic,
                                mode=self.mode)


def _numeral(text: str) -> Optional[Tuple[Fraction, bool]]:
    """Parse a numeric literal; returns (value, is_real) or None."""
    body = text
    neg = body.startswith("-") and len(body) > 1
    if neg:
        body = body[1:]
    if body.isdigit():
        v = Fraction(int(body))
        return (-v if neg else v), False
    parts = body.split(".")
    if len(parts) == 2 and parts[0].isdigit() and (parts[1] or "0").isdigit():
        v = Fraction(body)
        return (-v if neg else v), True
    return None


def _infer_logic(order: Sequence[Symbol], custom: Sequence[Sort]) -> str:
    euf = bool(custom) or any(s.arg_sorts and s.kind != OUTPUT for s in order)
    arith = {s.sort for s in order if is_numeric(s.sort)}
    arith.update(t for s in order for t in s.arg_sorts if is_numeric(t))
    if REAL in arith:
        return "EUFLRA" if euf else "LRA"
    if INT in arith:
        return "EUFLIA" if euf else "LIA"
    return "EUF"


def parse_problem(text: Union[str, bytes], source: str = "<input>") -> SynthesisProblem:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    builder = _ProblemBuilder(source)
    for node in _read_all(_tokenize(text, source), source):
        builder.command(node)
    return builder.finish()


# ---------------------------------------------------------------- printing

def print_problem(p: SynthesisProblem) -> str:
    lines: List[str] = []
    if p.logic:
        lines.append(f"(set-logic {p.logic})")
    seen = {"Bool", "Int", "Real"}
    for s in p.vocabulary:
        for sort in (s.sort, *s.arg_sorts):
            if sort.name not in seen:
                seen.add(sort.name)
                lines.append(f"(declare-sort {sort.name} 0)")
    for s in p.vocabulary:
        args = "(" + " ".join(t.name for t in s.arg_sorts) + ")"
        if s.kind == OUTPUT:
            lines.append(f"(synth-const {s.name} {s.sort.name})")
        elif s.kind == UNCOMPUTABLE:
            body = f"{args} {s.sort.name}" if s.arg_sorts else s.sort.name
            lines.append(f"(declare-uncomputable {s.name} {body})")
        elif s.arg_sorts:
            lines.append(f"(declare-fun {s.name} {args} {s.sort.name})")
        else:
            lines.append(f"(declare-const {s.name} {s.sort.name})")
    if p.spec is not TRUE:
        lines.append(f"(constraint {to_sexpr(p.spec)})")
    lines.append(f"(check-synth :mode {p.mode})")
    return "\n".join(lines) + "\n"


def _case_values(case: Case, outputs: Sequence[Symbol]) -> str:
    vals = [case.values[y] for y in outputs]
    txt = ["_" if v is ANY else to_sexpr(v) for v in vals]
    return txt[0] if len(txt) == 1 else "(" + ", ".join(txt) + ")"


def print_program(sol: Solution, mode: str = "case") -> str:
    outputs = sol.outputs or sorted(
        {y for c in sol.cases for y in c.values}, key=lambda s: s.name)
    if mode == "smtlib":
        return _print_smtlib(sol, outputs)
    total = sol.status == "total"
    cond = ("⊤" if sol.condition is TRUE or total
            else "⊥" if sol.condition is FALSE else to_sexpr(sol.condition))
    # guards cover the condition, so once every earlier guard has failed the
    # last one is implied; print it as the default arm
    covered = sol.status != "exhausted"
    pieces = []
    for i, case in enumerate(sol.cases):
        vals = _case_values(case, outputs)
        last = i == len(sol.cases) - 1
        if case.guard is TRUE or (last and covered):
            pieces.append(f"default: {vals}")
        else:
            pieces.append(f"case {to_sexpr(case.guard)}: {vals}")
    if not pieces:
        pieces = ["default: ⊥"]   # empty condition admits no input
    return f"⟨{cond}, {'; '.join(pieces)}⟩"


def _print_smtlib(sol: Solution, outputs: Sequence[Symbol]) -> str:
    lines = [f"(define-fun condition () Bool {to_sexpr(sol.condition)})"]
    for y in outputs:
        vals = []
        for case in sol.cases:
            v = case.values[y]
            if v is ANY:
                raise SynthError("unconstrained value: resolve before printing")
            vals.append(v)
        if not vals:
            raise SynthError("no cases to print")
        body = vals[-1]
        for case, v in zip(reversed(sol.cases[:-1]), reversed(vals[:-1])):
            body = mk_ite(case.guard, v, body)
        lines.append(
            f"(define-fun {y.name} () {y.sort.name} {to_sexpr(body)})")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------- program re-parser

def parse_program(text: str, p: SynthesisProblem,
                  source: str = "<program>") -> Solution:
    """Read the guarded-case syntax back into a Solution."""
    body = text.strip()
    if not (body.startswith("⟨") and body.endswith("⟩")):
        raise ParseError("program must be bracketed ⟨...⟩", 1, 1, source)
    chunks = _split_top(body[1:-1], ",", limit=1)
    if len(chunks) != 2:
        raise ParseError("expected ⟨condition, cases⟩", 1, 1, source)
    env = _ProblemBuilder(source)
    env.sorts.update({s.name: s for sym in p.vocabulary
                      for s in (sym.sort, *sym.arg_sorts)})
    env.symbols = {s.name: s for s in p.vocabulary}
    cond = _special_formula(chunks[0].strip(), env)
    cases: List[Case] = []
    for piece in _split_top(chunks[1], ";"):
        piece = piece.strip()
        if piece.startswith("default:"):
            guard, rest = TRUE, piece[len("default:"):]
        elif piece.startswith("case "):
            head, _, rest = piece[len("case "):].partition(":")
            guard = _special_formula(head.strip(), env)
        else:
            raise ParseError(f"expected 'case' or 'default', got '{piece}'",
                             1, 1, source)
        values = _parse_values(rest.strip(), env, p.outputs, source)
        cases.append(Case(guard, values))
    return Solution(status="parsed", condition=cond, cases=cases,
                    outputs=list(p.outputs))


def _special_formula(text: str, env: _ProblemBuilder) -> Term:
    if text == "⊤":
        return TRUE
    if text == "⊥":
        return FALSE
    nodes = _read_all(_tokenize(text, env.source), env.source)
    if len(nodes) != 1:
        raise ParseError(f"expected one formula, got {len(nodes)}", 1, 1,
                         env.source)
    return env.term(nodes[0])


def _parse_values(text: str, env: _ProblemBuilder, outputs: Sequence[Symbol],
                  source: str) -> Dict[Symbol, object]:
    if len(outputs) > 1:
        if not (text.startswith("(") and text.endswith(")")):
            raise ParseError("expected a value tuple", 1, 1, source)
        parts = [s.strip() for s in _split_top(text[1:-1], ",")]
    else:
        parts = [text]
    if len(parts) != len(outputs):
        raise ParseError(f"expected {len(outputs)} values, got {len(parts)}",
                         1, 1, source)
    out: Dict[Symbol, object] = {}
    for y, part in zip(outputs, parts):
        out[y] = ANY if part == "_" else _special_formula(part, env)
    return out


def _split_top(text: str, sep: str, limit: int = -1) -> List[str]:
    """Split on sep at paren depth zero."""
    out: List[str] = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == sep and depth == 0 and limit != 0:
            out.append(text[start:i])
            start = i + 1
            limit -= 1
    out.append(text[start:])
    return out
