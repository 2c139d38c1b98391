"""Expression DAGs for factorable functions.

Text is parsed by a small recursive-descent parser into a hash-consed DAG.
Nodes are numbered in reversed-level order: leaves (variables, then
constants) get level 0 and every operation sits one level above its deepest
child. Node ids are schedule positions, so every child id is smaller than
its parent's and evaluation is a single forward sweep.

Grammar::

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := ("-" | "+") unary | power
    power    := atom ["^" exponent]
    exponent := ["-" | "+"] INTEGER | "(" ["-" | "+"] INTEGER ")"
    atom     := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC     := exp | log | sqrt | sqr | xlog | sin | cos
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

from .interval import DomainError, Jet, xlog


class Op(enum.Enum):
    VAR = "var"
    CONST = "const"
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    NEG = "neg"
    POW = "^"
    EXP = "exp"
    LOG = "log"
    SQRT = "sqrt"
    SQR = "sqr"
    XLOG = "xlog"
    SIN = "sin"
    COS = "cos"

    @property
    def arity(self) -> int:
        if self in (Op.VAR, Op.CONST):
            return 0
        if self in (Op.ADD, Op.SUB, Op.MUL, Op.DIV):
            return 2
        return 1


UNARY_FUNCS = {op.value: op for op in (Op.EXP, Op.LOG, Op.SQRT, Op.SQR, Op.XLOG, Op.SIN, Op.COS)}


@dataclass(frozen=True, slots=True)
class Node:
    """One factor. ``param`` is the variable index, constant value or integer exponent."""

    op: Op
    children: tuple[int, ...] = ()
    param: float | int | None = None


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        self.line, self.col = line, col
        super().__init__(f"{message} at line {line}, column {col}")


# --- tokenizer --------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass(slots=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        else:
            for k, ch in enumerate(m.group()):
                if ch == "\n":
                    line += 1
                    line_start = pos + k + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# --- builder ----------------------------------------------------------------


class DagBuilder:
    """Accumulates hash-consed nodes for one or more expressions over ``var_names``."""

    def __init__(self, var_names: Sequence[str]):
        if len(set(var_names)) != len(var_names):
            raise ValueError("duplicate variable names")
        self.var_names = list(var_names)
        self._nodes: list[Node] = []
        self._index: dict[Node, int] = {}
        for i in range(len(var_names)):
            self.add(Node(Op.VAR, (), i))
        self._roots: list[int] = []

    def add(self, node: Node) -> int:
        if node.op is Op.CONST:
            node = Node(Op.CONST, (), float(node.param) + 0.0)
        idx = self._index.get(node)
        if idx is None:
            idx = len(self._nodes)
            self._nodes.append(node)
            self._index[node] = idx
        return idx

    def var(self, i: int) -> int:
        return i

    def const(self, value: float) -> int:
        return self.add(Node(Op.CONST, (), float(value)))

    def op(self, op: Op, *children: int, param=None) -> int:
        if len(children) != op.arity:
            raise ValueError(f"{op} expects {op.arity} operands")
        if op is Op.POW:
            k = int(param)
            if k == 1:
                return children[0]
            if k == 0:
                return self.const(1.0)
            param = k
        return self.add(Node(op, tuple(children), param))

    def parse(self, text: str) -> int:
        return _Parser(text, self).parse()

    def add_root(self, text_or_id: str | int) -> int:
        idx = self.parse(text_or_id) if isinstance(text_or_id, str) else text_or_id
        self._roots.append(idx)
        return idx

    def build(self) -> "Dag":
        n = len(self._nodes)
        level = [0] * n
        for i, node in enumerate(self._nodes):
            if node.children:
                level[i] = 1 + max(level[c] for c in node.children)
        # variables before constants at level 0, creation order otherwise
        order = sorted(range(n), key=lambda i: (level[i], self._nodes[i].op is not Op.VAR, i))
        new_id = {old: new for new, old in enumerate(order)}
        nodes = [
            Node(self._nodes[old].op, tuple(new_id[c] for c in self._nodes[old].children), self._nodes[old].param)
            for old in order
        ]
        return Dag(nodes, [new_id[r] for r in self._roots], list(self.var_names))


class _Parser:
    def __init__(self, text: str, builder: DagBuilder):
        self.toks = _tokenize(text)
        self.pos = 0
        self.b = builder
        self.names = {name: i for i, name in enumerate(builder.var_names)}

    def peek(self, offset: int = 0) -> _Tok:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def next(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def parse(self) -> int:
        if self.peek().kind == "eof":
            self.error("empty expression")
        idx = self.expr()
        if self.peek().kind != "eof":
            self.error(f"unexpected token {self.peek().text!r}")
        return idx

    def expr(self) -> int:
        left = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = Op.ADD if self.next().text == "+" else Op.SUB
            left = self.b.op(op, left, self.term())
        return left

    def term(self) -> int:
        left = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = Op.MUL if self.next().text == "*" else Op.DIV
            left = self.b.op(op, left, self.unary())
        return left

    def unary(self) -> int:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("-", "+"):
            self.next()
            nxt, after = self.peek(), self.peek(1)
            if tok.text == "-" and nxt.kind == "num" and after.text != "^":
                self.next()
                return self.b.const(-float(nxt.text))
            inner = self.unary()
            return self.b.op(Op.NEG, inner) if tok.text == "-" else inner
        return self.power()

    def power(self) -> int:
        base = self.atom()
        if self.peek().text == "^":
            self.next()
            k = self.exponent()
            base = self.b.op(Op.POW, base, param=k)
            if self.peek().text == "^":
                self.error("chained powers must be parenthesized")
        return base

    def exponent(self) -> int:
        paren = self.peek().text == "("
        if paren:
            self.next()
        sign = 1
        if self.peek().text in ("-", "+"):
            sign = -1 if self.next().text == "-" else 1
        tok = self.peek()
        if tok.kind != "num":
            self.error("exponent must be an integer literal")
        self.next()
        value = float(tok.text)
        if not value.is_integer():
            self.error(f"non-integer exponent {tok.text}", tok)
        if paren:
            self.expect(")")
        return sign * int(value)

    def atom(self) -> int:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return self.b.const(float(tok.text))
        if tok.kind == "name":
            self.next()
            if tok.text in UNARY_FUNCS and self.peek().text == "(":
                self.next()
                arg = self.expr()
                self.expect(")")
                return self.b.op(UNARY_FUNCS[tok.text], arg)
            if tok.text in self.names:
                return self.b.var(self.names[tok.text])
            self.error(f"unknown identifier {tok.text!r}", tok)
        if tok.text == "(":
            self.next()
            inner = self.expr()
            self.expect(")")
            return inner
        self.error(f"unexpected token {tok.text or 'end of input'!r}")


# --- DAG --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dag:
    nodes: list[Node]
    roots: list[int]
    var_names: list[str]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def schedule(self) -> list[int]:
        return list(range(len(self.nodes)))

    def __len__(self) -> int:
        return len(self.nodes)

    def structure(self) -> tuple:
        """Hashable structural fingerprint (for comparing DAGs)."""
        return tuple((n.op, n.children, n.param) for n in self.nodes), tuple(self.roots), tuple(self.var_names)

    @cached_property
    def node_vars(self) -> list[frozenset[int]]:
        out: list[frozenset[int]] = []
        for node in self.nodes:
            if node.op is Op.VAR:
                out.append(frozenset((node.param,)))
            else:
                s: frozenset[int] = frozenset()
                for c in node.children:
                    s = s | out[c]
                out.append(s)
        return out

    def subtree(self, j: int) -> list[int]:
        key = ("subtree", j)
        if key not in self._cache:
            seen = {j}
            stack = [j]
            while stack:
                for c in self.nodes[stack.pop()].children:
                    if c not in seen:
                        seen.add(c)
                        stack.append(c)
            self._cache[key] = sorted(seen)
        return self._cache[key]

    # evaluation

    def eval_real(self, point: Sequence[float]) -> list[float]:
        vals: list[float] = []
        for j, node in enumerate(self.nodes):
            vals.append(_eval_real_node(node, vals, point, j))
        return vals

    def evaluate(self, point: Sequence[float], root: int | None = None) -> float:
        return self.eval_real(point)[self.roots[0] if root is None else root]

    def jet(self, j: int, var: int, x) -> Jet:
        """Second-order jet of factor ``j`` w.r.t. variable ``var`` seeded at ``x``.

        Other variables are held at zero derivative; callers only use this on
        factors depending on ``var`` alone.
        """
        vals: dict[int, Jet] = {}
        for k in self.subtree(j):
            node = self.nodes[k]
            op = node.op
            if op is Op.VAR:
                vals[k] = Jet.variable(x) if node.param == var else Jet.const(0.0)
            elif op is Op.CONST:
                vals[k] = Jet.const(node.param)
            elif op is Op.ADD:
                vals[k] = vals[node.children[0]] + vals[node.children[1]]
            elif op is Op.SUB:
                vals[k] = vals[node.children[0]] - vals[node.children[1]]
            elif op is Op.MUL:
                vals[k] = vals[node.children[0]] * vals[node.children[1]]
            elif op is Op.DIV:
                vals[k] = vals[node.children[0]] / vals[node.children[1]]
            elif op is Op.NEG:
                vals[k] = -vals[node.children[0]]
            elif op is Op.POW:
                vals[k] = vals[node.children[0]].powi(node.param)
            else:
                vals[k] = vals[node.children[0]].apply(op.value)
        return vals[j]

    def compile(self, roots: Sequence[int] | None = None, backend: str = "math") -> Callable:
        """Generate a fast evaluator returning the values of ``roots``.

        ``backend="numpy"`` produces a vectorized function taking one array
        per variable.
        """
        roots = list(self.roots if roots is None else roots)
        key = ("compile", tuple(roots), backend)
        if key in self._cache:
            return self._cache[key]
        needed = sorted({k for r in roots for k in self.subtree(r)})
        lines = ["def _f(z):"]
        for k in needed:
            lines.append(f"    t{k} = {self._code(k, backend)}")
        ret = ", ".join(f"t{r}" for r in roots)
        lines.append(f"    return ({ret},)")
        if backend == "numpy":
            import numpy as np

            env = {"np": np, "_xlog": _np_xlog}
        else:
            env = {"math": math, "_xlog": xlog, "_pow": _safe_pow}
        exec("\n".join(lines), env)
        fn = env["_f"]
        self._cache[key] = fn
        return fn

    def _code(self, k: int, backend: str) -> str:
        node = self.nodes[k]
        c = [f"t{i}" for i in node.children]
        lib = "np" if backend == "numpy" else "math"
        op = node.op
        if op is Op.VAR:
            return f"z[{node.param}]"
        if op is Op.CONST:
            return repr(node.param)
        if op in (Op.ADD, Op.SUB, Op.MUL, Op.DIV):
            return f"{c[0]} {op.value} {c[1]}"
        if op is Op.NEG:
            return f"-{c[0]}"
        if op is Op.POW:
            if backend == "numpy":
                return f"np.power({c[0]}, {float(node.param)!r})"
            return f"_pow({c[0]}, {node.param})"
        if op is Op.SQR:
            return f"{c[0]} * {c[0]}"
        if op is Op.XLOG:
            return f"_xlog({c[0]})"
        return f"{lib}.{op.value}({c[0]})"

    # text round-trip

    def to_text(self, j: int | None = None) -> str:
        j = self.roots[0] if j is None else j
        memo: dict[int, str] = {}
        for k in self.subtree(j):
            node = self.nodes[k]
            c = [memo[i] for i in node.children]
            op = node.op
            if op is Op.VAR:
                s = self.var_names[node.param]
            elif op is Op.CONST:
                s = repr(node.param) if node.param >= 0 else f"({node.param!r})"
            elif op in (Op.ADD, Op.SUB, Op.MUL, Op.DIV):
                s = f"({c[0]} {op.value} {c[1]})"
            elif op is Op.NEG:
                s = f"(-({c[0]}))"
            elif op is Op.POW:
                base = c[0] if c[0].startswith("(") or self.nodes[node.children[0]].op is Op.VAR else f"({c[0]})"
                s = f"({base}^{node.param})"
            else:
                s = f"{op.value}({c[0]})"
            memo[k] = s
        return memo[j]

    def describe(self, j: int) -> str:
        node = self.nodes[j]
        if node.op is Op.VAR:
            return self.var_names[node.param]
        if node.op is Op.CONST:
            return repr(node.param)
        return self.to_text(j)


def _safe_pow(x: float, k: int) -> float:
    if k < 0 and x == 0.0:
        raise DomainError("negative power of zero")
    return x**k


def _np_xlog(x):
    import numpy as np

    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _eval_real_node(node: Node, vals: list[float], point: Sequence[float], j: int) -> float:
    op = node.op
    if op is Op.VAR:
        return float(point[node.param])
    if op is Op.CONST:
        return node.param
    a = vals[node.children[0]]
    if op is Op.ADD:
        return a + vals[node.children[1]]
    if op is Op.SUB:
        return a - vals[node.children[1]]
    if op is Op.MUL:
        return a * vals[node.children[1]]
    if op is Op.DIV:
        b = vals[node.children[1]]
        if b == 0.0:
            raise DomainError("division by zero", j)
        return a / b
    if op is Op.NEG:
        return -a
    if op is Op.POW:
        if node.param < 0 and a == 0.0:
            raise DomainError("negative power of zero", j)
        return a**node.param
    if op is Op.EXP:
        return math.exp(a)
    if op is Op.LOG:
        if a <= 0.0:
            raise DomainError(f"log of non-positive value {a}", j)
        return math.log(a)
    if op is Op.SQRT:
        if a < 0.0:
            raise DomainError(f"sqrt of negative value {a}", j)
        return math.sqrt(a)
    if op is Op.SQR:
        return a * a
    if op is Op.XLOG:
        if a < 0.0:
            raise DomainError(f"xlog of negative value {a}", j)
        return xlog(a)
    if op is Op.SIN:
        return math.sin(a)
    if op is Op.COS:
        return math.cos(a)
    raise AssertionError(op)


def parse(text: str, vars: Sequence[str]) -> Dag:
    """Parse a single expression into a DAG whose only root is the expression."""
    b = DagBuilder(vars)
    b.add_root(text)
    return b.build()


def parse_many(texts: Iterable[str], vars: Sequence[str]) -> Dag:
    b = DagBuilder(vars)
    for t in texts:
        b.add_root(t)
    return b.build()


def schedule(dag: Dag) -> list[int]:
    return dag.schedule
