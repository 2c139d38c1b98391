"""Test-only oracles that share no code with the package."""

from __future__ import annotations

import math
import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?|\.\d+)|([A-Za-z_]\w*)|(.))")

_FUNCS = {
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sqr": lambda x: x * x,
    "xlog": lambda x: 0.0 if x == 0.0 else x * math.log(x),
    "sin": math.sin,
    "cos": math.cos,
}


class ReferenceEvaluator:
    """Evaluates expression text directly by recursive descent.

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := ('-'|'+') unary | power
    power := atom ('^' int)?
    """

    def __init__(self, env: dict[str, float]):
        self.env = env

    def __call__(self, text: str) -> float:
        self.toks = [m.group(1) or m.group(2) or m.group(3) for m in _TOKEN.finditer(text) if m.group(0).strip()]
        self.i = 0
        v = self.expr()
        assert self.i == len(self.toks), f"trailing tokens in {text!r}"
        return v

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expr(self):
        v = self.term()
        while self.peek() in ("+", "-"):
            v = v + self.term() if self.take() == "+" else v - self.term()
        return v

    def term(self):
        v = self.unary()
        while self.peek() in ("*", "/"):
            v = v * self.unary() if self.take() == "*" else v / self.unary()
        return v

    def unary(self):
        if self.peek() == "-":
            self.take()
            return -self.unary()
        if self.peek() == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        v = self.atom()
        if self.peek() == "^":
            self.take()
            paren = self.peek() == "("
            if paren:
                self.take()
            sign = 1
            if self.peek() in ("-", "+"):
                sign = -1 if self.take() == "-" else 1
            k = sign * int(float(self.take()))
            if paren:
                self.take()
            v = v**k
        return v

    def atom(self):
        t = self.take()
        if t == "(":
            v = self.expr()
            self.take()
            return v
        if t in _FUNCS and self.peek() == "(":
            self.take()
            v = self.expr()
            self.take()
            return _FUNCS[t](v)
        if t in self.env:
            return self.env[t]
        return float(t)


def random_expression(rng: np.random.Generator, names: list[str], depth: int = 4) -> str:
    """Random expression text that stays inside every intrinsic's domain."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return str(rng.choice(names))
        return f"{rng.uniform(-3, 3):.3f}"
    sub = lambda: random_expression(rng, names, depth - 1)
    kind = rng.integers(0, 12)
    if kind == 0:
        return f"({sub()} + {sub()})"
    if kind == 1:
        return f"({sub()} - {sub()})"
    if kind == 2:
        return f"({sub()} * {sub()})"
    if kind == 3:
        return f"({sub()} / (sqr({sub()}) + 1))"
    if kind == 4:
        return f"-{sub()}"
    if kind == 5:
        k = int(rng.choice([2, 3, 4, -1, -2]))
        if k < 0:
            return f"(sqr({sub()}) + 0.5)^({k})"
        return f"({sub()})^{k}"
    if kind == 6:
        return f"exp({sub()} / 4)"
    if kind == 7:
        return f"log(sqr({sub()}) + 0.5)"
    if kind == 8:
        return f"sqrt(sqr({sub()}) + 0.1)"
    if kind == 9:
        return f"sqr({sub()})"
    if kind == 10:
        return f"xlog(sqr({sub()}))"
    return f"{rng.choice(['sin', 'cos'])}({sub()})"


def grid_points(box, total: int) -> np.ndarray:
    """About ``total`` points on a uniform grid over the box."""
    n = len(box)
    per = max(2, int(round(total ** (1.0 / n))))
    axes = [np.linspace(d.lo, d.hi, per) for d in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)


def random_subbox(rng: np.random.Generator, box):
    from mcrelax import Box

    dims = []
    for d in box:
        a, b = sorted(rng.uniform(d.lo, d.hi, 2))
        dims.append((float(a), float(b)))
    return Box(dims)


def random_lp(rng: np.random.Generator, m: int = 5, n: int = 8):
    """``min c.z  s.t.  A z <= b, 0 <= z <= 100`` where the upper bounds never bind.

    The first m-1 rows are packing rows (positive entries, positive rhs) that
    keep every feasible z below 50; the last row is a covering row that makes
    the origin infeasible, so phase 1 has work to do.
    """
    A = np.empty((m, n))
    b = np.empty(m)
    A[: m - 1] = rng.uniform(0.2, 1.0, (m - 1, n))
    b[: m - 1] = rng.uniform(1.0, 10.0, m - 1)
    A[m - 1] = -rng.uniform(0.0, 1.0, n)
    b[m - 1] = -rng.uniform(0.0, 3.0)
    c = rng.normal(size=n)
    return c, A, b, np.zeros(n), np.full(n, 100.0)


def enumerate_vertices(c, A, b):
    """Optimal value of ``min c.z, A z <= b, z >= 0`` over all basic solutions.

    Returns ``inf`` when no basic solution is feasible.
    """
    from itertools import combinations

    m, n = A.shape
    M = np.hstack([A, np.eye(m)])
    cols = np.array(list(combinations(range(n + m), m)))
    B = M[:, cols].transpose(1, 0, 2)  # (k, m, m)
    ok = np.abs(np.linalg.det(B)) > 1e-10
    xB = np.linalg.solve(B[ok], np.broadcast_to(b, (ok.sum(), m))[..., None])[..., 0]
    feas = np.all(xB >= -1e-9, axis=1)
    if not feas.any():
        return math.inf
    full_c = np.concatenate([c, np.zeros(m)])
    vals = np.einsum("km,km->k", full_c[cols[ok][feas]], xB[feas])
    return float(vals.min())
