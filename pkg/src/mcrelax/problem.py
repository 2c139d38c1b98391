"""Optimization problems over expression DAGs and their text file format.

A problem file is made of sections introduced by a keyword on its own line::

    name sixhump
    vars
    x -3 3
    y -2 2
    objective
    (4 - 2.1*x^2 + x^4/3)*x^2 + x*y + (-4 + 4*y^2)*y^2
    ineq
    x^2 + y^2 - 4        # means expr <= 0
    eq
    x - y                # means expr = 0

``#`` starts a comment. Each expression sits on one line.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .expr import Dag, DagBuilder, ParseError
from .interval import Box, Interval

SECTIONS = ("vars", "objective", "ineq", "eq")


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    dag: Dag
    objective: int
    ineq: tuple[int, ...]
    eq: tuple[int, ...]
    box: Box

    @property
    def n(self) -> int:
        return len(self.box)

    @property
    def var_names(self) -> list[str]:
        return self.dag.var_names

    @property
    def constrained(self) -> bool:
        return bool(self.ineq or self.eq)

    @classmethod
    def from_strings(
        cls,
        name: str,
        variables: Sequence[tuple[str, float, float]],
        objective: str,
        ineq: Sequence[str] = (),
        eq: Sequence[str] = (),
    ) -> "Problem":
        if not variables:
            raise ValueError("a problem needs at least one variable")
        b = DagBuilder([v[0] for v in variables])
        obj = b.add_root(objective)
        g = tuple(b.add_root(t) for t in ineq)
        h = tuple(b.add_root(t) for t in eq)
        dag = b.build()
        k = len(g)
        roots = dag.roots
        box = Box(Interval(float(lo), float(hi)) for _, lo, hi in variables)
        return cls(name, dag, roots[0], tuple(roots[1 : 1 + k]), tuple(roots[1 + k :]), box)

    def to_text(self) -> str:
        lines = [f"name {self.name}", "vars"]
        for name, d in zip(self.var_names, self.box):
            lines.append(f"{name} {d.lo!r} {d.hi!r}")
        lines += ["objective", self.dag.to_text(self.objective)]
        if self.ineq:
            lines.append("ineq")
            lines += [self.dag.to_text(r) for r in self.ineq]
        if self.eq:
            lines.append("eq")
            lines += [self.dag.to_text(r) for r in self.eq]
        return "\n".join(lines) + "\n"


class ProblemFileError(ValueError):
    pass


def parse_problem(text: str, default_name: str = "problem") -> Problem:
    name = default_name
    section = None
    variables: list[tuple[str, float, float]] = []
    exprs: dict[str, list[tuple[int, str]]] = {"objective": [], "ineq": [], "eq": []}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()
        if head[0] == "name" and section is None:
            if len(head) != 2:
                raise ProblemFileError(f"line {lineno}: expected 'name <identifier>'")
            name = head[1]
            continue
        if line in SECTIONS:
            section = line
            continue
        if section is None:
            raise ProblemFileError(f"line {lineno}: content before any section header")
        if section == "vars":
            if len(head) != 3:
                raise ProblemFileError(f"line {lineno}: expected '<name> <lo> <hi>'")
            try:
                lo, hi = float(head[1]), float(head[2])
            except ValueError:
                raise ProblemFileError(f"line {lineno}: bounds must be numbers") from None
            if not lo <= hi:
                raise ProblemFileError(f"line {lineno}: lower bound exceeds upper bound")
            variables.append((head[0], lo, hi))
        else:
            exprs[section].append((lineno, line))
    if not variables:
        raise ProblemFileError("no variables declared")
    if len(exprs["objective"]) != 1:
        raise ProblemFileError("exactly one objective expression is required")

    b = DagBuilder([v[0] for v in variables])
    roots: dict[str, list[int]] = {"objective": [], "ineq": [], "eq": []}
    for sec in ("objective", "ineq", "eq"):
        for lineno, t in exprs[sec]:
            try:
                roots[sec].append(b.add_root(t))
            except ParseError as exc:
                raise ProblemFileError(f"line {lineno}: {exc}") from None
    dag = b.build()
    k = len(roots["ineq"])
    r = dag.roots
    box = Box(Interval(lo, hi) for _, lo, hi in variables)
    return Problem(name, dag, r[0], tuple(r[1 : 1 + k]), tuple(r[1 + k :]), box)


def load_problem(path_or_name: str | Path) -> Problem:
    """Read a problem file, or a built-in problem by name."""
    p = Path(path_or_name)
    if p.exists():
        return parse_problem(p.read_text(), default_name=p.stem)
    name = str(path_or_name)
    if name in BUILTIN_NAMES:
        return builtin(name)
    raise FileNotFoundError(f"no problem file or built-in problem named {name!r}")


BUILTIN_NAMES = ("sixhump", "ursem_waves", "example2", "example3", "disk_bilinear")


def builtin(name: str) -> Problem:
    if name not in BUILTIN_NAMES:
        raise KeyError(name)
    text = resources.files("mcrelax.data").joinpath(f"{name}.prob").read_text()
    return parse_problem(text, default_name=name)


def builtin_suite() -> list[Problem]:
    return [builtin(n) for n in BUILTIN_NAMES]
