"""McCormick relaxations with subgradient propagation over an expression DAG.

Every factor carries a :class:`McValue`: convex and concave relaxation values
at the evaluation point, their subgradients, and an enclosure of the factor's
range. Values are pushed through the DAG in schedule order using the sum,
bilinear-product and univariate-composition rules; after each factor the
relaxations are cut against the range bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import interval as ia
from .envelopes import envelope
from .expr import Dag, Op
from .interval import Box, DomainError, Interval, taylor2_extension


class McValue:
    __slots__ = ("cv", "cc", "lo", "hi", "sub_cv", "sub_cc")

    def __init__(self, cv: float, cc: float, lo: float, hi: float, sub_cv: np.ndarray, sub_cc: np.ndarray):
        self.cv = cv
        self.cc = cc
        self.lo = lo
        self.hi = hi
        self.sub_cv = sub_cv
        self.sub_cc = sub_cc

    @property
    def interval(self) -> Interval:
        return Interval(self.lo, self.hi)

    def affine_cv(self, point: Sequence[float], z: Sequence[float]) -> float:
        return self.cv + float(np.dot(self.sub_cv, np.asarray(z, float) - np.asarray(point, float)))

    def affine_cc(self, point: Sequence[float], z: Sequence[float]) -> float:
        return self.cc + float(np.dot(self.sub_cc, np.asarray(z, float) - np.asarray(point, float)))

    def with_bounds(self, lo: float, hi: float) -> "McValue":
        out = McValue(self.cv, self.cc, lo, hi, self.sub_cv, self.sub_cc)
        out.cut()
        return out

    def cut(self) -> None:
        if self.cv < self.lo:
            self.cv = self.lo
            self.sub_cv = np.zeros_like(self.sub_cv)
        if self.cc > self.hi:
            self.cc = self.hi
            self.sub_cc = np.zeros_like(self.sub_cc)

    def __repr__(self) -> str:
        return (
            f"McValue(cv={self.cv:.6g}, cc={self.cc:.6g}, lo={self.lo:.6g}, hi={self.hi:.6g}, "
            f"sub_cv={self.sub_cv}, sub_cc={self.sub_cc})"
        )


@dataclass
class PropagationContext:
    box: Box
    point: Sequence[float]
    stored_bounds: Sequence[Interval | None] | None = None
    interval_mode: str = "natural"  # or "taylor2"
    inflation: float = 0.0

    def __post_init__(self):
        if len(self.point) != len(self.box):
            raise ValueError("point and box dimensions differ")
        if not self.box.contains(self.point, tol=1e-12):
            raise ValueError(f"point {list(self.point)} outside {self.box}")
        if self.interval_mode not in ("natural", "taylor2"):
            raise ValueError(f"unknown interval mode {self.interval_mode!r}")


# --- elementary rules -------------------------------------------------------


def mc_var(i: int, ctx: PropagationContext) -> McValue:
    n = len(ctx.box)
    e = np.zeros(n)
    e[i] = 1.0
    x = float(ctx.point[i])
    return McValue(x, x, ctx.box[i].lo, ctx.box[i].hi, e, e.copy())


def mc_const(c: float, n: int) -> McValue:
    z = np.zeros(n)
    return McValue(c, c, c, c, z, z.copy())


def mc_add(a: McValue, b: McValue) -> McValue:
    iv = ia.iadd(a.interval, b.interval)
    return McValue(a.cv + b.cv, a.cc + b.cc, iv.lo, iv.hi, a.sub_cv + b.sub_cv, a.sub_cc + b.sub_cc)


def mc_sub(a: McValue, b: McValue) -> McValue:
    iv = ia.isub(a.interval, b.interval)
    return McValue(a.cv - b.cc, a.cc - b.cv, iv.lo, iv.hi, a.sub_cv - b.sub_cc, a.sub_cc - b.sub_cv)


def mc_neg(a: McValue) -> McValue:
    return McValue(-a.cc, -a.cv, -a.hi, -a.lo, -a.sub_cc, -a.sub_cv)


def _under(k: float, m: McValue):
    # convex underestimator of k * m
    return (k * m.cv, k * m.sub_cv) if k >= 0.0 else (k * m.cc, k * m.sub_cc)


def _over(k: float, m: McValue):
    return (k * m.cc, k * m.sub_cc) if k >= 0.0 else (k * m.cv, k * m.sub_cv)


def mc_mul(a: McValue, b: McValue) -> McValue:
    """Bilinear McCormick rule with subgradients of the active combination."""
    xl, xu, yl, yu = a.lo, a.hi, b.lo, b.hi
    iv = ia.imul(a.interval, b.interval)

    p1, s1 = _under(yl, a)
    p2, s2 = _under(xl, b)
    alpha1 = p1 + p2 - xl * yl
    p3, s3 = _under(yu, a)
    p4, s4 = _under(xu, b)
    alpha2 = p3 + p4 - xu * yu
    if alpha1 >= alpha2:
        cv, sub_cv = alpha1, s1 + s2
    else:
        cv, sub_cv = alpha2, s3 + s4

    q1, t1 = _over(yl, a)
    q2, t2 = _over(xu, b)
    beta1 = q1 + q2 - xu * yl
    q3, t3 = _over(yu, a)
    q4, t4 = _over(xl, b)
    beta2 = q3 + q4 - xl * yu
    if beta1 <= beta2:
        cc, sub_cc = beta1, t1 + t2
    else:
        cc, sub_cc = beta2, t3 + t4
    return McValue(cv, cc, iv.lo, iv.hi, sub_cv, sub_cc)


def mc_univariate(op: Op, a: McValue, param: int | None = None) -> McValue:
    """Composition rule: envelope of the intrinsic evaluated at mid(cv, cc, argmin)."""
    iv = _interval_op(op, a.interval, param)
    env = envelope(op, a.lo, a.hi, param)
    lo_in, hi_in = (a.cv, a.cc) if a.cv <= a.cc else (a.cc, a.cv)

    if env.xmin < lo_in:
        v, s = env.cv(lo_in)
        cv, sub_cv = v, s * a.sub_cv
    elif env.xmin > hi_in:
        v, s = env.cv(hi_in)
        cv, sub_cv = v, s * a.sub_cc
    else:
        cv, _ = env.cv(env.xmin)
        sub_cv = np.zeros_like(a.sub_cv)

    if env.xmax < lo_in:
        v, s = env.cc(lo_in)
        cc, sub_cc = v, s * a.sub_cv
    elif env.xmax > hi_in:
        v, s = env.cc(hi_in)
        cc, sub_cc = v, s * a.sub_cc
    else:
        cc, _ = env.cc(env.xmax)
        sub_cc = np.zeros_like(a.sub_cc)
    return McValue(cv, cc, iv.lo, iv.hi, sub_cv, sub_cc)


def mc_div(a: McValue, b: McValue) -> McValue:
    return mc_mul(a, mc_univariate(Op.POW, b, -1))


_INTERVAL_UNARY: dict[Op, Callable[[Interval], Interval]] = {
    Op.EXP: ia.iexp,
    Op.LOG: ia.ilog,
    Op.SQRT: ia.isqrt,
    Op.SQR: ia.isqr,
    Op.XLOG: ia.ixlog,
    Op.SIN: ia.isin,
    Op.COS: ia.icos,
}


def _interval_op(op: Op, x: Interval, param) -> Interval:
    if op is Op.POW:
        return ia.ipow_int(x, int(param))
    return _INTERVAL_UNARY[op](x)


# --- DAG propagation --------------------------------------------------------


def eval_node(dag: Dag, j: int, vals: Sequence[McValue], ctx: PropagationContext) -> McValue:
    """McValue of factor ``j`` from its children, before any override or cut."""
    node = dag.nodes[j]
    op = node.op
    try:
        if op is Op.VAR:
            return mc_var(node.param, ctx)
        if op is Op.CONST:
            return mc_const(node.param, len(ctx.box))
        a = vals[node.children[0]]
        if op is Op.ADD:
            return mc_add(a, vals[node.children[1]])
        if op is Op.SUB:
            return mc_sub(a, vals[node.children[1]])
        if op is Op.MUL:
            return mc_mul(a, vals[node.children[1]])
        if op is Op.DIV:
            return mc_div(a, vals[node.children[1]])
        if op is Op.NEG:
            return mc_neg(a)
        return mc_univariate(op, a, node.param)
    except DomainError as exc:
        raise DomainError(str(exc), j) from None


def node_interval(dag: Dag, j: int, mc: McValue, ctx: PropagationContext) -> tuple[Interval, str]:
    """Range enclosure for factor ``j`` under the context's interval mode."""
    iv = mc.interval
    source = "natural"
    node = dag.nodes[j]
    if ctx.interval_mode == "taylor2" and node.op not in (Op.VAR, Op.CONST):
        dep = dag.node_vars[j]
        if len(dep) == 1:
            (var,) = dep
            t = taylor2_extension(lambda jet: dag.jet(j, var, jet.v), ctx.box[var], natural=iv)
            both = iv.intersect(t)
            if both is not None and (both.lo > iv.lo or both.hi < iv.hi):
                iv, source = both, "taylor"
    if ctx.inflation > 0.0:
        iv = ia.inflate(iv, ctx.inflation)
    return iv, source


def propagate(dag: Dag, ctx: PropagationContext, upto: int | None = None) -> list[McValue]:
    """McValue for every factor in schedule order (through ``upto`` inclusive).

    Stored bounds replace a factor's computed range before the cut step and
    before any parent consumes it.
    """
    last = len(dag.nodes) - 1 if upto is None else upto
    vals: list[McValue] = []
    stored = ctx.stored_bounds
    for j in range(last + 1):
        mc = eval_node(dag, j, vals, ctx)
        if stored is not None and j < len(stored) and stored[j] is not None:
            iv = stored[j]
        else:
            iv, _ = node_interval(dag, j, mc, ctx)
        mc.lo, mc.hi = iv.lo, iv.hi
        mc.cut()
        vals.append(mc)
    return vals
