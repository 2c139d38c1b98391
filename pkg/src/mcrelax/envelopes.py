"""Convex/concave relaxations of the univariate intrinsics on an interval.

Each builder returns an :class:`Envelope` for ``[l, u]``: callables giving the
value and slope of the convex underestimator and concave overestimator, and
the points where those attain their minimum / maximum. These are the exact
envelopes for every intrinsic except sin/cos on intervals where they change
curvature, which use an alphaBB-style quadratic correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from .expr import Op
from .interval import INV_E, DomainError, Interval, icos, isin, xlog

Fn = Callable[[float], tuple[float, float]]


@dataclass(frozen=True, slots=True)
class Envelope:
    cv: Fn
    cc: Fn
    xmin: float
    xmax: float


def _degenerate(l: float, u: float) -> bool:
    return u - l <= 1e-15 * max(1.0, abs(l), abs(u))


def secant(f: Callable[[float], float], df: Callable[[float], float], l: float, u: float) -> Fn:
    fl = f(l)
    if _degenerate(l, u):
        d = df(l)
        return lambda x: (fl, d)
    slope = (f(u) - fl) / (u - l)
    return lambda x: (fl + slope * (x - l), slope)


def _convex(f, df, l, u, xmin) -> Envelope:
    xmax = l if f(l) >= f(u) else u
    return Envelope(lambda x: (f(x), df(x)), secant(f, df, l, u), xmin, xmax)


def _concave(f, df, l, u, xmax) -> Envelope:
    xmin = l if f(l) <= f(u) else u
    return Envelope(secant(f, df, l, u), lambda x: (f(x), df(x)), xmin, xmax)


def _clamp(x: float, l: float, u: float) -> float:
    return min(max(x, l), u)


@lru_cache(maxsize=None)
def _odd_tangent_ratio(k: int) -> float:
    # t in (0,1) with (k-1) t^k + k t^(k-1) = 1; tangent point p = -l * t
    lo, hi = 0.0, 1.0
    for _ in range(200):
        t = 0.5 * (lo + hi)
        if (k - 1) * t**k + k * t ** (k - 1) > 1.0:
            hi = t
        else:
            lo = t
    return 0.5 * (lo + hi)


def _odd_power_mixed(k: int, l: float, u: float) -> Envelope:
    f = lambda x: x**k
    df = lambda x: k * x ** (k - 1)
    t = _odd_tangent_ratio(k)

    p = -l * t
    if p >= u:
        cv = secant(f, df, l, u)
    else:
        left = secant(f, df, l, p)
        cv = lambda x: left(x) if x <= p else (f(x), df(x))

    q = -u * t
    if q <= l:
        cc = secant(f, df, l, u)
    else:
        right = secant(f, df, q, u)
        cc = lambda x: right(x) if x >= q else (f(x), df(x))
    return Envelope(cv, cc, l, u)


def _power(k: int, l: float, u: float) -> Envelope:
    f = lambda x: x**k
    df = lambda x: k * x ** (k - 1)
    if k > 0 and k % 2 == 0:
        return _convex(f, df, l, u, _clamp(0.0, l, u))
    if k > 0:
        if l >= 0.0:
            return _convex(f, df, l, u, l)
        if u <= 0.0:
            return _concave(f, df, l, u, u)
        return _odd_power_mixed(k, l, u)
    if l <= 0.0 <= u:
        raise DomainError(f"x^{k} on [{l}, {u}] containing zero")
    if l > 0.0:
        return _convex(f, df, l, u, u)
    if k % 2 == 0:
        return _convex(f, df, l, u, l)
    return _concave(f, df, l, u, l)


def _bisect_root(g: Callable[[float], float], l: float, u: float) -> float:
    """Root of a nondecreasing ``g`` on [l, u], clamped to the endpoints."""
    if g(l) >= 0.0:
        return l
    if g(u) <= 0.0:
        return u
    for _ in range(100):
        m = 0.5 * (l + u)
        if g(m) > 0.0:
            u = m
        else:
            l = m
        if u - l <= 1e-15 * max(1.0, abs(l)):
            break
    return 0.5 * (l + u)


def _trig(f, df, ddf_range, l: float, u: float) -> Envelope:
    """sin/cos: exact where the curvature is one-signed, alphaBB otherwise."""
    d2 = ddf_range(l, u)
    a = max(0.0, -d2[0]) / 2.0
    b = max(0.0, d2[1]) / 2.0
    if _degenerate(l, u):
        a = b = 0.0
    s = l + u

    if b == 0.0 and a > 0.0:
        cv = secant(f, df, l, u)
        xmin = l if f(l) <= f(u) else u
    else:
        cv = lambda x: (f(x) - a * (x - l) * (u - x), df(x) - a * (s - 2.0 * x))
        xmin = _bisect_root(lambda x: df(x) - a * (s - 2.0 * x), l, u)

    if a == 0.0 and b > 0.0:
        cc = secant(f, df, l, u)
        xmax = l if f(l) >= f(u) else u
    else:
        cc = lambda x: (f(x) + b * (x - l) * (u - x), df(x) + b * (s - 2.0 * x))
        xmax = _bisect_root(lambda x: -(df(x) + b * (s - 2.0 * x)), l, u)
    return Envelope(cv, cc, xmin, xmax)


def _sin_dd(l, u):
    r = isin(Interval(l, u))
    return -r.hi, -r.lo


def _cos_dd(l, u):
    r = icos(Interval(l, u))
    return -r.hi, -r.lo


def envelope(op: Op, l: float, u: float, param: int | None = None) -> Envelope:
    if op is Op.EXP:
        return _convex(math.exp, math.exp, l, u, l)
    if op is Op.LOG:
        if l <= 0.0:
            raise DomainError(f"log on [{l}, {u}]")
        return _concave(math.log, lambda x: 1.0 / x, l, u, u)
    if op is Op.SQRT:
        if l < 0.0:
            raise DomainError(f"sqrt on [{l}, {u}]")
        # slope at 0 is unbounded; cap it so the caller gets a finite number
        return _concave(math.sqrt, lambda x: 0.5 / math.sqrt(x) if x > 0.0 else 1e300, l, u, u)
    if op is Op.SQR:
        return _power(2, l, u)
    if op is Op.POW:
        return _power(int(param), l, u)
    if op is Op.XLOG:
        if l < 0.0:
            raise DomainError(f"xlog on [{l}, {u}]")
        return _convex(xlog, lambda x: math.log(x) + 1.0 if x > 0.0 else -1e300, l, u, _clamp(INV_E, l, u))
    if op is Op.SIN:
        return _trig(math.sin, math.cos, _sin_dd, l, u)
    if op is Op.COS:
        return _trig(math.cos, lambda x: -math.sin(x), _cos_dd, l, u)
    raise ValueError(f"no envelope for {op}")
