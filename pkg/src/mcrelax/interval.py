"""Closed-interval arithmetic.

Natural interval extensions of the arithmetic operations and intrinsics used
by the expression language, plus a second-order Taylor-form enclosure for
univariate composites. Plain floating point is used throughout; there is no
directed rounding. ``inflate`` widens an interval by a relative/absolute
epsilon for robustness experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

Number = Union[int, float]

INV_E = math.exp(-1.0)
TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """An operation was applied outside the domain of its intrinsic."""

    def __init__(self, message: str, factor: int | None = None):
        self.factor = factor
        if factor is not None:
            message = f"{message} (factor {factor})"
        super().__init__(message)


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def subset_of(self, other: "Interval", tol: float = 0.0) -> bool:
        return other.lo - tol <= self.lo and self.hi <= other.hi + tol

    def intersect(self, other: "Interval") -> "Interval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self) -> str:
        return f"[{self.lo:.10g}, {self.hi:.10g}]"

    # operator sugar; floats are promoted to degenerate intervals
    def __add__(self, other):
        return iadd(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return isub(self, _lift(other))

    def __rsub__(self, other):
        return isub(_lift(other), self)

    def __mul__(self, other):
        return imul(self, _lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return idiv(self, _lift(other))

    def __rtruediv__(self, other):
        return idiv(_lift(other), self)

    def __neg__(self):
        return ineg(self)


def _lift(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(float(x), float(x))


def inflate(x: Interval, eps: float) -> Interval:
    if eps <= 0.0:
        return x
    pad = eps * max(1.0, abs(x.lo), abs(x.hi))
    return Interval(x.lo - pad, x.hi + pad)


def hull(values: Iterable[float]) -> Interval:
    vals = list(values)
    return Interval(min(vals), max(vals))


# --- arithmetic -------------------------------------------------------------


def iadd(x: Interval, y: Interval) -> Interval:
    return Interval(x.lo + y.lo, x.hi + y.hi)


def isub(x: Interval, y: Interval) -> Interval:
    return Interval(x.lo - y.hi, x.hi - y.lo)


def ineg(x: Interval) -> Interval:
    return Interval(-x.hi, -x.lo)


def imul(x: Interval, y: Interval) -> Interval:
    if x.lo == x.hi == 0.0 or y.lo == y.hi == 0.0:
        return Interval(0.0, 0.0)
    p = (x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi)
    return Interval(min(p), max(p))


def irecip(x: Interval) -> Interval:
    if x.contains_zero():
        raise DomainError(f"division by interval {x} containing zero")
    return Interval(1.0 / x.hi, 1.0 / x.lo)


def idiv(x: Interval, y: Interval) -> Interval:
    return imul(x, irecip(y))


# --- intrinsics -------------------------------------------------------------


def iexp(x: Interval) -> Interval:
    return Interval(math.exp(x.lo), math.exp(x.hi))


def ilog(x: Interval) -> Interval:
    if x.lo <= 0.0:
        raise DomainError(f"log of interval {x} with non-positive values")
    return Interval(math.log(x.lo), math.log(x.hi))


def isqrt(x: Interval) -> Interval:
    if x.lo < 0.0:
        raise DomainError(f"sqrt of interval {x} with negative values")
    return Interval(math.sqrt(x.lo), math.sqrt(x.hi))


def isqr(x: Interval) -> Interval:
    a, b = x.lo * x.lo, x.hi * x.hi
    if x.lo >= 0.0:
        return Interval(a, b)
    if x.hi <= 0.0:
        return Interval(b, a)
    return Interval(0.0, max(a, b))


def ipow_int(x: Interval, k: int) -> Interval:
    if k == 0:
        return Interval(1.0, 1.0)
    if k == 1:
        return x
    if k < 0:
        if x.contains_zero():
            raise DomainError(f"negative power of interval {x} containing zero")
        return irecip(ipow_int(x, -k))
    if k == 2:
        return isqr(x)
    a, b = x.lo**k, x.hi**k
    if k % 2 == 1:
        return Interval(a, b)
    if x.lo >= 0.0:
        return Interval(a, b)
    if x.hi <= 0.0:
        return Interval(b, a)
    return Interval(0.0, max(a, b))


def xlog(x: float) -> float:
    if x < 0.0:
        raise DomainError(f"xlog of negative value {x}")
    return 0.0 if x == 0.0 else x * math.log(x)


def ixlog(x: Interval) -> Interval:
    if x.lo < 0.0:
        raise DomainError(f"xlog of interval {x} with negative values")
    a, b = xlog(x.lo), xlog(x.hi)
    lo = -INV_E if x.lo < INV_E < x.hi else min(a, b)
    return Interval(lo, max(a, b))


def _crosses(x: Interval, phase: float) -> bool:
    # any point phase + 2k*pi inside x
    k = math.ceil((x.lo - phase) / TWO_PI)
    return phase + k * TWO_PI <= x.hi


def isin(x: Interval) -> Interval:
    if x.width >= TWO_PI:
        return Interval(-1.0, 1.0)
    a, b = math.sin(x.lo), math.sin(x.hi)
    lo = -1.0 if _crosses(x, -0.5 * math.pi) else min(a, b)
    hi = 1.0 if _crosses(x, 0.5 * math.pi) else max(a, b)
    return Interval(lo, hi)


def icos(x: Interval) -> Interval:
    if x.width >= TWO_PI:
        return Interval(-1.0, 1.0)
    a, b = math.cos(x.lo), math.cos(x.hi)
    lo = -1.0 if _crosses(x, math.pi) else min(a, b)
    hi = 1.0 if _crosses(x, 0.0) else max(a, b)
    return Interval(lo, hi)


# --- boxes ------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    dims: tuple[Interval, ...]

    def __init__(self, dims: Iterable[Interval | Sequence[float]]):
        ivs = tuple(d if isinstance(d, Interval) else Interval(float(d[0]), float(d[1])) for d in dims)
        if not ivs:
            raise ValueError("box must have at least one dimension")
        object.__setattr__(self, "dims", ivs)

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "Box":
        return cls(Interval(float(a), float(b)) for a, b in zip(lo, hi))

    def __len__(self) -> int:
        return len(self.dims)

    def __getitem__(self, i: int) -> Interval:
        return self.dims[i]

    def __iter__(self):
        return iter(self.dims)

    @property
    def lo(self) -> list[float]:
        return [d.lo for d in self.dims]

    @property
    def hi(self) -> list[float]:
        return [d.hi for d in self.dims]

    @property
    def midpoint(self) -> list[float]:
        return [d.mid for d in self.dims]

    @property
    def widths(self) -> list[float]:
        return [d.width for d in self.dims]

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(d.contains(p, tol) for d, p in zip(self.dims, point))

    def clip(self, point: Sequence[float]) -> list[float]:
        return [min(max(p, d.lo), d.hi) for d, p in zip(self.dims, point)]

    def replace(self, i: int, iv: Interval) -> "Box":
        dims = list(self.dims)
        dims[i] = iv
        return Box(dims)

    def subset_of(self, other: "Box", tol: float = 0.0) -> bool:
        return all(a.subset_of(b, tol) for a, b in zip(self.dims, other.dims))

    def bisect(self, i: int) -> tuple["Box", "Box"]:
        d = self.dims[i]
        m = d.mid
        return self.replace(i, Interval(d.lo, m)), self.replace(i, Interval(m, d.hi))

    def __repr__(self) -> str:
        return "Box(" + " x ".join(repr(d) for d in self.dims) + ")"


# --- second-order Taylor form ------------------------------------------------


def _fn(name: str, v):
    """Apply an elementary function to a float or an Interval."""
    if isinstance(v, Interval):
        return _INTERVAL_FNS[name](v)
    if name == "recip":
        if v == 0.0:
            raise DomainError("division by zero")
        return 1.0 / v
    if name == "sqr":
        return v * v
    if name == "log" and v <= 0.0:
        raise DomainError(f"log of non-positive value {v}")
    if name == "sqrt" and v < 0.0:
        raise DomainError(f"sqrt of negative value {v}")
    if name == "xlog":
        return xlog(v)
    return getattr(math, name)(v)


_INTERVAL_FNS: dict[str, Callable[[Interval], Interval]] = {
    "exp": iexp,
    "log": ilog,
    "sqrt": isqrt,
    "sqr": isqr,
    "recip": irecip,
    "xlog": ixlog,
    "sin": isin,
    "cos": icos,
}


def _pow(v, k: int):
    if isinstance(v, Interval):
        return ipow_int(v, k)
    if k < 0 and v == 0.0:
        raise DomainError("negative power of zero")
    return v**k


class Jet:
    """Second-order forward-mode jet ``(value, d/dz, d2/dz2)``.

    Components are either all floats or all Intervals; evaluating a factor on
    interval jets yields the natural extension of its derivatives.
    """

    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1, d2):
        self.v, self.d1, self.d2 = v, d1, d2

    @classmethod
    def variable(cls, x) -> "Jet":
        return cls(x, 1.0, 0.0)

    @classmethod
    def const(cls, c: float) -> "Jet":
        return cls(c, 0.0, 0.0)

    def __add__(self, o: "Jet") -> "Jet":
        return Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    def __sub__(self, o: "Jet") -> "Jet":
        return Jet(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)

    def __neg__(self) -> "Jet":
        return Jet(-self.v, -self.d1, -self.d2)

    def __mul__(self, o: "Jet") -> "Jet":
        return Jet(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * (self.d1 * o.d1) + self.v * o.d2,
        )

    def __truediv__(self, o: "Jet") -> "Jet":
        return self * o.powi(-1)

    def _chain(self, f, f1, f2) -> "Jet":
        return Jet(f, f1 * self.d1, f2 * _fn("sqr", self.d1) + f1 * self.d2)

    def powi(self, k: int) -> "Jet":
        if k == 0:
            return Jet.const(1.0)
        if k == 1:
            return self
        f = _pow(self.v, k)
        f1 = k * _pow(self.v, k - 1)
        f2 = (k * (k - 1)) * _pow(self.v, k - 2) if k != 2 else 2.0
        return self._chain(f, f1, f2)

    def apply(self, name: str) -> "Jet":
        u = self.v
        if name == "exp":
            e = _fn("exp", u)
            return self._chain(e, e, e)
        if name == "log":
            r = _fn("recip", u)
            return self._chain(_fn("log", u), r, -_fn("sqr", r))
        if name == "sqrt":
            s = _fn("sqrt", u)
            r = _fn("recip", s)
            return self._chain(s, 0.5 * r, -0.25 * (r * _fn("recip", u)))
        if name == "sqr":
            return self.powi(2)
        if name == "xlog":
            return self._chain(_fn("xlog", u), _fn("log", u) + 1.0, _fn("recip", u))
        if name == "sin":
            s = _fn("sin", u)
            return self._chain(s, _fn("cos", u), -s)
        if name == "cos":
            c = _fn("cos", u)
            return self._chain(c, -_fn("sin", u), -c)
        raise ValueError(f"unknown intrinsic {name!r}")


def taylor2_extension(h: Callable[[Jet], Jet], x: Interval, natural: Interval | None = None) -> Interval:
    """Enclose ``h`` over ``x`` by h(c) + h'(c)(X-c) + h''(X)/2 (X-c)^2.

    ``h`` maps a Jet to a Jet; it is called once with a float jet at the
    midpoint ``c`` and once with an interval jet over ``x``. If a derivative
    leaves its domain the natural extension is returned instead (when given).
    """
    c = x.mid
    try:
        at_c = h(Jet.variable(c))
        over_x = h(Jet.variable(x))
    except (DomainError, ZeroDivisionError, OverflowError, ValueError):
        if natural is None:
            raise
        return natural
    d = x - c
    d2 = _lift(over_x.d2)
    return _lift(at_c.v) + _lift(at_c.d1) * d + 0.5 * d2 * isqr(d)
