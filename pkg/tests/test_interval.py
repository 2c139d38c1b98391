import math

import numpy as np
import pytest

from mcrelax.expr import parse
from mcrelax.interval import (
    Box,
    DomainError,
    Interval,
    iadd,
    icos,
    idiv,
    iexp,
    ilog,
    imul,
    inflate,
    ineg,
    ipow_int,
    isin,
    isqr,
    isqrt,
    isub,
    ixlog,
    taylor2_extension,
    xlog,
)

Z = Interval(-0.5, 1.0)


def close(iv, lo, hi, tol=1e-12):
    return abs(iv.lo - lo) <= tol and abs(iv.hi - hi) <= tol


class TestInterval:
    def test_rejects_reversed_and_nan(self):
        with pytest.raises(ValueError):
            Interval(1.0, 0.0)
        with pytest.raises(ValueError):
            Interval(float("nan"), 1.0)

    def test_basic_properties(self):
        assert Z.mid == 0.25
        assert Z.width == 1.5
        assert Z.contains(0.0) and not Z.contains(1.1)
        assert Z.contains_zero()
        assert Interval(0, 1).subset_of(Z)
        assert Z.intersect(Interval(2, 3)) is None
        assert Z.intersect(Interval(0.5, 3)) == Interval(0.5, 1.0)
        lo, hi = Z
        assert (lo, hi) == (-0.5, 1.0)

    def test_operators_lift_floats(self):
        assert Z + 1 == Interval(0.5, 2.0)
        assert 1 - Z == Interval(0.0, 1.5)
        assert 2 * Z == Interval(-1.0, 2.0)
        assert -Z == Interval(-1.0, 0.5)

    def test_inflate(self):
        assert inflate(Z, 0.0) is Z
        w = inflate(Z, 1e-3)
        assert w.lo < Z.lo and w.hi > Z.hi


class TestArithmetic:
    def test_mul_endpoint_products(self):
        r = imul(Interval(-1.5, 1.0), Interval(-2.843, 0.393))
        assert close(r, -2.843, 4.2645)

    def test_add_zero_identity(self):
        assert iadd(Z, Interval(0.0, 0.0)) == Z

    def test_natural_extension_of_z_minus_z_squared(self):
        assert isub(Z, isqr(Z)) == Interval(-1.5, 1.0)

    def test_neg(self):
        assert ineg(Z) == Interval(-1.0, 0.5)

    def test_div_rejects_zero(self):
        with pytest.raises(DomainError):
            idiv(Z, Interval(-1.0, 1.0))
        assert close(idiv(Interval(1, 2), Interval(2, 4)), 0.25, 1.0)


class TestIntrinsics:
    def test_examples(self):
        assert ipow_int(Z, 3) == Interval(-0.125, 1.0)
        assert isqr(Z) == Interval(0.0, 1.0)
        assert iexp(Z) == Interval(math.exp(-0.5), math.exp(1.0))
        assert ipow_int(Z, 0) == Interval(1.0, 1.0)
        assert ipow_int(Z, 1) == Z
        assert ipow_int(Interval(-2, 1), 4) == Interval(0.0, 16.0)
        assert ipow_int(Interval(-2, -1), 2) == Interval(1.0, 4.0)
        assert close(ipow_int(Interval(1, 2), -2), 0.25, 1.0)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            ilog(Interval(0.0, 1.0))
        with pytest.raises(DomainError):
            isqrt(Interval(-0.1, 1.0))
        with pytest.raises(DomainError):
            ixlog(Interval(-0.1, 1.0))
        with pytest.raises(DomainError):
            ipow_int(Z, -1)

    def test_xlog_interior_minimum(self):
        r = ixlog(Interval(0.0, 1.0))
        assert close(r, -1.0 / math.e, 0.0)
        assert xlog(0.0) == 0.0

    def test_trig_extrema(self):
        assert isin(Interval(0.0, math.pi)).hi == 1.0
        assert icos(Interval(-1.0, 1.0)).hi == 1.0
        assert icos(Interval(3.0, 3.3)).lo == -1.0
        assert isin(Interval(0.0, 7.0)) == Interval(-1.0, 1.0)

    @pytest.mark.parametrize(
        "fi, f, dom",
        [
            (iexp, math.exp, (-3, 3)),
            (ilog, math.log, (0.01, 5)),
            (isqrt, math.sqrt, (0, 5)),
            (isqr, lambda x: x * x, (-3, 3)),
            (lambda x: ipow_int(x, 3), lambda x: x**3, (-3, 3)),
            (lambda x: ipow_int(x, 4), lambda x: x**4, (-3, 3)),
            (lambda x: ipow_int(x, -3), lambda x: x**-3, (0.2, 3)),
            (ixlog, xlog, (0, 3)),
            (isin, math.sin, (-8, 8)),
            (icos, math.cos, (-8, 8)),
        ],
    )
    def test_range_soundness_and_isotonicity(self, fi, f, dom):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a, b = np.sort(rng.uniform(*dom, 2))
            x = Interval(a, b)
            r = fi(x)
            zs = rng.uniform(a, b, 50)
            assert all(r.contains(f(z), 1e-12) for z in zs)
            c, d = np.sort(rng.uniform(a, b, 2))
            assert fi(Interval(c, d)).subset_of(r, 1e-12)

    def test_monotone_intrinsics_are_exact(self):
        x = Interval(0.3, 2.2)
        for fi, f in [(iexp, math.exp), (ilog, math.log), (isqrt, math.sqrt)]:
            r = fi(x)
            assert abs(r.lo - f(x.lo)) <= 1e-12 and abs(r.hi - f(x.hi)) <= 1e-12


def test_binary_isotonicity():
    rng = np.random.default_rng(3)
    for _ in range(500):
        x = Interval(*np.sort(rng.uniform(-3, 3, 2)))
        y = Interval(*np.sort(rng.uniform(-3, 3, 2)))
        xs = Interval(*np.sort(rng.uniform(x.lo, x.hi, 2)))
        ys = Interval(*np.sort(rng.uniform(y.lo, y.hi, 2)))
        for op in (iadd, isub, imul):
            assert op(xs, ys).subset_of(op(x, y), 1e-12)
        zx, zy = rng.uniform(x.lo, x.hi), rng.uniform(y.lo, y.hi)
        assert imul(x, y).contains(zx * zy, 1e-12)


class TestTaylor:
    def _ext(self, text, x=Z):
        dag = parse(text, ["z"])
        return taylor2_extension(lambda jet: dag.jet(dag.roots[0], 0, jet.v), x)

    def test_example_three_factors(self):
        r9 = self._ext("log(z+1) - z^2")
        assert abs(r9.lo - -1.751) <= 1e-3 and abs(r9.hi - 0.385) <= 1e-3
        r10 = self._ext("log(z+1) - exp(z-0.5)")
        assert abs(r10.lo - -2.16) <= 1e-3 and abs(r10.hi - -0.539) <= 1e-3

    def test_constant(self):
        dag = parse("3.5", ["z"])
        r = taylor2_extension(lambda jet: dag.jet(dag.roots[0], 0, jet.v), Z)
        assert r == Interval(3.5, 3.5)

    def test_domain_failure_falls_back(self):
        dag = parse("log(z)", ["z"])
        nat = Interval(-1.0, 1.0)
        r = taylor2_extension(lambda jet: dag.jet(dag.roots[0], 0, jet.v), Interval(0.0, 1.0), natural=nat)
        assert r is nat

    @pytest.mark.parametrize(
        "text, dom",
        [
            ("log(z+1) - z^2", (-0.5, 1)),
            ("exp(z) - z^3", (-1, 1)),
            ("sqrt(z) * xlog(z)", (0.1, 3)),
            ("sin(3*z) + cos(z)^2", (-2, 2)),
            ("1/(z^2+1)", (-2, 2)),
        ],
    )
    def test_soundness(self, text, dom):
        dag = parse(text, ["z"])
        rng = np.random.default_rng(11)
        for _ in range(100):
            x = Interval(*np.sort(rng.uniform(*dom, 2)))
            r = taylor2_extension(lambda jet: dag.jet(dag.roots[0], 0, jet.v), x)
            for z in rng.uniform(x.lo, x.hi, 100):
                assert r.contains(dag.evaluate([z]), 1e-10)


class TestBox:
    def test_construction_and_views(self):
        b = Box([(-3, 3), Interval(-2, 2)])
        assert len(b) == 2
        assert b.lo == [-3.0, -2.0] and b.hi == [3.0, 2.0]
        assert b.midpoint == [0.0, 0.0]
        assert b.widths == [6.0, 4.0]
        assert b.contains([0, 0]) and not b.contains([4, 0])
        assert b.clip([5, -5]) == [3.0, -2.0]
        assert Box.from_bounds([0, 0], [1, 1]).subset_of(b)

    def test_bisect(self):
        left, right = Box([(-3, 3), (-2, 2)]).bisect(0)
        assert left[0] == Interval(-3, 0) and right[0] == Interval(0, 3)
        assert left[1] == right[1] == Interval(-2, 2)

    def test_empty_box_rejected(self):
        with pytest.raises(ValueError):
            Box([])
