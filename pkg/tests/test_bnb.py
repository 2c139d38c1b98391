import math

import numpy as np
import pytest

from helpers import grid_points
from mcrelax import Box, builtin, builtin_suite
from mcrelax.bnb import BnbNode, SolverConfig, convergence_ratio, lower_bound, obbt, relax, solve, upper_bound
from mcrelax.problem import Problem
from mcrelax.tighten import TightenConfig

SIX_MIN = -1.0316284534898774
SIX_ARGMIN = [(0.0898420131, -0.7126564030), (-0.0898420131, 0.7126564030)]


def grid_min(problem, total=250_000):
    pts = grid_points(problem.box, total)
    fn = problem.dag.compile([problem.objective, *problem.ineq], backend="numpy")
    vals = fn([pts[:, i] for i in range(problem.n)])
    obj = np.array(vals[0], float)
    for g in vals[1:]:
        obj[np.asarray(g) > 0] = np.inf
    return float(obj.min())


def root(problem):
    return BnbNode(-math.inf, 0, problem.box, 0)


class TestUpperBound:
    def test_sixhump(self):
        p = builtin("sixhump")
        value, point = upper_bound(root(p), p, SolverConfig())
        assert value <= -1.0316
        assert min(math.dist(point, m) for m in SIX_ARGMIN) < 1e-3

    def test_linear_corner(self):
        p = Problem.from_strings("lin", [("x", -1, 2), ("y", 0, 3)], "2*x - y")
        value, point = upper_bound(root(p), p, SolverConfig())
        assert abs(value - -5.0) < 1e-9 and np.allclose(point, [-1, 3])

    def test_infeasible(self):
        p = Problem.from_strings("inf", [("x", 0, 1)], "x", ineq=["1.5 - x"])
        assert upper_bound(root(p), p, SolverConfig()) is None


class TestLowerBound:
    def test_linear_is_exact(self):
        p = Problem.from_strings("lin", [("x", -1, 2), ("y", 0, 3)], "2*x - y + 1")
        lb, sol, _ = lower_bound(root(p), p, SolverConfig())
        assert abs(lb - -4.0) < 1e-12
        r = solve(p)
        assert r.iterations == 1 and r.status == "converged"

    def test_infeasible_linearization(self):
        p = Problem.from_strings("inf", [("x", 0, 1), ("y", 0, 1)], "x", ineq=["x + y - 3 + 2", "1.5 - x - y"])
        lb, _, _ = lower_bound(root(p), p, SolverConfig())
        assert lb == math.inf
        assert solve(p).status == "infeasible"

    def test_heuristic_raises_the_bound(self):
        p = builtin("example2")
        off, _, _ = lower_bound(root(p), p, SolverConfig())
        on, _, _ = lower_bound(root(p), p, SolverConfig(heuristic=TightenConfig(1)))
        assert on > off

    @pytest.mark.parametrize("problem", builtin_suite(), ids=lambda p: p.name)
    def test_valid_on_sub_boxes(self, problem):
        rng = np.random.default_rng(0)
        fmin_full = grid_min(problem, 40_000)
        for _ in range(10):
            dims = []
            for d in problem.box:
                a, b = np.sort(rng.uniform(d.lo, d.hi, 2))
                dims.append((a, b))
            box = Box(dims)
            sub = Problem(problem.name, problem.dag, problem.objective, problem.ineq, problem.eq, box)
            for cfg in (SolverConfig(), SolverConfig(heuristic=TightenConfig(3))):
                lb, _, _ = lower_bound(BnbNode(-math.inf, 0, box), problem, cfg)
                m = grid_min(sub, 2_500)
                assert lb <= m + 1e-9
        assert fmin_full > -math.inf


class TestObbt:
    def _rel(self, p, ub=math.inf):
        rel = relax(p, p.box, SolverConfig())
        return obbt(root(p), p, SolverConfig(), rel, ub)

    def test_non_binding(self):
        p = Problem.from_strings("nb", [("x", 0, 1), ("y", 0, 1)], "x + y", ineq=["x + y - 5"])
        assert self._rel(p) == p.box

    def test_active_row_without_cut(self):
        p = Problem.from_strings("row", [("x", 0, 1), ("y", 0, 1)], "x", ineq=["x + y - 1"])
        out = self._rel(p)
        assert abs(out[0].hi - 1.0) < 1e-8 and abs(out[0].lo) < 1e-8

    def test_shrinks_and_keeps_good_points(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a, b, c = rng.uniform(-1, 1, 3)
            p = Problem.from_strings(
                "rand",
                [("x", -2, 2), ("y", -2, 2)],
                f"{a:.3f}*x*y + {b:.3f}*x^2 + y",
                ineq=[f"x^2 + y^2 - {1 + abs(c):.3f}", f"x - y - {c:.3f}"],
            )
            ub = upper_bound(root(p), p, SolverConfig())
            ub_value = ub[0] + 0.3 if ub else math.inf
            out = self._rel(p, ub_value)
            if out is None:
                assert ub is None
                continue
            assert out.subset_of(p.box)
            pts = grid_points(p.box, 40_000)
            fn = p.dag.compile([p.objective, *p.ineq], backend="numpy")
            f, g1, g2 = fn([pts[:, 0], pts[:, 1]])
            good = (g1 <= 0) & (g2 <= 0) & (f <= ub_value)
            for q in pts[good]:
                assert out.contains(q, 1e-9)


class TestSolve:
    def test_sixhump(self):
        r = solve(builtin("sixhump"))
        assert r.status == "converged"
        assert abs(r.best_value - -1.031628) < 1e-4
        assert r.lower_bound <= r.best_value

    def test_constant_objective(self):
        p = Problem.from_strings("const", [("x", 0, 1)], "3.0")
        r = solve(p)
        assert r.iterations == 1 and r.best_value == 3.0 and r.lower_bound == 3.0

    def test_heuristic_uses_no_more_iterations(self):
        p = builtin("example2")
        off = solve(p, SolverConfig())
        on = solve(p, SolverConfig(heuristic=TightenConfig(1)))
        assert on.iterations <= off.iterations

    def test_equality_constraint(self):
        p = Problem.from_strings("circle", [("x", -2, 2), ("y", -2, 2)], "x + y", eq=["x^2 + y^2 - 1"])
        r = solve(p, SolverConfig(range_reduction="obbt+dual"))
        assert r.status == "converged" and abs(r.best_value - -math.sqrt(2)) < 1e-4

    @pytest.mark.parametrize("problem", builtin_suite(), ids=lambda p: p.name)
    @pytest.mark.parametrize(
        "cfg",
        [
            SolverConfig(),
            SolverConfig(heuristic=TightenConfig(2), range_reduction="obbt+dual"),
            SolverConfig(linearization_point="incumbent", heuristic=TightenConfig(1)),
            SolverConfig(interval_mode="taylor2", heuristic=TightenConfig(1)),
        ],
        ids=["mc", "heur2-rr", "incumbent", "taylor2"],
    )
    def test_soundness_and_monotone_lower_bound(self, problem, cfg):
        # the grid minimum is an upper bound on the true minimum
        fgrid = grid_min(problem)
        r = solve(problem, cfg)
        assert r.status == "converged"
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(r.best_value))
        assert r.best_value <= fgrid + 1e-9
        assert r.best_value - r.lower_bound <= tol
        lbs = [h[1] for h in r.history]
        assert all(b >= a - 1e-12 for a, b in zip(lbs, lbs[1:]))
        assert all(lb <= fgrid + 1e-9 for _, lb, _ in r.history)
        # the incumbent is a genuine feasible point with the reported value
        vals = problem.dag.eval_real(r.best_point)
        assert vals[problem.objective] == r.best_value
        assert all(vals[g] <= cfg.feas_tol for g in problem.ineq)

    def test_deterministic(self):
        p = builtin("disk_bilinear")
        cfg = SolverConfig(heuristic=TightenConfig(1), range_reduction="obbt+dual", seed=42)
        a, b = solve(p, cfg), solve(p, cfg)
        for field in ("status", "best_value", "best_point", "lower_bound", "iterations", "history", "stats"):
            assert getattr(a, field) == getattr(b, field)

    def test_time_limit(self):
        r = solve(builtin("sixhump"), SolverConfig(time_limit=0.05))
        assert r.status == "time_limit"
        assert 0.0 <= r.convergence_ratio <= 100.0
        assert "convergence" in r.summary()

    def test_iteration_limit(self):
        r = solve(builtin("sixhump"), SolverConfig(max_iterations=5))
        assert r.status == "iteration_limit" and r.iterations == 5


def test_convergence_ratio():
    assert convergence_ratio(1.0, 0.0, -1.0) == 50.0
    assert convergence_ratio(1.0, 1.0, -1.0) == 100.0
    assert math.isnan(convergence_ratio(math.inf, 0.0, -1.0))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(abs_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(range_reduction="probing")
    with pytest.raises(ValueError):
        SolverConfig(linearization_point="random")
    assert SolverConfig(heuristic=TightenConfig(3)).fingerprint().startswith("heur=N=3")
