"""Best-first branch-and-bound over a box.

Lower bounds come from one LP built from the subgradient-affine
underestimators of the objective and constraints at a single linearization
point, optionally after the range tightening sweep. Upper bounds come from
multistart local search. Range reduction (OBBT with filtering plus reduced
cost tightening) is optional.
"""

from __future__ import annotations

import heapq
import math
import time
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .interval import Box
from .lp import LinearProgram, LpSolution, dual_bound_tighten
from .lp import solve as solve_lp
from .problem import Problem
from .tighten import FactorBounds, TightenConfig, initial_point, tighten_dag

RANGE_REDUCTION = ("none", "obbt+dual")
COEF_LIMIT = 1e10  # affine rows with larger coefficients are dropped (still a relaxation)


@dataclass(frozen=True)
class SolverConfig:
    abs_tol: float = 1e-4
    rel_tol: float = 1e-4
    feas_tol: float = 1e-6
    time_limit: float = 3600.0
    heuristic: TightenConfig = TightenConfig(max_iters=0)
    linearization_point: str = "midpoint"
    range_reduction: str = "none"
    obbt_filtering_factor: float = 0.5
    obbt_max_depth: int = 4
    interval_mode: str = "natural"
    local_starts_root: int = 9
    local_starts_node: int = 1
    max_iterations: int | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.abs_tol, self.rel_tol, self.feas_tol) <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.time_limit <= 0.0:
            raise ValueError("time limit must be positive")
        if self.linearization_point not in ("midpoint", "incumbent"):
            raise ValueError(f"unknown linearization point policy {self.linearization_point!r}")
        if self.range_reduction not in RANGE_REDUCTION:
            raise ValueError(f"unknown range reduction {self.range_reduction!r}")
        if not 0.0 <= self.obbt_filtering_factor <= 1.0:
            raise ValueError("filtering factor must lie in [0, 1]")
        if self.interval_mode not in ("natural", "taylor2"):
            raise ValueError(f"unknown interval mode {self.interval_mode!r}")

    def fingerprint(self) -> str:
        heur = "off" if self.heuristic.max_iters == 0 else f"N={self.heuristic.max_iters}"
        rr = "none" if self.range_reduction == "none" else "full"
        return (
            f"heur={heur};point={self.linearization_point};rr={rr};"
            f"interval={self.interval_mode};seed={self.seed}"
        )


@dataclass(order=True)
class BnbNode:
    lb: float
    id: int
    box: Box = field(compare=False)
    depth: int = field(default=0, compare=False)


@dataclass
class NodeStats:
    fathomed_bound: int = 0
    fathomed_infeasible: int = 0
    branched: int = 0
    tightened_factors: int = 0
    obbt_runs: int = 0
    obbt_lps: int = 0
    rr_shrunk: int = 0
    local_searches: int = 0


@dataclass
class SolveReport:
    problem: str
    status: str  # converged | infeasible | time_limit | iteration_limit
    best_value: float
    best_point: list[float] | None
    lower_bound: float
    iterations: int
    wall_time: float
    convergence_ratio: float
    root_lower_bound: float
    history: list[tuple[int, float, float]]
    stats: NodeStats
    config: str = ""

    def summary(self) -> str:
        pt = "none" if self.best_point is None else "[" + ", ".join(f"{x:.6g}" for x in self.best_point) + "]"
        lines = [
            f"problem      {self.problem}",
            f"status       {self.status}",
            f"best value   {self.best_value:.10g}",
            f"best point   {pt}",
            f"lower bound  {self.lower_bound:.10g}",
            f"iterations   {self.iterations}",
            f"wall time    {self.wall_time * 1e3:.1f} ms",
        ]
        if self.status == "time_limit":
            lines.append(f"convergence  {self.convergence_ratio:.2f}%")
        return "\n".join(lines)


@dataclass
class Relaxation:
    """Linearized node problem: the objective row plus constraint rows."""

    box: Box
    factors: FactorBounds
    c: np.ndarray
    c0: float
    A: np.ndarray
    b: np.ndarray
    interval_lb: float
    infeasible: bool = False

    def lp(self, incumbent_ub: float | None = None) -> LinearProgram:
        A, b = self.A, self.b
        if incumbent_ub is not None and math.isfinite(incumbent_ub) and _usable(self.c):
            A = np.vstack([A, self.c])
            b = np.append(b, incumbent_ub - self.c0)
        return LinearProgram(self.c, self.box.lo, self.box.hi, A, b, self.c0)


def _usable(row: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(row)) and np.max(np.abs(row), initial=0.0) <= COEF_LIMIT)


def linearization_point(box: Box, cfg: SolverConfig, incumbent) -> list[float]:
    return initial_point(box, cfg.linearization_point, incumbent)


def relax(problem: Problem, box: Box, cfg: SolverConfig, incumbent=None) -> Relaxation:
    """Tighten the factors (per cfg) and linearize every root at one point."""
    point = linearization_point(box, cfg, incumbent)
    fb = tighten_dag(problem.dag, box, cfg.heuristic, point=point, interval_mode=cfg.interval_mode)
    zbar = np.asarray(point, float)
    n = problem.n
    tol = cfg.feas_tol

    infeasible = False
    rows, rhs = [], []
    for g in problem.ineq:
        if fb.intervals[g].lo > tol:
            infeasible = True
        mc = fb.values[g]
        if _usable(mc.sub_cv):
            rows.append(mc.sub_cv)
            rhs.append(tol - mc.cv + float(mc.sub_cv @ zbar))
    for h in problem.eq:
        iv = fb.intervals[h]
        if iv.lo > tol or iv.hi < -tol:
            infeasible = True
        mc = fb.values[h]
        if _usable(mc.sub_cv):
            rows.append(mc.sub_cv)
            rhs.append(tol - mc.cv + float(mc.sub_cv @ zbar))
        if _usable(mc.sub_cc):
            rows.append(-mc.sub_cc)
            rhs.append(tol + mc.cc - float(mc.sub_cc @ zbar))

    obj = fb.values[problem.objective]
    if _usable(obj.sub_cv):
        c, c0 = obj.sub_cv.copy(), obj.cv - float(obj.sub_cv @ zbar)
    else:
        # no usable linearization; fall back to the interval bound
        c, c0 = np.zeros(n), fb.intervals[problem.objective].lo
    A = np.array(rows, float).reshape(-1, n)
    b = np.array(rhs, float)
    return Relaxation(box, fb, c, c0, A, b, fb.intervals[problem.objective].lo, infeasible)


def lower_bound(
    node: BnbNode, problem: Problem, cfg: SolverConfig, incumbent=None, relaxation: Relaxation | None = None
) -> tuple[float, LpSolution | None, Relaxation]:
    """Lower bound on the node; ``inf`` when the relaxation is infeasible."""
    rel = relaxation if relaxation is not None else relax(problem, node.box, cfg, incumbent)
    if rel.infeasible:
        return math.inf, None, rel
    sol = solve_lp(rel.lp())
    if sol.status == "infeasible":
        return math.inf, sol, rel
    if not sol.optimal:
        return rel.interval_lb, sol, rel
    return max(sol.value, rel.interval_lb), sol, rel


# --- upper bounding ---------------------------------------------------------


class _Evaluator:
    def __init__(self, problem: Problem):
        self.problem = problem
        roots = [problem.objective, *problem.ineq, *problem.eq]
        self.fn = problem.dag.compile(roots)
        self.k = len(problem.ineq)

    def __call__(self, z):
        try:
            out = self.fn(z)
        except (ValueError, ZeroDivisionError, OverflowError):
            return None
        if not all(math.isfinite(v) for v in out):
            return None
        return out

    def objective(self, z) -> float:
        out = self(z)
        return 1e300 if out is None else out[0]

    def violation(self, z) -> float:
        out = self(z)
        if out is None:
            return math.inf
        g = out[1 : 1 + self.k]
        h = out[1 + self.k :]
        return max([0.0, *g, *(abs(v) for v in h)])


def _rng_for(box: Box, seed: int) -> np.random.Generator:
    tag = zlib.crc32(np.array([*box.lo, *box.hi], float).tobytes())
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, tag])


def upper_bound(
    node: BnbNode, problem: Problem, cfg: SolverConfig, n_random: int | None = None, ev: _Evaluator | None = None
) -> tuple[float, list[float]] | None:
    """Multistart local search from the midpoint and seeded random points."""
    ev = ev or _Evaluator(problem)
    box = node.box
    lo, hi = np.array(box.lo), np.array(box.hi)
    if n_random is None:
        n_random = cfg.local_starts_root if node.depth == 0 else cfg.local_starts_node
    rng = _rng_for(box, cfg.seed)
    starts = [np.array(box.midpoint)] + [lo + (hi - lo) * rng.random(problem.n) for _ in range(n_random)]
    bounds = list(zip(lo, hi))
    best = None

    for z0 in starts:
        if problem.constrained:
            cons = []
            for i in range(len(problem.ineq)):
                cons.append({"type": "ineq", "fun": lambda z, i=i: _constraint(ev, z, 1 + i)})
            for i in range(len(problem.eq)):
                cons.append({"type": "eq", "fun": lambda z, i=i: _constraint(ev, z, 1 + ev.k + i, eq=True)})
            res = minimize(ev.objective, z0, method="SLSQP", bounds=bounds, constraints=cons, options={"maxiter": 200})
        else:
            res = minimize(ev.objective, z0, method="L-BFGS-B", bounds=bounds)
        for z in (res.x, z0):
            z = np.clip(z, lo, hi)
            out = ev(list(z))
            if out is None or ev.violation(list(z)) > cfg.feas_tol:
                continue
            if best is None or out[0] < best[0]:
                best = (float(out[0]), [float(v) for v in z])
    return best


def _constraint(ev: _Evaluator, z, idx: int, eq: bool = False) -> float:
    out = ev(list(z))
    if out is None:
        return -1e300
    return out[idx] if eq else -out[idx]


# --- range reduction --------------------------------------------------------


def obbt(
    node: BnbNode,
    problem: Problem,
    cfg: SolverConfig,
    rel: Relaxation,
    incumbent_ub: float = math.inf,
    max_rounds: int = 3,
    stats: NodeStats | None = None,
) -> Box | None:
    """Min/max each variable over the linearized feasible set with an objective cut.

    Within a round, a bound is skipped when some earlier LP solution already
    sits on it. A variable takes part in the next round only if one of its
    bounds moved by at least ``obbt_filtering_factor`` times its width.
    Returns ``None`` when the LP is infeasible.
    """
    box = node.box
    base = rel.lp(incumbent_ub)
    if base.m == 0:
        return box
    n = problem.n
    lo, hi = np.array(box.lo), np.array(box.hi)
    active = np.ones(n, bool)
    for _ in range(max_rounds):
        if not active.any():
            break
        seen: list[np.ndarray] = []
        new_lo, new_hi = lo.copy(), hi.copy()
        for i in np.flatnonzero(active):
            for sense in (1.0, -1.0):
                target = lo[i] if sense > 0 else hi[i]
                tol_i = 1e-9 * max(1.0, hi[i] - lo[i])
                if any(abs(x[i] - target) <= tol_i for x in seen):
                    continue
                c = np.zeros(n)
                c[i] = sense
                sol = solve_lp(LinearProgram(c, lo, hi, base.A, base.b))
                if stats is not None:
                    stats.obbt_lps += 1
                if sol.status == "infeasible":
                    return None
                if not sol.optimal:
                    continue
                seen.append(sol.x)
                # the dual value is a valid bound even if the primal is slightly off
                best = min(sol.value, sol.dual_value)
                v = best if sense > 0 else -best
                margin = 1e-9 * max(1.0, abs(v))
                if sense > 0:
                    new_lo[i] = min(max(lo[i], v - margin), hi[i])
                else:
                    new_hi[i] = max(min(hi[i], v + margin), new_lo[i])
        width = hi - lo
        moved = np.maximum(new_lo - lo, hi - new_hi)
        active = (width > 0) & (moved >= cfg.obbt_filtering_factor * width) & (moved > 0)
        lo, hi = new_lo, np.maximum(new_hi, new_lo)
    return Box.from_bounds(lo, hi)


def reduce_range(
    node: BnbNode,
    problem: Problem,
    cfg: SolverConfig,
    rel: Relaxation,
    sol: LpSolution | None,
    incumbent_ub: float,
    stats: NodeStats,
) -> Box | None:
    box = node.box
    if sol is not None and sol.optimal and math.isfinite(incumbent_ub):
        box = dual_bound_tighten(sol, box, incumbent_ub)
    if node.depth <= cfg.obbt_max_depth:
        stats.obbt_runs += 1
        sub = BnbNode(node.lb, node.id, box, node.depth)
        box = obbt(sub, problem, cfg, rel, incumbent_ub, stats=stats)
    return box


# --- main loop --------------------------------------------------------------


def _gap_tol(ub: float, cfg: SolverConfig) -> float:
    return max(cfg.abs_tol, cfg.rel_tol * abs(ub)) if math.isfinite(ub) else 0.0


def _widest(box: Box) -> int:
    w = box.widths
    return int(np.argmax(w))  # first maximal index


def convergence_ratio(ub: float, lb: float, root_lb: float) -> float:
    if not (math.isfinite(ub) and math.isfinite(root_lb)):
        return float("nan")
    if not math.isfinite(lb):
        return 100.0
    span = ub - root_lb
    if span <= 0.0:
        return 100.0
    return 100.0 * min(1.0, max(0.0, 1.0 - (ub - lb) / span))


def solve(problem: Problem, cfg: SolverConfig | None = None) -> SolveReport:
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    stats = NodeStats()
    ev = _Evaluator(problem)
    ub, best = math.inf, None
    queue: list[BnbNode] = [BnbNode(-math.inf, 0, problem.box, 0)]
    next_id = 1
    iterations = 0
    root_lb = -math.inf
    closed_lb = math.inf  # LB of nodes dropped because their box is a point
    history: list[tuple[int, float, float]] = []
    status = "converged"

    def global_lb() -> float:
        return min(queue[0].lb if queue else math.inf, closed_lb)

    while queue:
        if time.perf_counter() - start > cfg.time_limit:
            status = "time_limit"
            break
        if cfg.max_iterations is not None and iterations >= cfg.max_iterations:
            status = "iteration_limit"
            break
        if global_lb() >= ub - _gap_tol(ub, cfg):
            break
        node = heapq.heappop(queue)
        iterations += 1

        found = upper_bound(node, problem, cfg, ev=ev)
        stats.local_searches += 1
        if found is not None and found[0] < ub:
            ub, best = found

        lb, sol, rel = lower_bound(node, problem, cfg, best)
        stats.tightened_factors += sum(p == "heuristic" for p in rel.factors.provenance)
        if cfg.range_reduction != "none" and math.isfinite(lb):
            reduced = reduce_range(node, problem, cfg, rel, sol, ub, stats)
            if reduced is None:
                lb = math.inf
            elif reduced is not node.box and reduced.widths != node.box.widths:
                stats.rr_shrunk += 1
                node = BnbNode(node.lb, node.id, reduced, node.depth)
                lb2, _, _ = lower_bound(node, problem, cfg, best)
                lb = max(lb, lb2)
        if iterations == 1:
            root_lb = lb

        node_lb = max(node.lb, lb)
        if node_lb == math.inf:
            stats.fathomed_infeasible += 1
        elif node_lb >= ub - _gap_tol(ub, cfg):
            stats.fathomed_bound += 1
        else:
            i = _widest(node.box)
            if node.box[i].width <= 1e-12 * max(1.0, abs(node.box[i].mid)):
                closed_lb = min(closed_lb, node_lb)
            else:
                stats.branched += 1
                for child in node.box.bisect(i):
                    heapq.heappush(queue, BnbNode(node_lb, next_id, child, node.depth + 1))
                    next_id += 1
        # the incumbent itself bounds the minimum once the open nodes run out
        history.append((iterations, min(global_lb(), ub), ub))

    lb_final = global_lb()
    if status == "converged":
        if not math.isfinite(ub):
            status = "infeasible"
        lb_final = min(lb_final, ub)
    ratio = convergence_ratio(ub, lb_final, root_lb) if status != "converged" else 100.0
    return SolveReport(
        problem=problem.name,
        status=status,
        best_value=ub,
        best_point=best,
        lower_bound=lb_final,
        iterations=iterations,
        wall_time=time.perf_counter() - start,
        convergence_ratio=ratio,
        root_lower_bound=root_lb,
        history=history,
        stats=stats,
        config=cfg.fingerprint(),
    )
