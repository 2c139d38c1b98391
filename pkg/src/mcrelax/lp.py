"""Small dense linear programs: box-only coefficient analysis and a two-phase
tableau simplex (Bland's rule) reporting row multipliers and reduced costs.

Problems have the form ``min c.z + c0  s.t.  A z <= b,  lo <= z <= hi`` with a
finite box. Multipliers follow the KKT sign convention ``lambda >= 0`` for
``A z <= b``; reduced costs are ``r = c + A^T lambda`` (positive at an active
lower bound, negative at an active upper bound).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interval import Box, Interval

PIVOT_TOL = 1e-11
COST_TOL = 1e-10
FEAS_TOL = 1e-9


@dataclass
class LinearProgram:
    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    c0: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        n = self.c.size
        self.lo = np.asarray(self.lo, float)
        self.hi = np.asarray(self.hi, float)
        self.A = np.zeros((0, n)) if self.A is None else np.atleast_2d(np.asarray(self.A, float))
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, float).reshape(-1)
        if self.A.size == 0:
            self.A = self.A.reshape(0, n)
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise ValueError(f"A must have {n} columns")
        if self.A.shape[0] != self.b.size:
            raise ValueError("A and b row counts differ")
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ValueError(f"bounds must have length {n}")
        for arr in (self.c, self.lo, self.hi, self.A, self.b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("linear program data must be finite")
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")

    @classmethod
    def from_box(cls, c, box: Box, A=None, b=None, c0: float = 0.0) -> "LinearProgram":
        return cls(c, np.array(box.lo), np.array(box.hi), A, b, c0)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | error
    x: np.ndarray | None = None
    value: float = float("nan")
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_value: float = float("nan")
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve_box_lp(c, box: Box, c0: float = 0.0) -> LpSolution:
    """Minimize an affine function over a box by the sign of each coefficient."""
    c = np.asarray(c, float)
    lo, hi = np.array(box.lo), np.array(box.hi)
    x = np.where(c >= 0.0, lo, hi)
    value = float(c @ x) + c0
    return LpSolution("optimal", x, value, np.zeros(0), c.copy(), value)


class _Tableau:
    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T
        self.basis = basis
        self.iterations = 0

    def pivot(self, r: int, j: int, cost: np.ndarray) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        cost -= cost[j] * T[r]
        self.basis[r] = j
        self.iterations += 1

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
        """Bland's rule on the current tableau; ``cost`` is the reduced-cost row."""
        T = self.T
        while True:
            if self.iterations > max_iter:
                return "error"
            cand = np.flatnonzero((cost[:-1] < -COST_TOL) & allowed)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0])
            colj = T[:, j]
            rows = np.flatnonzero(colj > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / colj[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j, cost)


def solve_simplex(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    n, m = lp.n, lp.m
    w = lp.hi - lp.lo
    # shift z = lo + x with 0 <= x <= w; bound rows follow the A rows
    G = np.vstack([lp.A, np.eye(n)])
    h = np.concatenate([lp.b - lp.A @ lp.lo, w])
    R = m + n
    flip = h < 0.0
    n_art = int(flip.sum())
    ncol = n + R + n_art
    T = np.zeros((R, ncol + 1))
    T[:, :n] = G
    T[:, n : n + R] = np.eye(R)
    T[:, -1] = h
    T[flip] *= -1.0
    basis = list(range(n, n + R))
    art_of_row = {}
    for k, i in enumerate(np.flatnonzero(flip)):
        col = n + R + k
        T[i, col] = 1.0
        basis[i] = col
        art_of_row[i] = col
    tab = _Tableau(T, basis)
    limit = max_iter if max_iter is not None else 50 * (R + ncol)
    is_art = np.zeros(ncol, bool)
    is_art[n + R :] = True

    if n_art:
        cost = np.zeros(ncol + 1)
        cost[n + R : ncol] = 1.0
        for i in art_of_row:
            cost -= T[i]
        status = tab.run(cost, np.ones(ncol, bool), limit)
        if status == "error":
            return LpSolution("error", iterations=tab.iterations, message="phase 1 iteration limit")
        infeas = -cost[-1]
        if infeas > FEAS_TOL * max(1.0, np.abs(h).max()):
            return LpSolution("infeasible", iterations=tab.iterations, message=f"phase 1 residual {infeas:.3g}")
        # drive zero-level artificials out of the basis where possible
        for r, bj in enumerate(tab.basis):
            if is_art[bj]:
                cand = np.flatnonzero((np.abs(T[r, : n + R]) > 1e-9))
                if cand.size:
                    tab.pivot(r, int(cand[0]), np.zeros(ncol + 1))

    full_c = np.zeros(ncol + 1)
    full_c[:n] = lp.c
    cost = full_c.copy()
    for r, bj in enumerate(tab.basis):
        if full_c[bj] != 0.0:
            cost -= full_c[bj] * T[r]
    status = tab.run(cost, ~is_art, limit)
    if status != "optimal":
        msg = "phase 2 iteration limit" if status == "error" else "objective unbounded below"
        return LpSolution(status, iterations=tab.iterations, message=msg)

    xs = np.zeros(ncol)
    xs[tab.basis] = T[:, -1]
    x = np.clip(xs[:n], 0.0, w) + lp.lo
    value = float(lp.c @ x) + lp.c0

    # multipliers from the unflipped standard form  [G I -E_art] v = h
    M = np.zeros((R, ncol))
    M[:, :n] = G
    M[:, n : n + R] = np.eye(R)
    for i, col in art_of_row.items():
        M[i, col] = -1.0
    B = M[:, tab.basis]
    try:
        y = np.linalg.solve(B.T, full_c[tab.basis])
    except np.linalg.LinAlgError:
        return LpSolution("error", iterations=tab.iterations, message="singular final basis")
    lam = -y[:m]
    reduced = lp.c + lp.A.T @ lam
    dual_value = float(lp.c0 + lp.c @ lp.lo + y @ h)
    return LpSolution("optimal", x, value, lam, reduced, dual_value, tab.iterations)


def solve(lp: LinearProgram) -> LpSolution:
    """Box-only programs go through coefficient analysis, the rest through simplex."""
    if lp.m == 0:
        return solve_box_lp(lp.c, Box.from_bounds(lp.lo, lp.hi), lp.c0)
    return solve_simplex(lp)


def dual_bound_tighten(sol: LpSolution, box: Box, incumbent_ub: float, tol: float = 1e-9) -> Box:
    """Reduced-cost range reduction.

    A variable at its lower bound with reduced cost ``r > 0`` cannot exceed
    ``lo + (UB - LB) / r`` in any point whose relaxed objective is at most UB;
    symmetrically at the upper bound.
    """
    if not sol.optimal or sol.x is None:
        return box
    gap = max(incumbent_ub - sol.value, 0.0)
    dims = []
    for i, d in enumerate(box):
        r = float(sol.reduced_costs[i])
        x = float(sol.x[i])
        lo, hi = d.lo, d.hi
        scale = tol * max(1.0, d.width)
        if r > tol and abs(x - d.lo) <= scale:
            hi = min(hi, d.lo + gap / r)
        elif r < -tol and abs(x - d.hi) <= scale:
            lo = max(lo, d.hi - gap / -r)
        dims.append(Interval(lo, max(lo, hi)))
    return Box(dims)
