"""Command-line front-end: ``mcrelax solve|tighten|plot|bench``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .bnb import SolveReport, SolverConfig, solve
from .expr import Op, ParseError
from .interval import Box, DomainError, Interval
from .mccormick import PropagationContext, propagate
from .problem import BUILTIN_NAMES, Problem, ProblemFileError, builtin, load_problem
from .tighten import TightenConfig, tighten_dag


@dataclass
class RunRecord:
    problem: str
    config: str
    iterations: int
    time_ms: float
    status: str
    best_value: float
    final_lb: float

    @classmethod
    def from_report(cls, r: SolveReport) -> "RunRecord":
        return cls(r.problem, r.config, r.iterations, r.wall_time * 1e3, r.status, r.best_value, r.lower_bound)

    def row(self) -> list[str]:
        return [
            self.problem,
            self.config,
            str(self.iterations),
            f"{self.time_ms:.1f}",
            self.status,
            repr(float(self.best_value)),
            repr(float(self.final_lb)),
        ]


HEADER = [f.name for f in fields(RunRecord)]


def write_records(records: Sequence[RunRecord], out: str | None) -> None:
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(r.row() for r in records)
        return
    path = Path(out)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(HEADER)
        w.writerows(r.row() for r in records)


# --- flag parsing -----------------------------------------------------------


def parse_heur(text: str) -> int:
    """``off`` -> 0, ``N=<k>`` -> k."""
    if text == "off":
        return 0
    if text.startswith("N="):
        try:
            k = int(text[2:])
        except ValueError:
            k = -1
        if k >= 1:
            return k
    raise argparse.ArgumentTypeError(f"expected 'off' or 'N=<k>' with k >= 1, got {text!r}")


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_ints(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",")]
    except ValueError:
        vals = []
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"expected comma-separated positive integers, got {text!r}")
    return vals


def solver_config(args, heur: int | None = None, rr: str | None = None) -> SolverConfig:
    heur = args.heur if heur is None else heur
    rr = args.rr if rr is None else rr
    return SolverConfig(
        time_limit=args.timeout,
        heuristic=TightenConfig(max_iters=heur),
        linearization_point=args.point,
        range_reduction="none" if rr == "none" else "obbt+dual",
        interval_mode=args.interval,
        seed=args.seed,
    )


def _add_solver_flags(p: argparse.ArgumentParser, with_heur: bool = True) -> None:
    if with_heur:
        p.add_argument("--heur", type=parse_heur, default=0, metavar="off|N=k", help="tightening heuristic")
    p.add_argument("--point", choices=["midpoint", "incumbent"], default="midpoint", help="linearization point")
    if with_heur:
        p.add_argument("--rr", choices=["none", "full"], default="none", help="range reduction")
    p.add_argument("--interval", choices=["natural", "taylor2"], default="natural")
    p.add_argument("--timeout", type=float, default=3600.0, help="time limit per solve in seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="append CSV records to this file")


# --- commands ---------------------------------------------------------------


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    report = solve(problem, solver_config(args))
    print(report.summary())
    write_records([RunRecord.from_report(report)], args.out)
    return 0


def _point_for(problem: Problem, given: list[float] | None) -> list[float]:
    if given is None:
        return problem.box.midpoint
    if len(given) != problem.n:
        raise ValueError(f"--point needs {problem.n} coordinates, got {len(given)}")
    if not problem.box.contains(given):
        raise ValueError(f"point {given} lies outside the box {problem.box}")
    return given


def _fmt(iv: Interval) -> str:
    return f"[{iv.lo:.6g}, {iv.hi:.6g}]"


def cmd_tighten(args) -> int:
    problem = load_problem(args.problem)
    dag, box = problem.dag, problem.box
    point = _point_for(problem, args.point)
    cfg = TightenConfig(max_iters=args.N, two_point_mode=args.two_point)
    natural = tighten_dag(dag, box, TightenConfig(0), point=point)
    taylor = tighten_dag(dag, box, TightenConfig(0), point=point, interval_mode="taylor2")
    alg = tighten_dag(dag, box, cfg, point=point, interval_mode=args.interval)

    if args.factor is not None:
        if not 1 <= args.factor <= len(dag):
            raise ValueError(f"--factor must lie in 1..{len(dag)}")
        wanted = [args.factor - 1]
    else:
        wanted = range(len(dag))
    show_taylor = args.interval == "taylor2"
    for j in wanted:
        node = dag.nodes[j]
        label = f"f{j + 1:<3d} {dag.describe(j)}"
        if node.op is Op.CONST:
            print(f"{label}  {_fmt(alg[j])}  skipped (constant)")
            continue
        parts = [f"natural {_fmt(natural[j])}"]
        if show_taylor:
            parts.append(f"taylor {_fmt(taylor[j])}")
        start = alg.initial[j]
        parts.append(f"alg {_fmt(start)} -> {_fmt(alg[j])}")
        print(f"{label}  " + "  ".join(parts))
    if args.N > 1:
        print(f"re-propagations: {alg.repropagations}")
    return 0


def plot_rows(problem: Problem, samples: int, box: Box, N: int = 1, interval_mode: str = "natural", point=None):
    """Rows of z..., f, cv_nat, cc_nat, cv_alg, cc_alg on a uniform grid."""
    dag, root = problem.dag, problem.objective
    if problem.n > 2:
        raise ValueError(f"plot supports 1-D and 2-D problems; this one has {problem.n} variables")
    point = box.midpoint if point is None else point
    alg = tighten_dag(dag, box, TightenConfig(max_iters=N), point=point, interval_mode=interval_mode)
    axes = [np.linspace(d.lo, d.hi, samples) for d in box]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, problem.n)
    rows = []
    for z in grid:
        z = [float(v) for v in z]
        nat = propagate(dag, PropagationContext(box, z, interval_mode=interval_mode), upto=root)[root]
        tig = propagate(dag, PropagationContext(box, z, stored_bounds=alg.intervals), upto=root)[root]
        rows.append([*z, dag.evaluate(z, root), nat.cv, nat.cc, tig.cv, tig.cc])
    return rows


def cmd_plot(args) -> int:
    if args.samples < 2:
        raise ValueError("--samples must be at least 2")
    problem = load_problem(args.problem)
    box = problem.box
    if args.range:
        if len(args.range) != problem.n:
            raise ValueError(f"give one --range per variable ({problem.n})")
        sub = Box([tuple(r) for r in args.range])
        if not sub.subset_of(box):
            raise ValueError("--range must lie inside the problem box")
        box = sub
    point = _point_for(Problem(problem.name, problem.dag, problem.objective, (), (), box), args.point)
    rows = plot_rows(problem, args.samples, box, args.N, args.interval, point)
    names = problem.var_names if problem.n > 1 else ["z"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "f", "cv_nat", "cc_nat", "cv_alg", "cc_alg"])
    w.writerows([repr(v) for v in row] for row in rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


BENCH_CONFIGS = ("mc", "heur", "rr", "heur-rr")


def bench_runs(configs: Sequence[str], ns: Sequence[int]) -> list[tuple[int, str]]:
    """(heuristic iterations, range reduction) pairs for the requested sweep."""
    runs = []
    for c in configs:
        rr = "full" if c.endswith("rr") else "none"
        if c.startswith("heur"):
            runs += [(k, rr) for k in ns]
        else:
            runs.append((0, rr))
    return runs


def parse_configs(text: str) -> list[str]:
    if text == "all":
        return list(BENCH_CONFIGS)
    out = text.split(",")
    bad = [c for c in out if c not in BENCH_CONFIGS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown configs {bad}; choose from {', '.join(BENCH_CONFIGS)} or all")
    return out


def cmd_bench(args) -> int:
    if args.list:
        print("\n".join(BUILTIN_NAMES))
        return 0
    problems = [load_problem(p) for p in args.problems] if args.problems else [builtin(n) for n in BUILTIN_NAMES]
    records = []
    for problem in problems:
        for heur, rr in bench_runs(args.configs, args.N):
            report = solve(problem, solver_config(args, heur=heur, rr=rr))
            records.append(RunRecord.from_report(report))
            print(
                f"{problem.name:16s} {report.config:60s} it={report.iterations:<6d} {report.status}",
                file=sys.stderr,
            )
    write_records(records, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcrelax", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="global minimization by branch-and-bound")
    p.add_argument("problem", help="problem file or built-in name")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tighten", help="print natural / Taylor / tightened factor intervals")
    p.add_argument("problem")
    p.add_argument("--factor", type=int, default=None, help="1-based factor index (default: all)")
    p.add_argument("--point", type=parse_floats, default=None, help="comma-separated point (default: midpoint)")
    p.add_argument("-N", type=int, default=1, help="heuristic iterations per factor")
    p.add_argument("--two-point", action="store_true", help="separate points for the lower and upper bound")
    p.add_argument("--interval", choices=["natural", "taylor2"], default="natural")
    p.set_defaults(func=cmd_tighten)

    p = sub.add_parser("plot", help="CSV of f and its relaxations on a grid")
    p.add_argument("problem")
    p.add_argument("--range", type=parse_floats, action="append", metavar="LO,HI", help="one per variable")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--point", type=parse_floats, default=None, help="point used by the heuristic")
    p.add_argument("-N", type=int, default=1)
    p.add_argument("--interval", choices=["natural", "taylor2"], default="natural")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("bench", help="run solver configurations over a problem set")
    p.add_argument("problems", nargs="*", help="problem files (default: the built-in suite)")
    p.add_argument("--suite", choices=["builtin"], default="builtin")
    p.add_argument("--configs", type=parse_configs, default=list(BENCH_CONFIGS), metavar="all|mc,heur,rr,heur-rr")
    p.add_argument("--N", type=parse_ints, default=[1], metavar="k[,k...]")
    p.add_argument("--list", action="store_true", help="list built-in problems and exit")
    _add_solver_flags(p, with_heur=False)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ProblemFileError, DomainError, FileNotFoundError, ValueError) as exc:
        print(f"mcrelax: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
