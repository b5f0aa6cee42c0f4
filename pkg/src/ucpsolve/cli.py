"""Command-line front end.

Subcommands:

* ``solve``   - run one configuration, write per-stage controller CSVs plus
  a JSON convergence report.
* ``compare`` - run the adaptive schedule and a fixed local/exhaustion split
  on the same problem, writing both result sets side by side.
* ``pin``     - recompute the independent reference values behind the pinned
  regression tests and write them to a fixtures file.
* ``bench``   - time the numba kernels against the pure-numpy fallbacks.

Configuration comes from an optional JSON file plus flag overrides; flags
win. Exit codes: 0 on success, 1 for configuration errors, 2 for numeric
failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import kernels
from .problem import NumericError
from .problems import REGISTRY, make_problem
from .solver import SolveResult, SolverConfig, solve

__all__ = ["RunConfig", "export_controllers", "write_report", "main"]

_SOLVER_KEYS = (
    "iters_per_round",
    "precision",
    "grad_step",
    "search_radius",
    "fd_step",
    "curvature_min",
    "newton_cap",
    "max_rounds",
    "workers",
)


@dataclass
class RunConfig:
    """One resolved solve invocation."""

    problem: str = "witsenhausen"
    params: dict = field(default_factory=dict)
    grids: list | None = None
    solver: dict = field(default_factory=dict)
    mode: str = "adaptive"
    output_dir: str = "runs/latest"

    def fixed_split(self) -> int | None:
        if self.mode == "adaptive":
            return None
        if self.mode.startswith("fixed_split:"):
            tail = self.mode.split(":", 1)[1]
            try:
                return int(tail)
            except ValueError:
                raise ValueError(f"mode fixed_split needs an integer (got {tail!r})") from None
        raise ValueError(f"mode must be 'adaptive' or 'fixed_split:<n>' (got {self.mode!r})")

    def build(self):
        if self.problem not in REGISTRY:
            raise ValueError(f"problem must be one of {sorted(REGISTRY)} (got {self.problem!r})")
        unknown = set(self.solver) - set(_SOLVER_KEYS)
        if unknown:
            raise ValueError(f"unknown solver option(s): {sorted(unknown)}")
        problem = make_problem(self.problem, self.params, grids=self.grids)
        cfg = SolverConfig(**self.solver, fixed_local_iters=self.fixed_split())
        return problem, cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_keyvals(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"expected key=value (got {item!r})")
        key, value = item.split("=", 1)
        out[key.strip()] = _parse_value(value.strip())
    return out


def _parse_grid_overrides(items, defaults):
    if not items:
        return None
    grids = {i: spec for i, spec in enumerate(defaults)}
    for item in items:
        body = item
        stage = None
        if ":" in item:
            head, body = item.split(":", 1)
            stage = int(head)
        parts = body.split(",")
        if len(parts) != 3:
            raise ValueError(f"grid override must be [m:]a,b,d (got {item!r})")
        spec = (float(parts[0]), float(parts[1]), int(parts[2]))
        if stage is None:
            for i in grids:
                grids[i] = spec
        else:
            if stage not in grids:
                raise ValueError(f"grid stage {stage} out of range (0..{len(grids) - 1})")
            grids[stage] = spec
    return [grids[i] for i in range(len(grids))]


def load_run_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        unknown = set(raw) - {"problem", "params", "grids", "solver", "mode", "output_dir"}
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        cfg = RunConfig(**raw)
    if args.problem:
        cfg.problem = args.problem
    cfg.params = {**cfg.params, **_parse_keyvals(getattr(args, "param", None))}
    cfg.solver = {**cfg.solver, **_parse_keyvals(getattr(args, "solver", None))}
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if cfg.problem not in REGISTRY:
        raise ValueError(f"problem must be one of {sorted(REGISTRY)} (got {cfg.problem!r})")
    if getattr(args, "grid", None):
        defaults = cfg.grids or make_problem(cfg.problem, cfg.params).default_grid_specs()
        cfg.grids = _parse_grid_overrides(args.grid, defaults)
    return cfg


def export_controllers(result: SolveResult, out_dir) -> list:
    """One ``controller_<m>.csv`` per stage: header ``y,u``, ascending y.

    Values print with 17 significant digits, so parsing a file reproduces
    the in-memory float64 values bit for bit.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in range(len(result.controllers)):
        ctrl = result.controllers[m]
        path = out_dir / f"controller_{m}.csv"
        try:
            with path.open("w") as fh:
                fh.write("y,u\n")
                for y, u in zip(ctrl.grid.points, ctrl.values):
                    fh.write(f"{y:.17g},{u:.17g}\n")
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        paths.append(path)
    return paths


def write_report(result: SolveResult, out_dir) -> Path:
    """JSON convergence report with one record per round."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    rounds = [
        {
            "round": r.round_index,
            "objective": r.objective,
            "objective_after_local": r.objective_after_local,
            "local_improvement": r.local_gain,
            "exhaustion_improvement": r.exhaustion_gain,
            "local_iters": r.local_iters,
            "exhaustion_iters": r.exhaustion_iters,
            "wall_ms": r.wall_ms,
        }
        for r in result.rounds
    ]
    doc = {
        "final_objective": result.final_objective,
        "termination": result.termination,
        "total_rounds": result.total_rounds,
        "wall_ms_total": sum(r.wall_ms for r in result.rounds),
        "backend": kernels.BACKEND,
        "rounds": rounds,
    }
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
    return path


def _cmd_solve(args) -> int:
    cfg = load_run_config(args)
    problem, solver_cfg = cfg.build()
    result = solve(problem, solver_cfg)
    out = Path(cfg.output_dir)
    export_controllers(result, out)
    write_report(result, out)
    print(
        f"{problem.name}: {result.termination} after {result.total_rounds} rounds, "
        f"objective {result.final_objective:.9g} -> {out}"
    )
    return 0


def _cmd_compare(args) -> int:
    cfg = load_run_config(args)
    out = Path(cfg.output_dir)
    summaries = []
    for label, mode in (("adaptive", "adaptive"), ("fixed_split", f"fixed_split:{args.fixed_local}")):
        run = RunConfig(
            problem=cfg.problem,
            params=dict(cfg.params),
            grids=cfg.grids,
            solver=dict(cfg.solver),
            mode=mode,
            output_dir=str(out / label),
        )
        problem, solver_cfg = run.build()
        result = solve(problem, solver_cfg)
        export_controllers(result, run.output_dir)
        write_report(result, run.output_dir)
        summaries.append((label, result))
        print(
            f"{label}: {result.termination} after {result.total_rounds} rounds, "
            f"objective {result.final_objective:.9g}"
        )
    best = min(summaries, key=lambda kv: kv[1].final_objective)
    print(f"lowest objective: {best[0]} ({best[1].final_objective:.9g})")
    return 0


def _cmd_pin(args) -> int:
    from .oracle import OracleConfig, exhaustive_argmin, reference_values
    from .problems import Witsenhausen

    values = reference_values()
    wc = Witsenhausen()
    oc = OracleConfig(u_lo=-25.0, u_hi=25.0, steps=100_000)
    values["wc_stage1_bruteforce_argmin"] = exhaustive_argmin(
        wc, 1, 1.0, wc.zero_controllers(), oc
    )
    values["wc_stage1_bruteforce_step"] = oc.step
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(values)} reference values -> {path}")
    return 0


def _cmd_bench(args) -> int:
    from .bench import run_benchmark

    run_benchmark(repeats=args.repeats, size=args.size)
    return 0


class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors: exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"config error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_run_flags(p):
    p.add_argument("--config", help="JSON run configuration file")
    p.add_argument("--problem", choices=sorted(REGISTRY), help="problem name")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="problem parameter override")
    p.add_argument("--grid", action="append", metavar="[M:]A,B,D", help="grid override, per stage or all stages")
    p.add_argument("--solver", action="append", metavar="KEY=VALUE", help="solver option override")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ucpsolve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solve and export results")
    _add_run_flags(p)
    p.add_argument("--mode", help="'adaptive' (default) or 'fixed_split:<n>'")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("compare", help="run adaptive vs fixed split side by side")
    _add_run_flags(p)
    p.add_argument("--fixed-local", type=int, default=19, dest="fixed_local",
                   help="local iterations per round for the fixed schedule (default 19)")
    p.set_defaults(func=_cmd_compare, mode=None)

    p = sub.add_parser("pin", help="write the oracle reference values to a fixtures file")
    p.add_argument("--out", default="pinned_values.json", help="fixtures file path")
    p.set_defaults(func=_cmd_pin)

    p = sub.add_parser("bench", help="compare numba and numpy kernel backends")
    p.add_argument("--size", type=int, default=2000, help="grid size of the benchmark workload")
    p.add_argument("--repeats", type=int, default=3, help="timing repetitions")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
