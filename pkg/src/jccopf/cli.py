"""Command line front end: ``solve``, ``compare``, ``evaluate``, ``validate``.

Settings resolve as flags > ``--config`` file > built-in defaults. Every
failure prints a diagnostic naming the offending input and exits nonzero:
2 for bad input, 1 for a method that failed, 3 for a run that finished
without converging.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .baselines import ALL_METHODS, MethodId, solve_method
from .case import Case
from .casefile import CaseError, RunConfig, parse_case, shipped_case_path
from .chance_reform import RiskBudget
from .decomposition import DispatchSchedule, FrameworkConfig, FrameworkError
from .evaluation import (
    attribute_violations, compare_methods, dropped_culprits, evaluate_pos, fmt,
    write_cost_csv, write_pos_csv, write_trace_csv, write_violations_csv,
)

logger = logging.getLogger("jccopf")

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2, 3

# RunConfig field -> command line flag, used to name the culprit in diagnostics
FLAG_OF = {
    "alpha": "--alpha", "epsilon": "--epsilon", "n_samples": "--samples",
    "n_eval": "--eval-samples", "seed": "--seed", "eval_seed": "--eval-seed",
    "tolerance": "--tol", "max_iter": "--max-iter", "methods": "--method", "out": "--out",
}
CONFIG_FIELD = {"alpha": "alpha", "epsilon": "epsilon", "n_samples": "n_samples",
                "seed": "seed", "tol": "tolerance", "max_iter": "max_iter"}


class InputError(Exception):
    """Bad command line, config or case input."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", required=True,
                        help="case file path or the name of a shipped case (five_bus, three_bus, adversarial)")
    common.add_argument("--config", help="JSON run configuration; flags override its values")
    common.add_argument("--alpha", type=float, help="joint violation budget (default 0.05)")
    common.add_argument("--epsilon", type=float, help="power-balance risk (default 1e-4)")
    common.add_argument("--samples", type=int, dest="n_samples", help="solve-side scenarios (default 20000)")
    common.add_argument("--eval-samples", type=int, dest="n_eval", help="evaluation scenarios (default 100000)")
    common.add_argument("--seed", type=int, help="solve scenario seed (default 42)")
    common.add_argument("--eval-seed", type=int, help="evaluation seed (default seed + 1)")
    common.add_argument("--tol", type=float, dest="tolerance", help="relative objective change to stop (default 1e-5)")
    common.add_argument("--max-iter", type=int, help="re-solve cap (default 50)")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--force", action="store_true", help="overwrite existing output files")
    common.add_argument("--timing", action="store_true",
                        help="add wall-clock columns to trace.csv and summary.csv (breaks byte-identical reruns)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="jccopf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="run one method, write dispatch/trace/summary")
    p.add_argument("--method", choices=[m.value for m in ALL_METHODS], help="default iterative")
    p = sub.add_parser("compare", parents=[common], help="run several methods on one evaluation set")
    p.add_argument("--method", action="append", dest="methods", choices=[m.value for m in ALL_METHODS],
                   help="repeat to choose methods; default all five")
    p = sub.add_parser("evaluate", parents=[common], help="Monte Carlo PoS of an existing dispatch.csv")
    p.add_argument("--dispatch", required=True, help="dispatch.csv written by solve")
    sub.add_parser("validate", parents=[common], help="parse and check a case file")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            cfg = RunConfig.from_file(args.config)
        except OSError as exc:
            raise InputError(f"--config {args.config}: {exc.strerror or exc}") from None
        except CaseError as exc:
            raise InputError("\n".join(exc.problems)) from None
        except (json.JSONDecodeError, TypeError) as exc:
            raise InputError(f"--config {args.config}: {exc}") from None
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    if getattr(args, "method", None):
        cfg.methods = [args.method]
    return cfg


def framework_config(cfg: RunConfig) -> FrameworkConfig:
    kw = {k: getattr(cfg, v) for k, v in CONFIG_FIELD.items()}
    try:
        fc = FrameworkConfig(**kw)
    except (ValueError, TypeError) as exc:
        first = str(exc).split()[0]
        bad = FLAG_OF.get(CONFIG_FIELD.get(first, ""), "config")
        raise InputError(f"{bad}: {exc}") from None
    if cfg.n_eval < 1:
        raise InputError(f"--eval-samples: must be >= 1, got {cfg.n_eval}")
    for m in cfg.methods:
        try:
            MethodId(m)
        except ValueError:
            raise InputError(f"--method: unknown method {m!r}") from None
    return fc


def load_case(name: str) -> Case:
    path = Path(name)
    if not path.exists() and not name.endswith(".json") and shipped_case_path(name).exists():
        path = shipped_case_path(name)
    try:
        return parse_case(path)
    except CaseError as exc:
        raise InputError("\n".join(f"{path}: {p}" for p in exc.problems)) from None


def prepare_out(out: str, names: list[str], force: bool) -> Path:
    root = Path(out)
    if root.exists() and not root.is_dir():
        raise InputError(f"--out {out}: exists and is not a directory")
    clash = [n for n in names if (root / n).exists()]
    if clash and not force:
        raise InputError(f"--out {out}: would overwrite {', '.join(clash)}; pass --force")
    root.mkdir(parents=True, exist_ok=True)
    return root


def write_dispatch_csv(path: Path, schedule: DispatchSchedule, case: Case) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "gen_id", "mw"])
        for t in range(case.horizon):
            for j, gen in enumerate(case.network.generators):
                out.writerow([t + 1, gen.id, fmt(schedule.g[t, j])])


def read_dispatch_csv(path, case: Case) -> np.ndarray:
    col = {g.id: j for j, g in enumerate(case.network.generators)}
    g = np.full((case.horizon, len(col)), np.nan)
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    t, gid, mw = int(row["t"]), int(row["gen_id"]), float(row["mw"])
                except (KeyError, TypeError, ValueError):
                    raise InputError(f"{path}:{lineno}: expected columns t,gen_id,mw") from None
                if gid not in col or not 1 <= t <= case.horizon:
                    raise InputError(f"{path}:{lineno}: unknown generator {gid} or t={t} "
                                     f"outside 1..{case.horizon}")
                g[t - 1, col[gid]] = mw
    except OSError as exc:
        raise InputError(f"--dispatch {path}: {exc.strerror or exc}") from None
    if np.isnan(g).any():
        t, j = np.argwhere(np.isnan(g))[0]
        raise InputError(f"--dispatch {path}: no entry for t={t + 1}, "
                         f"generator {case.network.generators[j].id}")
    return g


def write_summary_csv(path: Path, schedules: dict, errors: dict, timing: dict | None) -> None:
    header = ["method", "status", "objective", "iterations", "converged"]
    if timing is not None:
        header.append("wall_ms")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for m, s in schedules.items():
            row = [m, s.status, fmt(s.objective), s.iterations, int(s.converged)]
            if timing is not None:
                row.append(f"{timing[m]:.3f}")
            out.writerow(row)
        for m, err in errors.items():
            out.writerow([m, "error", "", 0, 0] + ([""] if timing is not None else []))
            logger.error("%s: %s", m, err)


def cmd_solve(args, cfg: RunConfig, case: Case) -> int:
    fc = framework_config(cfg)
    method = MethodId(cfg.methods[0] if args.method else MethodId.ITERATIVE).value
    root = prepare_out(cfg.out, ["dispatch.csv", "trace.csv", "summary.csv"], args.force)
    start = time.perf_counter()
    try:
        sched = solve_method(method, case, fc)
    except FrameworkError as exc:
        write_summary_csv(root / "summary.csv", {}, {method: str(exc)}, None)
        print(f"jccopf: {method} failed on {case.name}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    wall = (time.perf_counter() - start) * 1e3
    write_dispatch_csv(root / "dispatch.csv", sched, case)
    write_trace_csv(root / "trace.csv", sched, timing=args.timing)
    write_summary_csv(root / "summary.csv", {method: sched}, {},
                      {method: wall} if args.timing else None)
    for w in sched.warnings:
        logger.warning(w)
    print(f"{method}: status {sched.status}, objective {fmt(sched.objective)}, "
          f"{sched.iterations} solves -> {root}")
    if sched.status in ("not-converged", "infeasible-fallback"):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_compare(args, cfg: RunConfig, case: Case) -> int:
    fc = framework_config(cfg)
    names = ["pos.csv", "cost.csv", "violations.csv", "summary.csv", "trace.csv"]
    root = prepare_out(cfg.out, names, args.force)
    start = time.perf_counter()
    comp = compare_methods(case, fc, cfg.methods, n_eval=cfg.n_eval, eval_seed=cfg.eval_seed)
    wall = (time.perf_counter() - start) * 1e3
    write_pos_csv(root / "pos.csv", comp.pos.values())
    write_cost_csv(root / "cost.csv", comp.cost)
    write_violations_csv(root / "violations.csv", comp.attribution)
    write_summary_csv(root / "summary.csv", comp.schedules, comp.errors,
                      {m: wall for m in comp.schedules} if args.timing else None)
    traced = next((m for m in (MethodId.ITERATIVE.value, *comp.schedules) if m in comp.schedules), None)
    if traced is not None:
        write_trace_csv(root / "trace.csv", comp.schedules[traced], timing=args.timing)
    for m, rep in comp.pos.items():
        worst = int(np.argmin(rep.pos))
        print(f"{m:16s} objective {fmt(comp.cost.objectives[m]):>14s}  gap {comp.cost.gap(m):8.4%}  "
              f"min PoS {rep.pos[worst]:.4f} (t={worst + 1})  {'pass' if rep.all_passed else 'FAIL'}")
        for t, hits in dropped_culprits(rep, case).items():
            for a in hits[:3]:
                print(f"    t={t + 1}: view {a.view + 1} (line {a.line_id} {a.direction}) "
                      f"violated {a.violation_prob:.3g}, not in the solve")
    if comp.errors:
        for m, err in comp.errors.items():
            print(f"jccopf: {m} failed on {case.name}: {err}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig, case: Case) -> int:
    fc = framework_config(cfg)
    g = read_dispatch_csv(args.dispatch, case)
    root = prepare_out(cfg.out, ["pos.csv", "violations.csv"], args.force)
    sched = DispatchSchedule(g, float("nan"), RiskBudget(tuple({} for _ in range(case.horizon)), fc.epsilon),
                             (False,) * case.horizon, method=Path(args.dispatch).stem)
    eval_seed = fc.seed + 1 if cfg.eval_seed is None else cfg.eval_seed
    rep = evaluate_pos(sched, case, n_eval=cfg.n_eval, eval_seed=eval_seed, alpha=fc.alpha,
                       solve_seed=fc.seed)
    write_pos_csv(root / "pos.csv", [rep])
    write_violations_csv(root / "violations.csv", attribute_violations(rep, case))
    for t, p in enumerate(rep.pos):
        print(f"t={t + 1}: PoS {p:.4f} +- {rep.half_width[t]:.4f}  {'pass' if rep.passed[t] else 'FAIL'}")
    return EXIT_OK if rep.all_passed else EXIT_FAILED


def cmd_validate(args, cfg: RunConfig, case: Case) -> int:
    net = case.network
    print(f"{case.name}: {len(net.buses)} buses, {len(net.lines)} lines "
          f"({len(net.monitored_lines)} monitored, {len(case.views)} views), "
          f"{len(net.generators)} generators, {len(net.wind)} wind farms, "
          f"{len(net.loads)} loads, horizon {net.horizon}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "evaluate": cmd_evaluate,
            "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        case = load_case(args.case)
        return COMMANDS[args.command](args, cfg, case)
    except InputError as exc:
        print(f"jccopf {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
