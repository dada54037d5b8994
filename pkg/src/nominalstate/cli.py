"""Command-line front end.

    nominalstate <subcommand> (--scenario FILE | --preset NAME) [--out DIR]
                 [--seed INT] [--format csv|json] [--require-convergence]
    nominalstate sweep ... --param model.transfer_frag_premium --range 0:12:13

Exit codes: 0 success, 1 configuration or validation error, 2 solver
non-convergence under --require-convergence.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import reports
from .dynamics import TRAJECTORY_COLUMNS
from .model import ModelDomainError
from .mpe import classify_equilibrium, solve_stationary
from .scenario import (
    PRESETS,
    SWEEP_COLUMNS,
    Scenario,
    ScenarioError,
    load_preset,
    load_scenario,
    parse_range,
    sweep,
)

OUT_ENV = "NOMINALSTATE_OUT"
SUBCOMMANDS = ("calibrate", "stage", "simulate", "solve", "thresholds", "sweep")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2

log = logging.getLogger("nominalstate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nominalstate", description="Statehood-without-capacity game toolkit")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario YAML file")
    src.add_argument("--preset", choices=PRESETS, help="bundled scenario")
    parser.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default: ${OUT_ENV} or the current directory)")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--require-convergence", action="store_true",
                        help="exit with code 2 if the equilibrium solver does not converge")
    parser.add_argument("--param", help="sweep: dotted parameter name, e.g. model.transfer_frag_premium")
    parser.add_argument("--range", dest="range_spec", help="sweep: 'lo:hi:n' or a single value")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text, encoding="utf-8")
    print(path)
    return path


def _solve(sc: Scenario):
    if sc.grid is None:
        raise ScenarioError("solving needs a grid section in the scenario")
    sol = solve_stationary(sc.economy, sc.environment, sc.grid.build(), sc.solver.tol, sc.solver.max_iter,
                           shock=sc.crisis_shock)
    return sol


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        sc = load_scenario(args.scenario) if args.scenario else load_preset(args.preset)
        if args.seed is not None:
            sc = replace(sc, seed=args.seed)
        out = args.out or Path(os.environ.get(OUT_ENV, "."))
        out.mkdir(parents=True, exist_ok=True)
        return _dispatch(args, sc, out)
    except (ScenarioError, ModelDomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args, sc: Scenario, out: Path) -> int:
    seed = sc.seed
    header = reports.header_lines(sc, seed)
    fmt = args.format
    cmd = args.subcommand

    if cmd == "calibrate":
        rows = reports.calibration_table(sc)
        _write(out, "calibration.csv", reports.to_csv(rows, reports.CALIBRATION_COLUMNS, header))
        _write(out, "calibration.json", reports.to_json({"calibration": rows}, sc, seed))
        return EXIT_OK

    if cmd == "stage":
        rep = reports.stage_report(sc)
        if fmt == "csv":
            _write(out, "stage.csv", reports.to_csv(reports.stage_rows(rep), ("profile", "pi1", "pi2", "nash", "indifferent"), header))
        else:
            _write(out, "stage.json", reports.to_json({"stage": rep}, sc, seed))
        return EXIT_OK

    if cmd == "thresholds":
        rows = reports.thresholds_rows(sc)
        if fmt == "csv":
            _write(out, "thresholds.csv", reports.to_csv(rows, reports.THRESHOLD_COLUMNS, header))
        else:
            _write(out, "thresholds.json", reports.to_json({"thresholds": rows}, sc, seed))
        return EXIT_OK

    if cmd == "simulate":
        sol = None
        if sc.mode == "solve":
            sol = _solve(sc)
            if args.require_convergence and not sol.converged:
                print("error: equilibrium solver did not converge", file=sys.stderr)
                return EXIT_NONCONVERGED
        rows = reports.simulate_rows(sc, sol)
        if fmt == "json":
            _write(out, "trajectory.json", reports.to_json({"trajectory": rows}, sc, seed))
        else:
            _write(out, "trajectory.csv", reports.to_csv(rows, TRAJECTORY_COLUMNS, header))
        return EXIT_OK

    if cmd == "solve":
        sol = _solve(sc)
        if args.require_convergence and not sol.converged:
            print("error: equilibrium solver did not converge", file=sys.stderr)
            return EXIT_NONCONVERGED
        cls = classify_equilibrium(sol, sc.initial_state, sc.horizon, seed=seed) if sol.converged else None
        _write(out, "solution.json", reports.to_json(reports.solution_dict(sol, cls), sc, seed))
        return EXIT_OK

    # sweep
    if not args.param or not args.range_spec:
        raise ScenarioError("sweep needs --param and --range")
    rows = sweep(sc, args.param, parse_range(args.range_spec))
    if fmt == "json":
        _write(out, "sweep.json", reports.to_json({"parameter": args.param, "sweep": rows}, sc, seed))
    else:
        _write(out, "sweep.csv", reports.to_csv(rows, SWEEP_COLUMNS, header + [f"# parameter: {args.param}"]))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
