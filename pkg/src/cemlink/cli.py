"""Command-line interface.

Subcommands: validate, solve, sweep, curve, audit. Exit code 0 only when
every solve in the invocation reached Optimal.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    convergence_report,
    decarbonization_curve,
    run_sweep,
    sweep_spec_from_table,
    write_convergence_csv,
    write_curve_csv,
)
from .io import IngestError, InvariantViolation, load_config, load_system
from .lp import OPTIMAL
from .mps import export_mps
from .scenario import (
    model_config_from_table,
    reduction_from_table,
    solve_scenario,
    solver_options_from_table,
)
from .system import validate_system
from .value import decompose_value, reconstruct_soc, save_value_report


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cemlink",
                                     description="capacity-expansion runs with linked representative periods")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario YAML")
        p.add_argument("--out-dir", default="out")
        p.add_argument("--seed", type=int, default=None, help="override reduction seed")
        p.add_argument("--solver-tol", type=float, default=None)

    p = sub.add_parser("validate", help="check a system config against its invariants")
    p.add_argument("--config", required=True)

    p = sub.add_parser("solve", help="single scenario solve with value report")
    common(p)
    p.add_argument("--dump-lp", action="store_true", help="export the LP as MPS")

    p = sub.add_parser("sweep", help="run the sweep grid from the config's sweep table")
    common(p)
    p.add_argument("--sweep", default=None, help="separate sweep YAML (default: 'sweep' table in config)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-lp", action="store_true")

    p = sub.add_parser("curve", help="decarbonization-cost curve over carbon prices")
    common(p)
    p.add_argument("--curve", default=None, help="separate curve YAML (default: 'curve' table in config)")

    p = sub.add_parser("audit", help="solve and audit the reconstructed storage trajectory")
    common(p)
    return parser


def _scenario_pieces(args, doc):
    reduction = reduction_from_table(doc.get("reduction"))
    if args.seed is not None:
        reduction = replace(reduction, seed=args.seed)
    config = model_config_from_table(doc.get("model"))
    options = solver_options_from_table(doc.get("solver"))
    if args.solver_tol is not None:
        options = replace(options, tolerance=args.solver_tol)
    return reduction, config, options


def _cmd_validate(args) -> int:
    try:
        system = load_system(args.config)
    except InvariantViolation as exc:
        print(exc.report)
        return 1
    except IngestError as exc:
        print(f"error: {exc}")
        return 1
    print(f"valid: {len(system.zones)} zones, {len(system.resources)} resources, "
          f"{len(system.lines)} lines, {system.hours} hours")
    print(validate_system(system))
    return 0


def _cmd_solve(args) -> int:
    system = load_system(args.config)
    doc = load_config(args.config)
    reduction, config, options = _scenario_pieces(args, doc)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    case = solve_scenario(system, reduction, config, options)
    print(f"status={case.solution.status} objective={case.objective:.6g} "
          f"rows={case.lp.n_rows} cols={case.lp.n_cols} nnz={case.lp.nnz} "
          f"seconds={case.solution.solve_seconds:.3f}")
    if args.dump_lp:
        export_mps(case.lp, out / "model.mps")
    if case.solution.status != OPTIMAL:
        return 1
    if config.forced_ldes is not None:
        report = decompose_value(case)
        save_value_report(report, out / "value_report.csv")
        print(f"total_value={report.total_value:.6g} energy={report.energy_value:.6g} "
              f"capacity={report.capacity_value:.6g} residual={report.residual:.6g}")
    if config.ldes_linking:
        traj = reconstruct_soc(case)
        traj.save_csv(out / "soc_trajectory.csv")
        print(f"soc_violations={len(traj.violations)} max={traj.max_violation:.6g} "
              f"cyclic_residual={traj.cyclic_residual:.6g}")
    return 0


def _cmd_sweep(args) -> int:
    system = load_system(args.config)
    doc = load_config(args.config)
    _, _, options = _scenario_pieces(args, doc)
    table = load_config(args.sweep) if args.sweep else doc.get("sweep")
    spec = sweep_spec_from_table(table.get("sweep", table) if table else None)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    rows = run_sweep(system, spec, options, out_dir=args.out_dir,
                     workers=args.workers, dump_lp=args.dump_lp)
    try:
        report = convergence_report(rows)
        write_convergence_csv(report, Path(args.out_dir) / "convergence.csv")
        hours = report["converged_hours"]
        print(f"converged_at_hours={hours if hours is not None else 'never'}")
    except Exception as exc:
        print(f"convergence report skipped: {exc}")
    bad = [r for r in rows if r.get("status") != OPTIMAL]
    print(f"points={len(rows)} optimal={len(rows) - len(bad)}")
    return 0 if not bad else 1


def _cmd_curve(args) -> int:
    system = load_system(args.config)
    doc = load_config(args.config)
    reduction, _, options = _scenario_pieces(args, doc)
    table = load_config(args.curve) if args.curve else doc.get("curve")
    table = (table or {}).get("curve", table) or {}
    rows = decarbonization_curve(
        system,
        reduction,
        carbon_prices=[float(p) for p in table.get("carbon_prices", [0, 25, 200, 2000])],
        ldes_costs=[float(c) for c in table.get("ldes_costs", [25_000.0])],
        linking_toggles=[bool(b) for b in table.get("linking", [True, False])],
        options=options,
        ldes_resource=str(table.get("ldes_resource", "ldes")),
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(rows, out / "curve.csv")
    bad = [r for r in rows if r.get("status") != OPTIMAL]
    print(f"points={len(rows)} optimal={len(rows) - len(bad)}")
    return 0 if not bad else 1


def _cmd_audit(args) -> int:
    system = load_system(args.config)
    doc = load_config(args.config)
    reduction, config, options = _scenario_pieces(args, doc)
    if not config.ldes_linking:
        print("audit requires ldes_linking: true")
        return 1
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    case = solve_scenario(system, reduction, config, options)
    if case.solution.status != OPTIMAL:
        print(f"status={case.solution.status}")
        return 1
    with (out / "violations.log").open("w") as fh:
        for r in system.storage_resources():
            if not r.storage.is_ldes:
                continue
            traj = reconstruct_soc(case, r.id)
            traj.save_csv(out / f"soc_{r.id}.csv")
            for v in traj.violations:
                fh.write(f"resource={r.id} hour={v.hour} amount={v.amount:.6g}\n")
            print(f"{r.id}: violations={len(traj.violations)} max={traj.max_violation:.6g} "
                  f"cyclic_residual={traj.cyclic_residual:.6g}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "validate": _cmd_validate,
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "curve": _cmd_curve,
        "audit": _cmd_audit,
    }
    try:
        return handlers[args.command](args)
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
