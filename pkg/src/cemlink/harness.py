"""Sweep engine over temporal, spatial, and formulation axes.

Grid points are independent solves of fresh models built from the immutable
base system; no state is shared, so points can run in a process pool. Rows
land in results.csv in grid order regardless of completion order, and the
file is flushed as each prefix completes so partial sweeps survive
interruption. Wall-clock timings go to timings.csv, never results.csv, so a
re-run with the same seed reproduces results.csv byte for byte.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .lp import OPTIMAL, NumericalFailure, SolverOptions, solve as lp_solve
from .model import ForcedLdes, ModelConfig, ModelError, build_model
from .mps import export_mps
from .reduction import ReductionError
from .scenario import ReductionSpec, SolvedCase, annual_emissions, solve_case
from .system import EmissionsPolicy, EnergySystem, aggregate_zones
from .value import decompose_value, reconstruct_soc


class HarnessError(Exception):
    pass


class MissingReference(HarnessError):
    pass


@dataclass(frozen=True)
class CostMultiplier:
    label: str = "base"
    resource: str | None = None
    cost_field: str = "fixed_cost"
    multiplier: float = 1.0


@dataclass(frozen=True)
class ZoneGrouping:
    label: str = "asis"
    mapping: tuple[tuple[str, str], ...] | None = None  # None keeps zones as-is


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian grid; combinations whose periods exceed the year are excluded
    at grid construction. Axis order (slowest to fastest): period_length,
    n_periods, grouping, linking, virtual, cost, forced MW, duration, RTE,
    emissions."""

    n_periods: tuple[int, ...] = (10,)
    period_lengths: tuple[int, ...] = (24,)
    groupings: tuple[ZoneGrouping, ...] = (ZoneGrouping(),)
    ldes_linking: tuple[bool, ...] = (True,)
    virtual_discharge: tuple[bool, ...] = (True,)
    cost_multipliers: tuple[CostMultiplier, ...] = (CostMultiplier(),)
    forced_mw: tuple[float, ...] = (10.0,)
    durations: tuple[float, ...] = (200.0,)
    rtes: tuple[float, ...] = (0.42,)
    emissions: tuple[EmissionsPolicy | None, ...] = (None,)
    forced_resource: str = "ldes"
    crm_enabled: bool = True
    seed: int = 0

    def grid(self, hours: int) -> list["GridPoint"]:
        points = []
        combos = itertools.product(
            self.period_lengths, self.n_periods, self.groupings, self.ldes_linking,
            self.virtual_discharge, self.cost_multipliers, self.forced_mw,
            self.durations, self.rtes, self.emissions,
        )
        idx = 0
        for tau, n, grouping, linking, virtual, cost, k, dur, rte, emis in combos:
            if n * tau > hours:
                continue
            points.append(GridPoint(
                grid_index=idx, period_length=tau, n_periods=n, grouping=grouping,
                ldes_linking=linking, virtual_discharge=virtual, cost=cost,
                forced_mw=k, duration=dur, rte=rte, emissions=emis,
            ))
            idx += 1
        if not points:
            raise HarnessError("sweep grid is empty")
        return points


@dataclass(frozen=True)
class GridPoint:
    grid_index: int
    period_length: int
    n_periods: int
    grouping: ZoneGrouping
    ldes_linking: bool
    virtual_discharge: bool
    cost: CostMultiplier
    forced_mw: float
    duration: float
    rte: float
    emissions: EmissionsPolicy | None


RESULT_COLUMNS = [
    "grid_index", "period_length", "n_periods", "operational_hours", "n_zones",
    "grouping", "ldes_linking", "virtual_discharge", "cost_label", "forced_mw",
    "duration_h", "rte", "emissions_label", "status", "objective", "total_value",
    "energy_value", "capacity_value", "residual_value", "degenerate",
    "soc_violations", "soc_max_violation", "soc_cyclic_residual",
]

TIMING_COLUMNS = ["grid_index", "build_seconds", "solve_seconds", "lp_rows",
                  "lp_cols", "lp_nnz", "iterations"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _emissions_label(policy: EmissionsPolicy | None) -> str:
    if policy is None:
        return "default"
    if policy.kind == "cap":
        return f"cap:{_fmt(policy.cap_tons)}"
    if policy.kind == "price":
        return f"price:{_fmt(policy.price_per_ton)}"
    return "none"


def _with_resources(system: EnergySystem, resources) -> EnergySystem:
    return EnergySystem.build(
        zones=system.zones, resources=resources, lines=system.lines,
        demand=system.demand, vre_profiles=system.vre_profiles, hours=system.hours,
        crm_margin=system.crm_margin, emissions_policy=system.emissions_policy,
        voll=system.voll,
    )


def materialize_point(base: EnergySystem, point: GridPoint,
                      spec: SweepSpec) -> tuple[EnergySystem, ReductionSpec, ModelConfig]:
    """Instantiate a grid point: spatial grouping, cost tweak, storage
    parameters, reduction and model toggles."""
    system = base
    if point.grouping.mapping is not None:
        system = aggregate_zones(system, dict(point.grouping.mapping))

    resources = list(system.resources)
    changed = False
    if point.cost.resource is not None:
        for i, r in enumerate(resources):
            if r.id == point.cost.resource:
                resources[i] = replace(r, **{point.cost.cost_field:
                                             getattr(r, point.cost.cost_field) * point.cost.multiplier})
                changed = True
    eta = math.sqrt(point.rte)
    for i, r in enumerate(resources):
        if r.id == spec.forced_resource and r.storage is not None:
            sp = replace(r.storage, charge_efficiency=eta, discharge_efficiency=eta,
                         duration=point.duration)
            if sp != r.storage:
                resources[i] = replace(r, storage=sp)
                changed = True
    if changed:
        system = _with_resources(system, resources)

    reduction = ReductionSpec(period_length=point.period_length,
                              n_periods=point.n_periods, seed=spec.seed)
    config = ModelConfig(
        ldes_linking=point.ldes_linking,
        virtual_discharge=point.virtual_discharge,
        crm_enabled=spec.crm_enabled,
        forced_ldes=ForcedLdes(resource=spec.forced_resource, capacity=point.forced_mw,
                               duration=point.duration),
        emissions_override=point.emissions,
    )
    return system, reduction, config


def run_point(base: EnergySystem, point: GridPoint, spec: SweepSpec,
              options: SolverOptions, dump_lp: str | None = None):
    """Execute one grid point; per-point failures become row data, not raises."""
    row = {
        "grid_index": point.grid_index,
        "period_length": point.period_length,
        "n_periods": point.n_periods,
        "operational_hours": point.n_periods * point.period_length,
        "grouping": point.grouping.label,
        "ldes_linking": point.ldes_linking,
        "virtual_discharge": point.virtual_discharge,
        "cost_label": point.cost.label,
        "forced_mw": point.forced_mw,
        "duration_h": point.duration,
        "rte": point.rte,
        "emissions_label": _emissions_label(point.emissions),
    }
    timing = {"grid_index": point.grid_index}
    violations: list[str] = []
    try:
        system, reduction, config = materialize_point(base, point, spec)
        row["n_zones"] = len(system.zones)
        t0 = time.perf_counter()
        rps = reduction.apply(system)
        lp, vreg, creg = build_model(system, rps, config)
        timing["build_seconds"] = time.perf_counter() - t0
        timing["lp_rows"], timing["lp_cols"], timing["lp_nnz"] = lp.n_rows, lp.n_cols, lp.nnz
        if dump_lp:
            export_mps(lp, Path(dump_lp) / f"point_{point.grid_index:04d}.mps")
        sol = lp_solve(lp, options)
        timing["solve_seconds"] = sol.solve_seconds
        timing["iterations"] = sol.iterations
        case = SolvedCase(system=system, rps=rps, config=config, options=options,
                          lp=lp, vars=vreg, cons=creg, solution=sol)
        row["status"] = sol.status
        if sol.status == OPTIMAL:
            row["objective"] = case.objective
            report = decompose_value(case)
            row["total_value"] = report.total_value
            row["energy_value"] = report.energy_value
            row["capacity_value"] = report.capacity_value
            row["residual_value"] = report.residual
            row["degenerate"] = report.degenerate
            if config.ldes_linking:
                traj = reconstruct_soc(case, spec.forced_resource)
                row["soc_violations"] = len(traj.violations)
                row["soc_max_violation"] = traj.max_violation
                row["soc_cyclic_residual"] = traj.cyclic_residual
                violations = [
                    f"grid={point.grid_index} resource={traj.resource} hour={v.hour} amount={_fmt(v.amount)}"
                    for v in traj.violations
                ]
            else:
                row["soc_violations"] = 0
                row["soc_max_violation"] = 0.0
                row["soc_cyclic_residual"] = 0.0
    except (NumericalFailure, ReductionError, ModelError, HarnessError, ValueError) as exc:
        row["status"] = f"Error:{type(exc).__name__}"
        row.setdefault("n_zones", len(base.zones))
    return row, timing, violations


def _run_point_payload(payload):
    base, point, spec, options, dump_lp = payload
    return run_point(base, point, spec, options, dump_lp)


class _OrderedCsvWriter:
    """Writes rows in grid order, flushing each completed prefix."""

    def __init__(self, path: Path, columns: list[str]):
        self.columns = columns
        self.fh = path.open("w", newline="")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(columns)
        self.fh.flush()
        self.pending: dict[int, dict] = {}
        self.next_index = 0

    def add(self, row: dict):
        self.pending[row["grid_index"]] = row
        while self.next_index in self.pending:
            row = self.pending.pop(self.next_index)
            self.writer.writerow([_fmt(row.get(c)) for c in self.columns])
            self.next_index += 1
        self.fh.flush()

    def close(self):
        for idx in sorted(self.pending):
            row = self.pending.pop(idx)
            self.writer.writerow([_fmt(row.get(c)) for c in self.columns])
        self.fh.close()


def run_sweep(base: EnergySystem, spec: SweepSpec, options: SolverOptions | None = None,
              out_dir: str | Path = "out", workers: int = 1,
              dump_lp: bool = False) -> list[dict]:
    """Execute every grid point and write results.csv / timings.csv /
    violations.log under out_dir. Deterministic for a fixed seed."""
    options = options or SolverOptions()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = spec.grid(base.hours)
    dump_dir = str(out_dir / "lp") if dump_lp else None
    if dump_dir:
        Path(dump_dir).mkdir(exist_ok=True)

    results = _OrderedCsvWriter(out_dir / "results.csv", RESULT_COLUMNS)
    timings = _OrderedCsvWriter(out_dir / "timings.csv", TIMING_COLUMNS)
    rows: list[dict] = []
    vlog = (out_dir / "violations.log").open("w")
    try:
        if workers <= 1:
            outcomes = (run_point(base, p, spec, options, dump_dir) for p in points)
            for row, timing, violations in outcomes:
                rows.append(row)
                results.add(row)
                timings.add(timing)
                for line in violations:
                    vlog.write(line + "\n")
        else:
            payloads = [(base, p, spec, options, dump_dir) for p in points]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for row, timing, violations in pool.map(_run_point_payload, payloads):
                    rows.append(row)
                    results.add(row)
                    timings.add(timing)
                    for line in violations:
                        vlog.write(line + "\n")
    finally:
        results.close()
        timings.close()
        vlog.close()
    rows.sort(key=lambda r: r["grid_index"])
    return rows


def convergence_report(rows: list[dict], reference_row: dict | None = None,
                       band: float = 0.10) -> dict:
    """Relative error of total value against the highest-resolution solve and
    the first grid point that stays within the band at all higher resolutions."""
    usable = [r for r in rows if r.get("status") == OPTIMAL and r.get("total_value") is not None]
    if reference_row is None:
        if not usable:
            raise MissingReference("no Optimal rows to reference")
        reference_row = max(usable, key=lambda r: (r["operational_hours"], -r["grid_index"]))
    ref_value = reference_row["total_value"]
    denom = abs(ref_value) if ref_value else 1.0

    ordered = sorted(usable, key=lambda r: (r["operational_hours"], r["grid_index"]))
    entries = []
    for r in ordered:
        err = abs(r["total_value"] - ref_value) / denom
        entries.append({
            "grid_index": r["grid_index"],
            "operational_hours": r["operational_hours"],
            "total_value": r["total_value"],
            "rel_error": err,
            "within_band": err <= band,
        })
    converged_index = None
    ok = True
    for i in range(len(entries) - 1, -1, -1):
        ok = ok and entries[i]["within_band"]
        if ok:
            converged_index = i
    for i, e in enumerate(entries):
        e["converged_from_here"] = converged_index is not None and i >= converged_index
    return {
        "reference_grid_index": reference_row["grid_index"],
        "reference_value": ref_value,
        "band": band,
        "converged_index": converged_index,
        "converged_hours": entries[converged_index]["operational_hours"] if converged_index is not None else None,
        "entries": entries,
    }


def write_convergence_csv(report: dict, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grid_index", "operational_hours", "total_value", "rel_error",
                    "within_band", "converged_from_here"])
        for e in report["entries"]:
            w.writerow([_fmt(e[c]) for c in ("grid_index", "operational_hours", "total_value",
                                             "rel_error", "within_band", "converged_from_here")])
    return path


CURVE_COLUMNS = ["ldes_cost", "ldes_linking", "carbon_price", "status", "objective",
                 "emissions_tons", "reduction_fraction", "ldes_mw", "ldes_mwh"]


def decarbonization_curve(base: EnergySystem, reduction: ReductionSpec,
                          carbon_prices: list[float], ldes_costs: list[float],
                          linking_toggles: list[bool] = (True, False),
                          options: SolverOptions | None = None,
                          ldes_resource: str = "ldes",
                          virtual_discharge: bool = True) -> list[dict]:
    """Objective and achieved emissions reduction across a carbon-price ladder,
    with LDES capacity optimized (not forced) at each cost level. Reductions
    are relative to each combo's own zero-price solve."""
    options = options or SolverOptions()
    rows = []
    for cost in ldes_costs:
        resources = [
            replace(r, fixed_cost=float(cost)) if r.id == ldes_resource else r
            for r in base.resources
        ]
        system = _with_resources(base, resources)
        rps = reduction.apply(system)
        for linking in linking_toggles:
            config = ModelConfig(ldes_linking=linking, virtual_discharge=virtual_discharge,
                                 crm_enabled=True, forced_ldes=None,
                                 emissions_override=EmissionsPolicy.price(0.0))
            baseline = solve_case(system, rps, config, options)
            em0 = annual_emissions(baseline)
            for price in carbon_prices:
                if price == 0.0:
                    case = baseline
                else:
                    cfg = replace(config, emissions_override=EmissionsPolicy.price(price))
                    case = solve_case(system, rps, cfg, options)
                em = annual_emissions(case)
                rows.append({
                    "ldes_cost": float(cost),
                    "ldes_linking": linking,
                    "carbon_price": float(price),
                    "status": case.solution.status,
                    "objective": case.objective,
                    "emissions_tons": em,
                    "reduction_fraction": (1.0 - em / em0) if em0 > 0 else 0.0,
                    "ldes_mw": float(case.primal("cap", ldes_resource)[0]),
                    "ldes_mwh": float(case.primal("energy_cap", ldes_resource)[0]),
                })
    return rows


def write_curve_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in CURVE_COLUMNS])
    return path


def sweep_spec_from_table(table: dict | None) -> SweepSpec:
    from .io import _parse_policy

    table = table or {}
    groupings = []
    for g in table.get("groupings", [{}]):
        mapping = g.get("map")
        groupings.append(ZoneGrouping(
            label=str(g.get("label", "asis")),
            mapping=tuple(sorted(mapping.items())) if mapping else None,
        ))
    costs = []
    for ct in table.get("cost_multipliers", [{}]):
        costs.append(CostMultiplier(
            label=str(ct.get("label", "base")),
            resource=ct.get("resource"),
            cost_field=str(ct.get("field", "fixed_cost")),
            multiplier=float(ct.get("multiplier", 1.0)),
        ))
    emissions = tuple(_parse_policy(e) if e else None for e in table.get("emissions", [None]))
    return SweepSpec(
        n_periods=tuple(int(n) for n in table.get("n_periods", [10])),
        period_lengths=tuple(int(t) for t in table.get("period_lengths", [24])),
        groupings=tuple(groupings),
        ldes_linking=tuple(bool(b) for b in table.get("ldes_linking", [True])),
        virtual_discharge=tuple(bool(b) for b in table.get("virtual_discharge", [True])),
        cost_multipliers=tuple(costs),
        forced_mw=tuple(float(k) for k in table.get("forced_mw", [10.0])),
        durations=tuple(float(d) for d in table.get("durations", [200.0])),
        rtes=tuple(float(r) for r in table.get("rtes", [0.42])),
        emissions=emissions,
        forced_resource=str(table.get("forced_resource", "ldes")),
        crm_enabled=bool(table.get("crm_enabled", True)),
        seed=int(table.get("seed", 0)),
    )
