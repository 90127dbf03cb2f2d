"""One-stop pipeline: reduce the year, build the LP, solve, bundle results.

A SolvedCase keeps everything value analysis needs (system, reduction,
config, LP, registries, solution) so post-processing and finite-difference
re-solves stay pure functions of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lp import LinearProgram, Solution, SolverOptions, solve
from .model import ModelConfig, build_model
from .reduction import RepresentativePeriodSet, build_reduction
from .registry import Registry
from .system import EnergySystem


@dataclass(frozen=True)
class ReductionSpec:
    period_length: int
    n_periods: int
    seed: int = 0
    include_extremes: bool = True

    def apply(self, system: EnergySystem) -> RepresentativePeriodSet:
        return build_reduction(system, self.period_length, self.n_periods,
                               seed=self.seed, include_extremes=self.include_extremes)


@dataclass(frozen=True)
class SolvedCase:
    system: EnergySystem
    rps: RepresentativePeriodSet
    config: ModelConfig
    options: SolverOptions
    lp: LinearProgram
    vars: Registry
    cons: Registry
    solution: Solution

    def primal(self, family: str, entity: str = "") -> np.ndarray:
        e = self.vars.entry(family, entity)
        return self.solution.x[e.start:e.stop].reshape(e.shape or (1,))

    def dual(self, family: str, entity: str = "") -> np.ndarray:
        e = self.cons.entry(family, entity)
        return self.solution.duals[e.start:e.stop].reshape(e.shape or (1,))

    @property
    def objective(self) -> float:
        """Annual system cost in dollars (objective_scale divided back out)."""
        return self.solution.objective / self.config.objective_scale


def solve_case(system: EnergySystem, rps: RepresentativePeriodSet, config: ModelConfig,
               options: SolverOptions | None = None) -> SolvedCase:
    options = options or SolverOptions()
    lp, vreg, creg = build_model(system, rps, config)
    sol = solve(lp, options)
    return SolvedCase(system=system, rps=rps, config=config, options=options,
                      lp=lp, vars=vreg, cons=creg, solution=sol)


def solve_scenario(system: EnergySystem, reduction: ReductionSpec, config: ModelConfig,
                   options: SolverOptions | None = None) -> SolvedCase:
    return solve_case(system, reduction.apply(system), config, options)


def resolve_with_forced_capacity(case: SolvedCase, capacity: float) -> SolvedCase:
    """Rebuild and re-solve the same case with a different forced-in capacity."""
    if case.config.forced_ldes is None:
        raise ValueError("case has no forced capacity to perturb")
    cfg = replace(case.config, forced_ldes=replace(case.config.forced_ldes, capacity=capacity))
    return solve_case(case.system, case.rps, cfg, case.options)


def reduction_from_table(table: dict | None) -> ReductionSpec:
    table = table or {}
    return ReductionSpec(
        period_length=int(table.get("period_length", 24)),
        n_periods=int(table.get("n_periods", 10)),
        seed=int(table.get("seed", 0)),
        include_extremes=bool(table.get("include_extremes", True)),
    )


def model_config_from_table(table: dict | None) -> ModelConfig:
    from .io import _parse_policy  # shared policy table syntax
    from .model import ForcedLdes

    table = table or {}
    forced = None
    if table.get("forced_ldes"):
        ft = table["forced_ldes"]
        forced = ForcedLdes(resource=str(ft["resource"]), capacity=float(ft["capacity"]),
                            duration=float(ft["duration"]))
    override = _parse_policy(table["emissions_override"]) if table.get("emissions_override") else None
    return ModelConfig(
        ldes_linking=bool(table.get("ldes_linking", True)),
        virtual_discharge=bool(table.get("virtual_discharge", True)),
        crm_enabled=bool(table.get("crm_enabled", True)),
        forced_ldes=forced,
        objective_scale=float(table.get("objective_scale", 1.0)),
        emissions_override=override,
        linking_formulation=str(table.get("linking_formulation", "improved")),
    )


def solver_options_from_table(table: dict | None) -> SolverOptions:
    table = table or {}
    return SolverOptions(
        tolerance=float(table.get("tolerance", 1e-8)),
        max_iterations=int(table.get("max_iterations", 500_000)),
        scaling=bool(table.get("scaling", True)),
    )


def annual_emissions(case: SolvedCase) -> float:
    """Weighted annual emissions in tons, from the solved dispatch."""
    rps = case.rps
    w = np.array([rps.weights[r] for r in rps.representatives], dtype=float)
    total = 0.0
    for r in case.system.resources:
        if r.emissions_rate > 0:
            disp = case.primal("dispatch", r.id)
            total += r.emissions_rate * float((disp.sum(axis=1) * w).sum())
    return total * rps.partition.annual_scale
