"""cemlink: capacity-expansion LPs with linked representative periods and
dual-based storage valuation."""

from .io import load_system
from .lp import LinearProgram, SolverOptions, solve, verify_certificate
from .model import ForcedLdes, ModelConfig, build_model
from .mps import export_mps, import_mps
from .reduction import (
    PeriodPartition,
    RepresentativePeriodSet,
    build_reduction,
    cluster_periods,
    select_extreme_periods,
)
from .scenario import ReductionSpec, SolvedCase, solve_case, solve_scenario
from .system import (
    EmissionsPolicy,
    EnergySystem,
    Resource,
    StorageParams,
    TransmissionLine,
    Zone,
    aggregate_zones,
    validate_system,
)
from .value import decompose_value, ldes_marginal_value, reconstruct_soc

__version__ = "0.1.0"

__all__ = [
    "EmissionsPolicy", "EnergySystem", "ForcedLdes", "LinearProgram", "ModelConfig",
    "PeriodPartition", "ReductionSpec", "RepresentativePeriodSet", "Resource",
    "SolvedCase", "SolverOptions", "StorageParams", "TransmissionLine", "Zone",
    "aggregate_zones", "build_model", "build_reduction", "cluster_periods",
    "decompose_value", "export_mps", "import_mps", "ldes_marginal_value",
    "load_system", "reconstruct_soc", "select_extreme_periods", "solve",
    "solve_case", "solve_scenario", "validate_system", "verify_certificate",
]
