import numpy as np
import pytest

from cemlink.fixtures import one_zone_system, three_zone_system
from cemlink.system import EnergySystem, Resource, StorageParams, Zone


@pytest.fixture(scope="session")
def one_zone_small():
    """2190-hour seasonal year; small enough for per-test solves."""
    return one_zone_system(hours=2190, seed=0)


@pytest.fixture(scope="session")
def three_zone():
    return three_zone_system(hours=2190, seed=1)


def make_system(hours, demand, resources, profiles=None, crm_margin=0.0,
                emissions_policy=None, voll=50_000.0, lines=(), zones=None):
    """Terse inline system builder for hand-constructed toys."""
    if zones is None:
        zones = [Zone(id="Z1", member_of="sys")]
    if not isinstance(demand, dict):
        demand = {"Z1": np.asarray(demand, dtype=float)}
    return EnergySystem.build(
        zones=zones, resources=resources, lines=list(lines), demand=demand,
        vre_profiles=profiles or {}, hours=hours, crm_margin=crm_margin,
        emissions_policy=emissions_policy, voll=voll,
    )


def storage(rid="store", zone="Z1", eta_c=1.0, eta_d=1.0, duration=None, power=None,
            is_ldes=False, loss=0.0, symmetric=True, fixed_cost=0.0, derate=0.8):
    kw = {}
    if power is not None:
        kw = {"existing_capacity": power, "max_capacity": power}
    return Resource(
        id=rid, zone=zone, kind="storage", fixed_cost=fixed_cost, crm_derate=derate,
        storage=StorageParams(charge_efficiency=eta_c, discharge_efficiency=eta_d,
                              self_discharge=loss, duration=duration,
                              is_ldes=is_ldes, symmetric=symmetric),
        **kw,
    )


def thermal(rid="firm", zone="Z1", fixed=50_000.0, var=20.0, emissions=0.0,
            derate=0.95, max_capacity=np.inf, existing=0.0):
    return Resource(id=rid, zone=zone, kind="thermal", fixed_cost=fixed,
                    variable_cost=var, emissions_rate=emissions, crm_derate=derate,
                    max_capacity=max_capacity, existing_capacity=existing)
