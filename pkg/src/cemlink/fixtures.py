"""Synthetic desk-scale systems used by the test suite and example scripts.

The one-zone year pairs winter-peaking demand with summer-peaking solar and
multi-week wind swings, so a long-duration store earns real seasonal and
synoptic arbitrage. A 4-hour battery competes away the diurnal spread, the
combustion-turbine backstop is cheap to build and expensive to run, and the
nuclear-style resource is the opposite. Profiles carry seeded noise so LP
optima are generically non-degenerate.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from .io import write_series_csv
from .reduction import PeriodPartition, RepresentativePeriodSet
from .system import (
    VRE,
    EmissionsPolicy,
    EnergySystem,
    Resource,
    StorageParams,
    TransmissionLine,
    Zone,
)


def _demand_series(hours, rng, base=100.0, seasonal=30.0, diurnal=10.0, synoptic=8.0, noise=2.5):
    t = np.arange(hours)
    yf = t / hours
    hod = t % 24
    series = (
        base
        + seasonal * np.cos(2 * np.pi * yf)
        + diurnal * np.sin(2 * np.pi * (hod - 9) / 24)
        + synoptic * np.sin(2 * np.pi * t / 431.0)
        + noise * rng.normal(0, 1, hours)
    )
    return np.clip(series, 5.0, None)


def _solar_series(hours, rng, noise=0.12):
    t = np.arange(hours)
    yf = t / hours
    hod = t % 24
    sun = np.clip(np.sin(np.pi * (hod - 6) / 12.0), 0.0, None)
    sun[sun < 1e-9] = 0.0  # scrub sine rounding noise at dawn/dusk
    amp = 0.65 + 0.3 * np.cos(2 * np.pi * (yf - 0.5))
    cloud = np.clip(1.0 - np.abs(rng.normal(0, noise, hours)), 0.2, 1.0)
    return np.clip(sun * amp * cloud, 0.0, 1.0)


def _wind_series(hours, rng, noise=0.08, phase=1.3):
    t = np.arange(hours)
    yf = t / hours
    series = (
        0.35
        + 0.12 * np.cos(2 * np.pi * yf)
        + 0.25 * np.sin(2 * np.pi * t / 197.0 + phase)
        + noise * rng.normal(0, 1, hours)
    )
    return np.clip(series, 0.0, 1.0)


def _eta(rte: float) -> float:
    return math.sqrt(rte)


def ldes_resource(zone="Z1", rte=0.42, duration=200.0, fixed_cost=0.0,
                  max_capacity=np.inf, existing=0.0) -> Resource:
    return Resource(
        id="ldes", zone=zone, kind="storage", fixed_cost=fixed_cost,
        crm_derate=0.8, max_capacity=max_capacity, existing_capacity=existing,
        storage=StorageParams(
            charge_efficiency=_eta(rte), discharge_efficiency=_eta(rte),
            self_discharge=0.0, duration=duration, is_ldes=True, symmetric=True,
        ),
    )


def one_zone_system(hours=8760, seed=0, *, include_ct=True, include_nuclear=True,
                    include_battery=True, include_gas=False, ldes_rte=0.42,
                    ldes_duration=200.0, ldes_fixed_cost=0.0, ldes_max=np.inf,
                    crm_margin=0.15, emissions_policy=None, voll=50_000.0) -> EnergySystem:
    rng = np.random.default_rng(seed)
    demand = _demand_series(hours, rng)
    solar = _solar_series(hours, rng)
    wind = _wind_series(hours, rng)

    resources = []
    if include_ct:
        resources.append(Resource(id="ct_backstop", zone="Z1", kind="thermal",
                                  fixed_cost=70_000.0, variable_cost=200.0, crm_derate=0.95))
    if include_nuclear:
        resources.append(Resource(id="nuclear", zone="Z1", kind="thermal",
                                  fixed_cost=500_000.0, variable_cost=10.0, crm_derate=0.95))
    if include_gas:
        resources.append(Resource(id="gas", zone="Z1", kind="thermal",
                                  fixed_cost=60_000.0, variable_cost=40.0,
                                  emissions_rate=0.4, crm_derate=0.95))
    resources.append(Resource(id="solar_1", zone="Z1", kind=VRE, tech="solar",
                              fixed_cost=55_000.0, crm_derate=0.8))
    resources.append(Resource(id="wind_1", zone="Z1", kind=VRE, tech="wind",
                              fixed_cost=85_000.0, crm_derate=0.8))
    if include_battery:
        resources.append(Resource(
            id="battery", zone="Z1", kind="storage", fixed_cost=45_000.0, crm_derate=0.8,
            storage=StorageParams(charge_efficiency=_eta(0.85), discharge_efficiency=_eta(0.85),
                                  duration=4.0, is_ldes=False, symmetric=True),
        ))
    resources.append(ldes_resource(rte=ldes_rte, duration=ldes_duration,
                                   fixed_cost=ldes_fixed_cost, max_capacity=ldes_max))

    return EnergySystem.build(
        zones=[Zone(id="Z1", member_of="sys")],
        resources=resources,
        lines=[],
        demand={"Z1": demand},
        vre_profiles={"solar_1": solar, "wind_1": wind},
        hours=hours,
        crm_margin=crm_margin,
        emissions_policy=emissions_policy,
        voll=voll,
    )


def three_zone_system(hours=8760, seed=1, include_ldes=False) -> EnergySystem:
    """Three zones in a ring: 9 resources (thermal + solar + wind per zone),
    3 lines, phase-shifted demand."""
    rng = np.random.default_rng(seed)
    base = {"A": 80.0, "B": 100.0, "C": 60.0}
    shift = {"A": 0, "B": 8, "C": 16}
    demand = {z: np.roll(_demand_series(hours, rng, base=base[z]), shift[z]) for z in base}
    profiles = {}
    zones = []
    resources = []
    thermal = {
        "A": dict(fixed_cost=70_000.0, variable_cost=200.0),
        "B": dict(fixed_cost=500_000.0, variable_cost=10.0),
        "C": dict(fixed_cost=70_000.0, variable_cost=180.0),
    }
    for z in base:
        zones.append(Zone(id=z, member_of="sys"))
        resources.append(Resource(id=f"ct_{z}", zone=z, kind="thermal",
                                  crm_derate=0.95, **thermal[z]))
        resources.append(Resource(id=f"solar_{z}", zone=z, kind=VRE, tech="solar",
                                  fixed_cost=55_000.0, crm_derate=0.8))
        resources.append(Resource(id=f"wind_{z}", zone=z, kind=VRE, tech="wind",
                                  fixed_cost=85_000.0, crm_derate=0.8))
        profiles[f"solar_{z}"] = np.roll(_solar_series(hours, rng), shift[z])
        profiles[f"wind_{z}"] = _wind_series(hours, rng, phase=1.3 + shift[z] / 8.0)
    if include_ldes:
        resources.append(ldes_resource(zone="A"))
    lines = [
        TransmissionLine(id="AB", from_zone="A", to_zone="B", capacity=40.0, loss_fraction=0.02),
        TransmissionLine(id="BC", from_zone="B", to_zone="C", capacity=40.0, loss_fraction=0.02),
        TransmissionLine(id="CA", from_zone="C", to_zone="A", capacity=40.0, loss_fraction=0.02),
    ]
    return EnergySystem.build(
        zones=zones, resources=resources, lines=lines, demand=demand,
        vre_profiles=profiles, hours=hours, crm_margin=0.15,
    )


def crm_binding_system(hours=2190, seed=3) -> EnergySystem:
    """One-zone system engineered so the reserve margin, not energy, drives
    capacity: high margin, expensive firm capacity, storage with spare energy
    that can pledge virtual discharge at the net peak."""
    rng = np.random.default_rng(seed)
    demand = _demand_series(hours, rng, base=100.0, seasonal=20.0, diurnal=18.0, synoptic=5.0)
    solar = _solar_series(hours, rng)
    wind = _wind_series(hours, rng)
    resources = [
        Resource(id="ct_backstop", zone="Z1", kind="thermal",
                 fixed_cost=120_000.0, variable_cost=120.0, crm_derate=0.95),
        Resource(id="solar_1", zone="Z1", kind=VRE, tech="solar",
                 fixed_cost=45_000.0, crm_derate=0.8),
        Resource(id="wind_1", zone="Z1", kind=VRE, tech="wind",
                 fixed_cost=80_000.0, crm_derate=0.8),
        ldes_resource(rte=0.42, duration=200.0),
        Resource(
            id="midstore", zone="Z1", kind="storage", fixed_cost=40_000.0, crm_derate=0.8,
            storage=StorageParams(charge_efficiency=_eta(0.81), discharge_efficiency=_eta(0.81),
                                  duration=20.0, is_ldes=False, symmetric=True),
        ),
    ]
    return EnergySystem.build(
        zones=[Zone(id="Z1", member_of="sys")],
        resources=resources, lines=[],
        demand={"Z1": demand},
        vre_profiles={"solar_1": solar, "wind_1": wind},
        hours=hours, crm_margin=0.4,
    )


def nonmonotonic_audit_case(power_mw=100.0, energy_mwh=200.0):
    """Six-day toy whose optimal representative dispatch is non-monotonic.

    Day types: C charges from cheap solar, D discharges into solar-free
    evenings, and the dip day serves a morning spike before any solar arrives
    and recharges at midday. The year sequence C, dip, D, D, dip, C puts one
    dip copy right after the charge day (high inter-period state) and one
    after two discharge days (low state), so decomposed bookkeeping that only
    checks period boundaries books phantom energy mid-period.

    Returns (system, rps) with a hand-built mapping; the spike needs more
    energy than the store physically holds, which the original decomposition
    happily serves.
    """
    tau, ndays = 24, 6
    hours = tau * ndays
    base = np.full(tau, 20.0)

    day_c = base.copy()
    day_dip = base.copy()
    day_dip[5:9] += power_mw  # morning spike, storage-sized
    day_d = base + 15.0
    sol_c = np.zeros(tau)
    sol_c[8:18] = 1.0
    sol_dip = np.zeros(tau)
    sol_dip[10:17] = 1.0
    sol_d = np.zeros(tau)

    day_order = [day_c, day_dip, day_d, day_d, day_dip, day_c]
    sol_order = [sol_c, sol_dip, sol_d, sol_d, sol_dip, sol_c]
    demand = np.concatenate(day_order)
    solar = np.concatenate(sol_order)

    resources = [
        Resource(id="ct", zone="Z1", kind="thermal", fixed_cost=10_000.0,
                 variable_cost=1000.0, crm_derate=0.95),
        Resource(id="solar_1", zone="Z1", kind=VRE, tech="solar",
                 fixed_cost=1_000.0, crm_derate=0.8),
        Resource(
            id="ldes", zone="Z1", kind="storage", fixed_cost=0.0, crm_derate=0.8,
            existing_capacity=power_mw, max_capacity=power_mw,
            storage=StorageParams(charge_efficiency=1.0, discharge_efficiency=1.0,
                                  duration=energy_mwh / power_mw, is_ldes=True, symmetric=True),
        ),
    ]
    system = EnergySystem.build(
        zones=[Zone(id="Z1", member_of="sys")],
        resources=resources, lines=[],
        demand={"Z1": demand},
        vre_profiles={"solar_1": solar},
        hours=hours, crm_margin=0.0,
    )
    partition = PeriodPartition.make(hours, tau)
    rps = RepresentativePeriodSet(
        partition=partition,
        representatives=(0, 1, 2),
        mapping=np.array([0, 1, 2, 2, 1, 0]),
        weights={0: 2, 1: 2, 2: 2},
        extreme_flags={},
    )
    return system, rps


def write_fixture(system: EnergySystem, out_dir: str | Path, name: str,
                  reduction: dict | None = None, model: dict | None = None) -> Path:
    """Write a loadable config + CSV bundle for the CLI."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    demand_csv = f"{name}_demand.csv"
    vre_csv = f"{name}_vre.csv" if system.vre_profiles else None
    write_series_csv(out_dir / demand_csv, system.demand, system.hours)
    if vre_csv:
        write_series_csv(out_dir / vre_csv, system.vre_profiles, system.hours)

    def res_table(r: Resource) -> dict:
        d = {"id": r.id, "zone": r.zone, "kind": r.kind,
             "fixed_cost": r.fixed_cost, "variable_cost": r.variable_cost,
             "energy_cost": r.energy_cost, "emissions_rate": r.emissions_rate,
             "crm_derate": r.crm_derate, "max_capacity": float(r.max_capacity),
             "existing_capacity": r.existing_capacity}
        if r.tech:
            d["tech"] = r.tech
        if r.storage:
            d["storage"] = {
                "charge_efficiency": r.storage.charge_efficiency,
                "discharge_efficiency": r.storage.discharge_efficiency,
                "self_discharge": r.storage.self_discharge,
                "duration": r.storage.duration,
                "is_ldes": r.storage.is_ldes,
                "symmetric": r.storage.symmetric,
            }
        return d

    policy = system.emissions_policy
    policy_table = {"kind": policy.kind}
    if policy.kind == "cap":
        policy_table["tons"] = policy.cap_tons
    elif policy.kind == "price":
        policy_table["per_ton"] = policy.price_per_ton

    doc = {
        "system": {
            "hours": system.hours,
            "crm_margin": system.crm_margin,
            "voll": system.voll,
            "emissions_policy": policy_table,
            "demand_csv": demand_csv,
            "vre_profiles_csv": vre_csv,
            "zones": [{"id": z.id, "member_of": z.member_of} for z in system.zones],
            "resources": [res_table(r) for r in system.resources],
            "lines": [
                {"id": ln.id, "from_zone": ln.from_zone, "to_zone": ln.to_zone,
                 "capacity": ln.capacity, "expandable": ln.expandable,
                 "expansion_cost": ln.expansion_cost, "loss_fraction": ln.loss_fraction}
                for ln in system.lines
            ],
        },
        "reduction": reduction or {"period_length": 24, "n_periods": 20, "seed": 0},
        "model": model or {
            "ldes_linking": True, "virtual_discharge": True, "crm_enabled": True,
            "forced_ldes": {"resource": "ldes", "capacity": 10.0, "duration": 200.0},
        },
    }
    config_path = out_dir / f"{name}.yaml"
    config_path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return config_path
