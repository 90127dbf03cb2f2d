"""Power-system domain types, validation, and spatial aggregation.

Units throughout: power MW, energy MWh, fixed cost $/MW-yr, storage energy
cost $/MWh-yr, variable cost $/MWh, emissions tCO2/MWh. One weather year of
hourly series; all series share the system hour count.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

THERMAL = "thermal"
VRE = "vre"
STORAGE = "storage"
RESOURCE_KINDS = (THERMAL, VRE, STORAGE)


class SystemError_(Exception):
    pass


class UnmappedZone(SystemError_):
    def __init__(self, zone_id):
        self.zone_id = zone_id
        super().__init__(f"zone {zone_id!r} missing from grouping")


@dataclass(frozen=True)
class Zone:
    id: str
    peak_demand: float = 0.0  # derived at system build
    member_of: str | None = None  # CRM group tag; untagged zones form singleton groups


@dataclass(frozen=True)
class StorageParams:
    charge_efficiency: float
    discharge_efficiency: float
    self_discharge: float = 0.0  # fraction lost per hour of stored energy
    duration: float | None = None  # fixed energy/power ratio in hours
    is_ldes: bool = False  # participates in inter-period linking
    symmetric: bool = True  # charge and discharge share one power rating

    @property
    def round_trip_efficiency(self) -> float:
        return self.charge_efficiency * self.discharge_efficiency


@dataclass(frozen=True)
class Resource:
    id: str
    zone: str
    kind: str
    fixed_cost: float = 0.0
    variable_cost: float = 0.0
    energy_cost: float = 0.0  # $/MWh-yr of storage energy capacity
    emissions_rate: float = 0.0
    crm_derate: float = 0.95
    max_capacity: float = np.inf
    existing_capacity: float = 0.0
    tech: str | None = None  # "solar"/"wind" tag used by extreme-period selection
    storage: StorageParams | None = None


@dataclass(frozen=True)
class TransmissionLine:
    id: str
    from_zone: str
    to_zone: str
    capacity: float
    expandable: bool = False
    expansion_cost: float = 0.0
    loss_fraction: float = 0.0


@dataclass(frozen=True)
class EmissionsPolicy:
    kind: str = "none"  # "cap" | "price" | "none"
    cap_tons: float = np.inf
    price_per_ton: float = 0.0

    @staticmethod
    def cap(tons: float) -> "EmissionsPolicy":
        return EmissionsPolicy(kind="cap", cap_tons=float(tons))

    @staticmethod
    def price(dollars_per_ton: float) -> "EmissionsPolicy":
        return EmissionsPolicy(kind="price", price_per_ton=float(dollars_per_ton))

    @staticmethod
    def none() -> "EmissionsPolicy":
        return EmissionsPolicy(kind="none")


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(f"{v.code} [{v.subject}]: {v.message}" for v in self.violations)


def _frozen(arr) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(arr, dtype=float))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class EnergySystem:
    """Immutable after build; safe to share across concurrent scenario solves."""

    zones: tuple[Zone, ...]
    resources: tuple[Resource, ...]
    lines: tuple[TransmissionLine, ...]
    demand: dict[str, np.ndarray]  # zone id -> hourly MW
    vre_profiles: dict[str, np.ndarray]  # resource id -> hourly capacity factor
    hours: int
    crm_margin: float = 0.0
    emissions_policy: EmissionsPolicy = field(default_factory=EmissionsPolicy.none)
    voll: float = 50_000.0  # $/MWh penalty on unserved energy

    @staticmethod
    def build(zones, resources, lines, demand, vre_profiles, hours, crm_margin=0.0,
              emissions_policy=None, voll=50_000.0) -> "EnergySystem":
        demand = {z: _frozen(v) for z, v in demand.items()}
        vre_profiles = {r: _frozen(v) for r, v in vre_profiles.items()}
        zones = tuple(
            replace(z, peak_demand=float(np.max(demand[z.id])) if z.id in demand and len(demand[z.id]) else 0.0)
            for z in zones
        )
        return EnergySystem(
            zones=zones,
            resources=tuple(resources),
            lines=tuple(lines),
            demand=demand,
            vre_profiles=vre_profiles,
            hours=int(hours),
            crm_margin=float(crm_margin),
            emissions_policy=emissions_policy or EmissionsPolicy.none(),
            voll=float(voll),
        )

    def zone_ids(self) -> list[str]:
        return [z.id for z in self.zones]

    def resource(self, rid: str) -> Resource:
        for r in self.resources:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def storage_resources(self) -> list[Resource]:
        return [r for r in self.resources if r.kind == STORAGE]

    def crm_groups(self) -> dict[str, list[str]]:
        """Zones sharing a member_of tag form one reserve-margin group."""
        groups: dict[str, list[str]] = {}
        for z in self.zones:
            key = z.member_of if z.member_of is not None else f"__zone__{z.id}"
            groups.setdefault(key, []).append(z.id)
        return groups

    def total_demand_energy(self) -> float:
        return float(sum(v.sum() for v in self.demand.values()))


def validate_system(system: EnergySystem) -> ValidationReport:
    """Every invariant violation as a machine-readable code; empty iff valid."""
    v: list[Violation] = []
    zone_ids = [z.id for z in system.zones]
    zone_set = set(zone_ids)
    if len(zone_set) != len(zone_ids):
        dupes = sorted({z for z in zone_ids if zone_ids.count(z) > 1})
        v.append(Violation("DUPLICATE_ID", ",".join(dupes), "duplicate zone id"))

    for z in system.zones:
        series = system.demand.get(z.id)
        if series is None:
            v.append(Violation("MISSING_DEMAND", z.id, "zone has no demand series"))
            continue
        if len(series) != system.hours:
            v.append(Violation("LENGTH_MISMATCH", z.id,
                               f"demand has {len(series)} rows, expected {system.hours}"))
        if np.any(series < 0):
            v.append(Violation("NEGATIVE_DEMAND", z.id, "demand below zero"))
        if z.peak_demand <= 0:
            v.append(Violation("NONPOSITIVE_PEAK", z.id, "peak demand must be > 0"))

    rids = [r.id for r in system.resources]
    if len(set(rids)) != len(rids):
        dupes = sorted({r for r in rids if rids.count(r) > 1})
        v.append(Violation("DUPLICATE_ID", ",".join(dupes), "duplicate resource id"))

    for r in system.resources:
        if r.kind not in RESOURCE_KINDS:
            v.append(Violation("UNKNOWN_KIND", r.id, f"kind {r.kind!r}"))
            continue
        if r.zone not in zone_set:
            v.append(Violation("UNKNOWN_ZONE", r.id, f"references zone {r.zone!r}"))
        if min(r.fixed_cost, r.variable_cost, r.energy_cost) < 0:
            v.append(Violation("NEGATIVE_COST", r.id, "costs must be >= 0"))
        if not 0.0 <= r.crm_derate <= 1.0:
            v.append(Violation("DERATE_RANGE", r.id, f"crm_derate {r.crm_derate}"))
        if r.existing_capacity < 0 or r.max_capacity < r.existing_capacity:
            v.append(Violation("CAPACITY_RANGE", r.id, "need 0 <= existing <= max"))
        if r.kind == VRE:
            prof = system.vre_profiles.get(r.id)
            if prof is None:
                v.append(Violation("MISSING_PROFILE", r.id, "VRE resource has no capacity-factor series"))
            else:
                if len(prof) != system.hours:
                    v.append(Violation("LENGTH_MISMATCH", r.id,
                                       f"profile has {len(prof)} rows, expected {system.hours}"))
                if np.any(prof < 0) or np.any(prof > 1):
                    v.append(Violation("PROFILE_RANGE", r.id, "capacity factors outside [0, 1]"))
        if r.kind == STORAGE:
            sp = r.storage
            if sp is None:
                v.append(Violation("STORAGE_PARAMS_MISSING", r.id, "storage resource without parameters"))
                continue
            if not (0 < sp.charge_efficiency <= 1) or not (0 < sp.discharge_efficiency <= 1):
                v.append(Violation("EFFICIENCY_RANGE", r.id,
                                   f"charge {sp.charge_efficiency}, discharge {sp.discharge_efficiency}"))
            if not 0 <= sp.self_discharge < 1:
                v.append(Violation("SELF_DISCHARGE_RANGE", r.id, f"self_discharge {sp.self_discharge}"))
            if sp.duration is not None and sp.duration <= 0:
                v.append(Violation("DURATION_NONPOSITIVE", r.id, f"duration {sp.duration}"))
        elif r.storage is not None:
            v.append(Violation("STORAGE_PARAMS_UNEXPECTED", r.id, f"{r.kind} resource with storage params"))

    lids = [ln.id for ln in system.lines]
    if len(set(lids)) != len(lids):
        dupes = sorted({x for x in lids if lids.count(x) > 1})
        v.append(Violation("DUPLICATE_ID", ",".join(dupes), "duplicate line id"))
    for ln in system.lines:
        if ln.from_zone == ln.to_zone:
            v.append(Violation("SELF_LOOP", ln.id, "from_zone equals to_zone"))
        for end in (ln.from_zone, ln.to_zone):
            if end not in zone_set:
                v.append(Violation("UNKNOWN_ZONE", ln.id, f"references zone {end!r}"))
        if ln.capacity < 0:
            v.append(Violation("CAPACITY_RANGE", ln.id, "line capacity < 0"))
        if not 0 <= ln.loss_fraction < 1:
            v.append(Violation("LOSS_RANGE", ln.id, f"loss_fraction {ln.loss_fraction}"))
        if ln.expansion_cost < 0:
            v.append(Violation("NEGATIVE_COST", ln.id, "expansion_cost < 0"))

    if system.crm_margin < 0:
        v.append(Violation("MARGIN_NEGATIVE", "system", f"crm_margin {system.crm_margin}"))
    if system.voll <= 0:
        v.append(Violation("VOLL_NONPOSITIVE", "system", f"voll {system.voll}"))
    return ValidationReport(tuple(v))


def aggregate_zones(system: EnergySystem, grouping: Mapping[str, str]) -> EnergySystem:
    """Collapse zones into groups: demand summed, resources reassigned (never
    merged), intra-group lines dropped, parallel inter-group lines merged with
    capacity-weighted loss."""
    for z in system.zones:
        if z.id not in grouping:
            raise UnmappedZone(z.id)

    group_order: list[str] = []
    members: dict[str, list[Zone]] = {}
    for z in system.zones:
        g = grouping[z.id]
        if g not in members:
            members[g] = []
            group_order.append(g)
        members[g].append(z)

    zones = []
    demand = {}
    for g in group_order:
        tags = {z.member_of for z in members[g]}
        zones.append(Zone(id=g, member_of=tags.pop() if len(tags) == 1 else None))
        demand[g] = np.sum([system.demand[z.id] for z in members[g]], axis=0)

    resources = [replace(r, zone=grouping[r.zone]) for r in system.resources]

    merged: dict[frozenset, list[TransmissionLine]] = {}
    merged_order: list[frozenset] = []
    orientation: dict[frozenset, tuple[str, str]] = {}
    for ln in system.lines:
        gf, gt = grouping[ln.from_zone], grouping[ln.to_zone]
        if gf == gt:
            continue
        key = frozenset((gf, gt))
        if key not in merged:
            merged[key] = []
            merged_order.append(key)
            orientation[key] = (gf, gt)
        merged[key].append(ln)

    lines = []
    for key in merged_order:
        group = merged[key]
        gf, gt = orientation[key]
        total = sum(ln.capacity for ln in group)
        if total > 0:
            loss = sum(ln.capacity * ln.loss_fraction for ln in group) / total
            exp_cost = sum(ln.capacity * ln.expansion_cost for ln in group) / total
        else:
            loss = float(np.mean([ln.loss_fraction for ln in group]))
            exp_cost = float(np.mean([ln.expansion_cost for ln in group]))
        lines.append(TransmissionLine(
            id=f"{gf}__{gt}",
            from_zone=gf,
            to_zone=gt,
            capacity=total,
            expandable=any(ln.expandable for ln in group),
            expansion_cost=exp_cost,
            loss_fraction=loss,
        ))

    return EnergySystem.build(
        zones=zones,
        resources=resources,
        lines=lines,
        demand=demand,
        vre_profiles=dict(system.vre_profiles),
        hours=system.hours,
        crm_margin=system.crm_margin,
        emissions_policy=system.emissions_policy,
        voll=system.voll,
    )
