"""Capacity-expansion LP assembly over linked representative periods.

Variable families (registry names in brackets):

* [cap] installed power capacity per resource, [energy_cap] installed energy
  capacity per storage resource, [line_new] transmission expansion.
* [dispatch]/[charge]/[soc] hourly operation per representative period;
  [flow_pos]/[flow_neg] directional line flows; [nse] unserved energy.
* [dq]/[q_inter] inter-period state-of-charge tracking for long-duration
  storage when period linking is on.
* [vdischarge]/[vcharge]/[vsoc] virtual reserve-margin contributions of
  storage when the virtual-discharge formulation is on.

Operational costs are weighted by the owning representative period's cluster
size and rescaled for dropped trailing hours, so the objective is an annual
system cost. Unserved energy (and reserve-margin shortfall) is priced at the
system VOLL, which keeps every model feasible and every dual well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import SENSE_EQ, SENSE_GE, SENSE_LE, LinearProgram, LpBuilder
from .reduction import RepresentativePeriodSet
from .registry import Registry
from .system import STORAGE, THERMAL, VRE, EnergySystem, Resource

IMPROVED = "improved"
ORIGINAL = "original"


class ModelError(Exception):
    pass


class InconsistentReduction(ModelError):
    pass


class MissingResource(ModelError):
    pass


class LinkingWithoutMapping(ModelError):
    pass


class RegistryOverflow(ModelError):
    pass


@dataclass(frozen=True)
class ForcedLdes:
    resource: str
    capacity: float  # MW, the equality RHS whose dual is the marginal value
    duration: float  # hours of energy per MW

    def __post_init__(self):
        if self.capacity < 0:
            raise ModelError("forced capacity must be >= 0")
        if self.duration <= 0:
            raise ModelError("forced duration must be > 0")


@dataclass(frozen=True)
class ModelConfig:
    ldes_linking: bool = True
    virtual_discharge: bool = True
    crm_enabled: bool = True
    forced_ldes: ForcedLdes | None = None
    objective_scale: float = 1.0
    emissions_override: object | None = None  # EmissionsPolicy, replaces the system's
    linking_formulation: str = IMPROVED

    def __post_init__(self):
        if self.objective_scale <= 0:
            raise ModelError("objective_scale must be > 0")
        if self.linking_formulation not in (IMPROVED, ORIGINAL):
            raise ModelError(f"unknown linking formulation {self.linking_formulation!r}")
        if self.linking_formulation == ORIGINAL and self.virtual_discharge and self.crm_enabled:
            raise ModelError("original linking decomposition does not compose with virtual discharge")


class ModelBuilder:
    """Single-use builder: construct, call build(), discard."""

    def __init__(self, system: EnergySystem, rps: RepresentativePeriodSet, config: ModelConfig):
        if rps.partition.hours != system.hours:
            raise InconsistentReduction(
                f"reduction built for {rps.partition.hours} hours, system has {system.hours}")
        self.system = system
        self.rps = rps
        self.config = config
        self.b = LpBuilder()
        self.vars = Registry("var")
        self.cons = Registry("con")

        self.reps = list(rps.representatives)
        self.M = len(self.reps)
        self.tau = rps.partition.period_length
        self.N = rps.partition.n_input_periods
        self.w = np.array([rps.weights[r] for r in self.reps], dtype=float)
        self.annual = rps.partition.annual_scale
        self.scale = config.objective_scale
        self.pos_of_rep = {r: p for p, r in enumerate(self.reps)}

        self.demand_rep = {
            z.id: np.stack([system.demand[z.id][rps.partition.hour_slice(r)] for r in self.reps])
            for z in system.zones
        }
        self.cf_rep = {
            r.id: np.stack([system.vre_profiles[r.id][rps.partition.hour_slice(m)] for m in self.reps])
            for r in system.resources if r.kind == VRE
        }
        self.policy = config.emissions_override or system.emissions_policy
        self.storage = [r for r in system.resources if r.kind == STORAGE]
        self.linked = [r for r in self.storage
                       if config.ldes_linking and r.storage.is_ldes]
        self.virtual = [r for r in self.storage
                        if config.crm_enabled and config.virtual_discharge]

    def _op_weight(self, unit_cost: float) -> np.ndarray:
        """Objective coefficient block (M, tau) for an hourly operational cost."""
        return np.repeat((self.scale * self.annual * unit_cost * self.w)[:, None], self.tau, axis=1)

    def _is_original(self, r: Resource) -> bool:
        return (r in self.linked) and self.config.linking_formulation == ORIGINAL

    # -- columns ----------------------------------------------------------

    def _add_columns(self):
        b, V = self.b, self.vars
        M, tau, N = self.M, self.tau, self.N
        for r in self.system.resources:
            V.add("cap", r.id)
            b.add_cols(1, obj=self.scale * r.fixed_cost, lb=r.existing_capacity, ub=r.max_capacity)
        for s in self.storage:
            V.add("energy_cap", s.id)
            b.add_cols(1, obj=self.scale * s.energy_cost)
        for ln in self.system.lines:
            if ln.expandable:
                V.add("line_new", ln.id)
                b.add_cols(1, obj=self.scale * ln.expansion_cost)

        price = self.policy.price_per_ton if self.policy.kind == "price" else 0.0
        for r in self.system.resources:
            V.add("dispatch", r.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau, obj=self._op_weight(r.variable_cost + price * r.emissions_rate).ravel())
        for s in self.storage:
            V.add("charge", s.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau)
        for s in self.storage:
            V.add("soc", s.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau, lb=(-np.inf if self._is_original(s) else 0.0))
        for ln in self.system.lines:
            V.add("flow_pos", ln.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau)
            V.add("flow_neg", ln.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau)
        for z in self.system.zones:
            V.add("nse", z.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau, obj=self._op_weight(self.system.voll).ravel())
        for s in self.linked:
            if self.config.linking_formulation == IMPROVED:
                V.add("dq", s.id, (M,), ("period",))
                b.add_cols(M, lb=-np.inf)
            V.add("q_inter", s.id, (N,), ("input_period",))
            b.add_cols(N)
        for s in self.virtual:
            V.add("vdischarge", s.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau)
            V.add("vcharge", s.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau)
            V.add("vsoc", s.id, (M, tau), ("period", "hour"))
            b.add_cols(M * tau)
        if self.config.crm_enabled:
            for g in self.system.crm_groups():
                V.add("crm_slack", g, (M, tau), ("period", "hour"))
                b.add_cols(M * tau, obj=self._op_weight(self.system.voll).ravel())

    # -- rows -------------------------------------------------------------

    def _add_balance(self):
        b, V, C = self.b, self.vars, self.cons
        ones = 1.0
        for z in self.system.zones:
            C.add("balance", z.id, (self.M, self.tau), ("period", "hour"))
            R = b.add_rows(self.M * self.tau, SENSE_EQ, self.demand_rep[z.id].ravel())
            b.put(R, V.block("nse", z.id).ravel(), ones)
            for r in self.system.resources:
                if r.zone != z.id:
                    continue
                b.put(R, V.block("dispatch", r.id).ravel(), 1.0)
                if r.kind == STORAGE:
                    b.put(R, V.block("charge", r.id).ravel(), -1.0)
            for ln in self.system.lines:
                eff = 1.0 - ln.loss_fraction
                if ln.from_zone == z.id:
                    b.put(R, V.block("flow_pos", ln.id).ravel(), -1.0)
                    b.put(R, V.block("flow_neg", ln.id).ravel(), eff)
                elif ln.to_zone == z.id:
                    b.put(R, V.block("flow_pos", ln.id).ravel(), eff)
                    b.put(R, V.block("flow_neg", ln.id).ravel(), -1.0)

    def _add_dispatch_limits(self):
        b, V, C = self.b, self.vars, self.cons
        MT = self.M * self.tau
        for r in self.system.resources:
            if r.kind == THERMAL:
                C.add("thermal_max", r.id, (self.M, self.tau), ("period", "hour"))
                R = b.add_rows(MT, SENSE_LE, 0.0)
                b.put(R, V.block("dispatch", r.id).ravel(), 1.0)
                b.put(R, V.index("cap", r.id), -1.0)
            elif r.kind == VRE:
                C.add("vre_max", r.id, (self.M, self.tau), ("period", "hour"))
                R = b.add_rows(MT, SENSE_LE, 0.0)
                b.put(R, V.block("dispatch", r.id).ravel(), 1.0)
                b.put(R, V.index("cap", r.id), -self.cf_rep[r.id].ravel())
        for ln in self.system.lines:
            C.add("line_cap", ln.id, (self.M, self.tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_LE, ln.capacity)
            b.put(R, V.block("flow_pos", ln.id).ravel(), 1.0)
            b.put(R, V.block("flow_neg", ln.id).ravel(), 1.0)
            if ln.expandable:
                b.put(R, V.index("line_new", ln.id), -1.0)

    def add_storage_intra(self, r: Resource):
        """Power coupling, inventory balance, capacity and discharge-rate links
        for one storage resource. The start-of-period row wraps within the
        representative period unless the resource is LDES-linked, in which case
        the wrap carries the inter-period delta (handled in add_ldes_linking)."""
        if r.kind != STORAGE:
            raise ModelError(f"{r.id} is not storage")
        b, V, C = self.b, self.vars, self.cons
        M, tau = self.M, self.tau
        MT = M * tau
        sp = r.storage
        virt = r in self.virtual

        TH = V.block("dispatch", r.id)
        CH = V.block("charge", r.id)
        SOC = V.block("soc", r.id)
        cap = V.index("cap", r.id)
        ecap = V.index("energy_cap", r.id)

        if sp.symmetric:
            C.add("sto_power", r.id, (M, tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_LE, 0.0)
            b.put(R, TH.ravel(), 1.0)
            b.put(R, CH.ravel(), 1.0)
            if virt:
                b.put(R, V.block("vdischarge", r.id).ravel(), 1.0)
                b.put(R, V.block("vcharge", r.id).ravel(), 1.0)
            b.put(R, cap, -1.0)
        else:
            C.add("sto_power_dis", r.id, (M, tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_LE, 0.0)
            b.put(R, TH.ravel(), 1.0)
            if virt:
                b.put(R, V.block("vdischarge", r.id).ravel(), 1.0)
            b.put(R, cap, -1.0)
            C.add("sto_power_chg", r.id, (M, tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_LE, 0.0)
            b.put(R, CH.ravel(), 1.0)
            if virt:
                b.put(R, V.block("vcharge", r.id).ravel(), 1.0)
            b.put(R, cap, -1.0)

        keep = 1.0 - sp.self_discharge
        original = self._is_original(r)
        C.add("soc_balance", r.id, (M, tau), ("period", "hour"))
        R = b.add_rows(MT, SENSE_EQ, 0.0).reshape(M, tau)
        b.put(R, SOC, 1.0)
        b.put(R[:, 1:], SOC[:, :-1], -keep)
        if not original:
            b.put(R[:, 0], SOC[:, tau - 1], -keep)
            if r in self.linked:
                b.put(R[:, 0], V.block("dq", r.id).ravel(), keep)
        b.put(R, TH, 1.0 / sp.discharge_efficiency)
        b.put(R, CH, -sp.charge_efficiency)

        if not original:
            C.add("soc_cap", r.id, (M, tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_LE, 0.0)
            b.put(R, SOC.ravel(), 1.0)
            b.put(R, ecap, -1.0)

            # discharge plus virtual discharge limited by last timestep's inventory
            C.add("discharge_soc", r.id, (M, tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_LE, 0.0).reshape(M, tau)
            b.put(R, TH, 1.0)
            if virt:
                b.put(R, V.block("vdischarge", r.id), 1.0)
            b.put(R[:, 1:], SOC[:, :-1], -1.0)
            b.put(R[:, 0], SOC[:, tau - 1], -1.0)

        if sp.duration is not None:
            C.add("duration_link", r.id)
            i = b.add_rows(1, SENSE_EQ, 0.0)
            b.put(i, ecap, 1.0)
            b.put(i, cap, -sp.duration)

        if virt:
            VS = V.block("vsoc", r.id)
            VD = V.block("vdischarge", r.id)
            VC = V.block("vcharge", r.id)
            C.add("vsoc_balance", r.id, (M, tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_EQ, 0.0).reshape(M, tau)
            b.put(R, VS, 1.0)
            b.put(R[:, 1:], VS[:, :-1], -keep)
            b.put(R[:, 0], VS[:, tau - 1], -keep)
            b.put(R, VD, -1.0 / sp.discharge_efficiency)
            b.put(R, VC, sp.charge_efficiency)
            C.add("vsoc_subset", r.id, (M, tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_LE, 0.0)
            b.put(R, VS.ravel(), 1.0)
            b.put(R, SOC.ravel(), -1.0)

    def add_ldes_linking(self, r: Resource):
        """Inter-period state-of-charge tracking for one LDES resource.

        Improved formulation: the representative period's inventory is the true
        state of charge; the within-period wrap (emitted by add_storage_intra)
        subtracts the period's net change dq, and these rows chain the change
        across the year:

        * q_link, for input periods that are themselves representatives:
          Q[w] = soc[end of rep period] - dq[rep period]
        * q_chain, for every input period, cyclic:
          Q[n+1] = Q[n] + dq[rep(n)]
        * q_cap: Q[n] <= installed energy capacity.

        Original decomposition (for the feasibility audit): the intra inventory
        is relative with a free sign, and the chain decays and accumulates it
        directly: Q[n+1] = keep^tau * Q[n] + soc[end of rep period].
        """
        if not self.config.ldes_linking:
            raise LinkingWithoutMapping("ldes_linking disabled in config")
        if r not in self.linked:
            raise ModelError(f"{r.id} is not an LDES resource")
        b, V, C = self.b, self.vars, self.cons
        N = self.N
        mapping = self.rps.mapping
        SOC = V.block("soc", r.id)
        Q = V.block("q_inter", r.id).ravel()
        ecap = V.index("energy_cap", r.id)
        keep = 1.0 - r.storage.self_discharge

        if self.config.linking_formulation == IMPROVED:
            DQ = V.block("dq", r.id).ravel()
            C.add("q_link", r.id, (self.M,), ("period",))
            R = b.add_rows(self.M, SENSE_EQ, 0.0)
            for p, rep in enumerate(self.reps):
                b.put(R[p], Q[rep], 1.0)
                b.put(R[p], SOC[p, self.tau - 1], -1.0)
                b.put(R[p], DQ[p], 1.0)
            C.add("q_chain", r.id, (N,), ("input_period",))
            R = b.add_rows(N, SENSE_EQ, 0.0)
            nxt = np.roll(np.arange(N), -1)
            b.put(R, Q[nxt], 1.0)
            b.put(R, Q, -1.0)
            pos = np.array([self.pos_of_rep[int(m)] for m in mapping])
            b.put(R, DQ[pos], -1.0)
        else:
            C.add("q_chain", r.id, (N,), ("input_period",))
            R = b.add_rows(N, SENSE_EQ, 0.0)
            nxt = np.roll(np.arange(N), -1)
            b.put(R, Q[nxt], 1.0)
            b.put(R, Q, -(keep ** self.tau))
            pos = np.array([self.pos_of_rep[int(m)] for m in mapping])
            b.put(R, SOC[pos, self.tau - 1], -1.0)

        C.add("q_cap", r.id, (N,), ("input_period",))
        R = b.add_rows(N, SENSE_LE, 0.0)
        b.put(R, Q, 1.0)
        b.put(R, ecap, -1.0)

    def add_crm(self):
        """Reserve-margin rows per zone group and timestep: derated firm
        capacity, derated available VRE, and storage net (virtual plus real)
        discharge must cover demand plus the margin. Shortfall is priced at
        VOLL via crm_slack so the model stays feasible."""
        b, V, C = self.b, self.vars, self.cons
        MT = self.M * self.tau
        margin = 1.0 + self.system.crm_margin
        for g, zone_ids in self.system.crm_groups().items():
            rhs = margin * np.sum([self.demand_rep[z] for z in zone_ids], axis=0)
            C.add("crm", g, (self.M, self.tau), ("period", "hour"))
            R = b.add_rows(MT, SENSE_GE, rhs.ravel())
            b.put(R, V.block("crm_slack", g).ravel(), 1.0)
            for r in self.system.resources:
                if r.zone not in zone_ids or r.crm_derate == 0.0:
                    continue
                if r.kind == THERMAL:
                    b.put(R, V.index("cap", r.id), r.crm_derate)
                elif r.kind == VRE:
                    b.put(R, V.index("cap", r.id), r.crm_derate * self.cf_rep[r.id].ravel())
                else:
                    e = r.crm_derate
                    b.put(R, V.block("dispatch", r.id).ravel(), e)
                    b.put(R, V.block("charge", r.id).ravel(), -e)
                    if r in self.virtual:
                        b.put(R, V.block("vdischarge", r.id).ravel(), e)
                        b.put(R, V.block("vcharge", r.id).ravel(), -e)

    def add_emissions(self):
        """Cap emits a dual-extractable row; price was already folded into the
        dispatch objective; none emits nothing."""
        if self.policy.kind != "cap":
            return
        b, V, C = self.b, self.vars, self.cons
        C.add("emissions_cap", "")
        i = b.add_rows(1, SENSE_LE, self.policy.cap_tons)
        wmat = self.annual * np.repeat(self.w[:, None], self.tau, axis=1)
        for r in self.system.resources:
            if r.emissions_rate > 0:
                b.put(i, V.block("dispatch", r.id).ravel(), r.emissions_rate * wmat.ravel())

    def add_forced_capacity(self):
        """Pin the target resource's power capacity to K on a registered
        equality row. Energy capacity follows through the duration link, so
        the row's dual is the full marginal system value of one more MW."""
        fl = self.config.forced_ldes
        if fl is None:
            return
        try:
            r = self.system.resource(fl.resource)
        except KeyError:
            raise MissingResource(fl.resource) from None
        if r.kind != STORAGE:
            raise ModelError(f"forced resource {r.id} must be storage")
        if r.fixed_cost != 0.0 or r.energy_cost != 0.0:
            raise ModelError(f"forced resource {r.id} must have zero fixed and energy cost")
        if fl.capacity < r.existing_capacity or fl.capacity > r.max_capacity:
            raise ModelError(f"forced capacity {fl.capacity} outside [{r.existing_capacity}, "
                             f"{r.max_capacity}] for {r.id}")
        if r.storage.duration is not None and r.storage.duration != fl.duration:
            raise ModelError(f"forced duration {fl.duration} conflicts with resource duration "
                             f"{r.storage.duration} for {r.id}")
        b, V, C = self.b, self.vars, self.cons
        C.add("forced_cap", r.id)
        i = b.add_rows(1, SENSE_EQ, fl.capacity)
        b.put(i, V.index("cap", r.id), 1.0)
        if r.storage.duration is None:
            C.add("duration_link", r.id)
            j = b.add_rows(1, SENSE_EQ, 0.0)
            b.put(j, V.index("energy_cap", r.id), 1.0)
            b.put(j, V.index("cap", r.id), -fl.duration)

    def build(self) -> tuple[LinearProgram, Registry, Registry]:
        self._add_columns()
        self._add_balance()
        self._add_dispatch_limits()
        for s in self.storage:
            self.add_storage_intra(s)
        for s in self.linked:
            self.add_ldes_linking(s)
        if self.config.crm_enabled:
            self.add_crm()
        self.add_emissions()
        self.add_forced_capacity()

        lp = self.b.build()
        lp.col_names = self.vars.names()
        lp.row_names = self.cons.names()
        try:
            self.vars.check_covers(lp.n_cols)
            self.cons.check_covers(lp.n_rows)
        except Exception as exc:
            raise RegistryOverflow(str(exc)) from exc
        return lp, self.vars, self.cons


def build_model(system: EnergySystem, rps: RepresentativePeriodSet,
                config: ModelConfig) -> tuple[LinearProgram, Registry, Registry]:
    return ModelBuilder(system, rps, config).build()
