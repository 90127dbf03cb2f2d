"""Time-domain reduction: partition the year, inject extreme periods, cluster.

Representative periods are always real input periods (medoids), which the
inter-period linking constraints require. Extreme periods (minimum solar,
minimum wind, maximum load) enter the clustering as frozen singleton seeds:
they keep their own centroid, remain representatives, and pick up the weight
of whatever other periods land closest to them.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .system import VRE, EnergySystem


class ReductionError(Exception):
    pass


class KTooLarge(ReductionError):
    pass


class EmptySystemSeries(ReductionError):
    pass


@dataclass(frozen=True)
class PeriodPartition:
    hours: int
    period_length: int
    n_input_periods: int
    dropped_hours: int

    @staticmethod
    def make(hours: int, period_length: int) -> "PeriodPartition":
        if period_length <= 0 or period_length > hours:
            raise ReductionError(f"period_length {period_length} invalid for {hours} hours")
        n = hours // period_length
        return PeriodPartition(hours=hours, period_length=period_length,
                               n_input_periods=n, dropped_hours=hours - n * period_length)

    def hour_slice(self, period: int) -> slice:
        start = period * self.period_length
        return slice(start, start + self.period_length)

    @property
    def annual_scale(self) -> float:
        """Rescale for dropped trailing hours so annual cost magnitudes survive."""
        return self.hours / (self.n_input_periods * self.period_length)


@dataclass(frozen=True)
class RepresentativePeriodSet:
    partition: PeriodPartition
    representatives: tuple[int, ...]  # input-period indices, cluster order
    mapping: np.ndarray  # input period n -> representative period index
    weights: dict[int, int]  # representative -> count of mapped input periods
    extreme_flags: dict[int, bool]  # representative -> injected as an extreme

    def __post_init__(self):
        reps = set(self.representatives)
        if len(reps) != len(self.representatives):
            raise ReductionError("duplicate representatives")
        if len(self.mapping) != self.partition.n_input_periods:
            raise ReductionError("mapping length != n_input_periods")
        if not all(int(m) in reps for m in self.mapping):
            raise ReductionError("mapping targets a non-representative period")
        for r in self.representatives:
            if int(self.mapping[r]) != r:
                raise ReductionError(f"representative {r} does not map to itself")
        if sum(self.weights.values()) != self.partition.n_input_periods:
            raise ReductionError("weights do not sum to n_input_periods")
        if any(r not in reps for r in self.extreme_flags):
            raise ReductionError("extreme flag on non-representative")

    @property
    def n_representatives(self) -> int:
        return len(self.representatives)

    def rep_position(self, rep: int) -> int:
        return self.representatives.index(rep)

    def save_csv(self, base: str | Path) -> tuple[Path, Path]:
        base = Path(base)
        reps_path = base.with_name(base.name + "_reps.csv")
        map_path = base.with_name(base.name + "_map.csv")
        with reps_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["representative", "weight", "extreme"])
            for r in self.representatives:
                w.writerow([r, self.weights[r], int(self.extreme_flags.get(r, False))])
        with map_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["input_period", "representative"])
            for n, m in enumerate(self.mapping):
                w.writerow([n, int(m)])
        return reps_path, map_path

    @staticmethod
    def load_csv(base: str | Path, hours: int, period_length: int) -> "RepresentativePeriodSet":
        base = Path(base)
        partition = PeriodPartition.make(hours, period_length)
        reps, weights, flags = [], {}, {}
        with base.with_name(base.name + "_reps.csv").open(newline="") as fh:
            for row in csv.DictReader(fh):
                r = int(row["representative"])
                reps.append(r)
                weights[r] = int(row["weight"])
                if int(row["extreme"]):
                    flags[r] = True
        mapping = np.zeros(partition.n_input_periods, dtype=int)
        with base.with_name(base.name + "_map.csv").open(newline="") as fh:
            for row in csv.DictReader(fh):
                mapping[int(row["input_period"])] = int(row["representative"])
        return RepresentativePeriodSet(partition=partition, representatives=tuple(reps),
                                       mapping=mapping, weights=weights, extreme_flags=flags)


def _year_series(system: EnergySystem) -> list[np.ndarray]:
    series = [system.demand[z.id] for z in system.zones]
    series += [system.vre_profiles[r.id] for r in system.resources
               if r.kind == VRE and r.id in system.vre_profiles]
    return series


def period_features(system: EnergySystem, partition: PeriodPartition) -> np.ndarray:
    """Feature matrix (n_periods, tau * n_series): per-series min-max normalized
    over the whole year, demand and each VRE profile weighted equally."""
    series = _year_series(system)
    if not series:
        raise EmptySystemSeries("system has neither demand nor VRE series")
    n, tau = partition.n_input_periods, partition.period_length
    blocks = []
    for s in series:
        lo, hi = float(np.min(s)), float(np.max(s))
        norm = (s - lo) / (hi - lo) if hi > lo else np.zeros_like(s)
        blocks.append(norm[: n * tau].reshape(n, tau))
    return np.hstack(blocks)


def select_extreme_periods(system: EnergySystem, partition: PeriodPartition) -> list[int]:
    """Indices of the min-total-solar, min-total-wind, and max-total-demand
    periods, deduplicated; ties break to the lowest index."""
    n, tau = partition.n_input_periods, partition.period_length

    def period_sums(arrays):
        total = np.sum(arrays, axis=0)[: n * tau]
        return total.reshape(n, tau).sum(axis=1)

    out: list[int] = []
    for tech in ("solar", "wind"):
        profs = [system.vre_profiles[r.id] for r in system.resources
                 if r.kind == VRE and r.tech == tech and r.id in system.vre_profiles]
        if not profs:
            warnings.warn(f"no {tech}-tagged VRE resource; skipping {tech} extreme period")
            continue
        out.append(int(np.argmin(period_sums(profs))))
    out.append(int(np.argmax(period_sums(list(system.demand.values())))))

    seen, dedup = set(), []
    for idx in out:
        if idx not in seen:
            seen.add(idx)
            dedup.append(idx)
    return dedup


def _kmeanspp_seeds(X, candidates, k, existing, rng):
    """k-means++ over candidate row indices, respecting already-placed centroids."""
    seeds: list[int] = []
    centroids = list(existing)
    remaining = list(candidates)
    for _ in range(k):
        if centroids:
            d2 = np.min(
                [np.sum((X[remaining] - c) ** 2, axis=1) for c in centroids], axis=0
            )
        else:
            d2 = np.ones(len(remaining))
        total = d2.sum()
        if total > 0:
            pick = int(rng.choice(len(remaining), p=d2 / total))
        else:
            pick = 0  # all candidates coincide with a centroid; take lowest index
        idx = remaining.pop(pick)
        seeds.append(idx)
        centroids.append(X[idx])
    return seeds


def cluster_periods(system: EnergySystem, partition: PeriodPartition, k: int,
                    forced: tuple[int, ...] = (), seed: int = 0,
                    max_iter: int = 300, tol: float = 1e-6) -> RepresentativePeriodSet:
    """k-means over period feature vectors with frozen seeds for forced periods.

    Forced periods stay representatives of their own cluster; the remaining
    k - len(forced) centroids move under Lloyd iterations. Each cluster is
    represented by its medoid (lowest index on ties) and weighted by size.
    When the year holds fewer distinct periods than k, surplus clusters stay
    empty and are dropped, so the result can have fewer than k representatives.
    """
    n = partition.n_input_periods
    forced = tuple(dict.fromkeys(int(f) for f in forced))
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} input periods")
    if k < len(forced):
        raise ValueError(f"k={k} below forced count {len(forced)}")
    if any(f < 0 or f >= n for f in forced):
        raise ValueError("forced period index out of range")

    if k == n:
        # identity reduction; also covers degenerate all-identical inputs
        mapping = np.arange(n)
        return RepresentativePeriodSet(
            partition=partition,
            representatives=tuple(range(n)),
            mapping=mapping,
            weights={m: 1 for m in range(n)},
            extreme_flags={f: True for f in forced},
        )

    X = period_features(system, partition)
    rng = np.random.default_rng(seed)
    nf = len(forced)
    kf = k - nf
    free_candidates = [i for i in range(n) if i not in forced]
    frozen = X[list(forced)] if nf else np.empty((0, X.shape[1]))
    free_seed_idx = _kmeanspp_seeds(X, free_candidates, kf, list(frozen), rng)
    centroids = np.vstack([frozen, X[free_seed_idx]]) if kf else frozen.copy()
    forced_pos = {f: j for j, f in enumerate(forced)}

    assign = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = cdist(X, centroids, "sqeuclidean")
        assign = np.argmin(d2, axis=1)
        for f, j in forced_pos.items():
            assign[f] = j  # singleton seeds never migrate

        # Re-seed empty free clusters at the worst-represented point, drawing
        # only from clusters that keep a member. If every candidate already
        # coincides with its centroid (duplicate periods), the cluster stays
        # empty and is dropped below; that only happens when the data has
        # fewer distinct periods than k.
        for c in range(nf, k):
            if np.any(assign == c):
                continue
            sizes = np.bincount(assign, minlength=k)
            own = d2[np.arange(n), assign]
            movable = (sizes[assign] > 1) & ~np.isin(np.arange(n), list(forced))
            if not movable.any() or own[movable].max() <= 0.0:
                continue
            own = np.where(movable, own, -1.0)
            far = int(np.argmax(own))
            centroids[c] = X[far]
            assign[far] = c

        moved = 0.0
        for c in range(nf, k):
            members = np.flatnonzero(assign == c)
            if len(members) == 0:
                continue
            new = X[members].mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new - centroids[c])))
            centroids[c] = new
        if moved <= tol:
            break

    reps: list[int] = []
    rep_cluster: list[int] = []
    for c in range(k):
        members = np.flatnonzero(assign == c)
        if c < nf:
            reps.append(forced[c])
            rep_cluster.append(c)
            continue
        if len(members) == 0:
            continue
        dist = np.sum((X[members] - centroids[c]) ** 2, axis=1)
        reps.append(int(members[np.argmin(dist)]))  # argmin ties -> lowest index
        rep_cluster.append(c)

    rep_of_cluster = {c: r for c, r in zip(rep_cluster, reps)}
    mapping = np.array([rep_of_cluster[int(assign[i])] for i in range(n)], dtype=int)
    weights = {r: int(np.count_nonzero(assign == c)) for c, r in zip(rep_cluster, reps)}
    return RepresentativePeriodSet(
        partition=partition,
        representatives=tuple(reps),
        mapping=mapping,
        weights=weights,
        extreme_flags={f: True for f in forced},
    )


def build_reduction(system: EnergySystem, period_length: int, n_periods: int,
                    seed: int = 0, include_extremes: bool = True) -> RepresentativePeriodSet:
    """Partition + extreme injection + clustering. period_length == hours gives
    the monolithic pass-through (single period, trivial mapping)."""
    partition = PeriodPartition.make(system.hours, period_length)
    if n_periods < 1 or n_periods > partition.n_input_periods:
        raise KTooLarge(
            f"n_periods={n_periods} invalid for {partition.n_input_periods} input periods"
        )
    forced: tuple[int, ...] = ()
    if include_extremes:
        extremes = select_extreme_periods(system, partition)
        forced = tuple(extremes[:n_periods])
    return cluster_periods(system, partition, k=n_periods, forced=forced, seed=seed)
