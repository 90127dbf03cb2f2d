import numpy as np
import pytest

from cemlink.reduction import (
    KTooLarge,
    PeriodPartition,
    ReductionError,
    RepresentativePeriodSet,
    build_reduction,
    cluster_periods,
    period_features,
    select_extreme_periods,
)
from cemlink.system import Resource
from conftest import make_system, thermal


def vre(rid, tech, zone="Z1"):
    return Resource(id=rid, zone=zone, kind="vre", tech=tech, fixed_cost=1000.0, crm_derate=0.8)


def tagged_system(hours, demand, solar, wind):
    return make_system(
        hours, demand, [thermal(), vre("pv", "solar"), vre("w1", "wind")],
        profiles={"pv": np.asarray(solar, dtype=float), "w1": np.asarray(wind, dtype=float)},
    )


def test_partition_arithmetic():
    p = PeriodPartition.make(8760, 168)
    assert p.n_input_periods == 52
    assert p.dropped_hours == 24
    assert p.annual_scale == pytest.approx(8760 / 8736)
    with pytest.raises(ReductionError):
        PeriodPartition.make(10, 11)


def test_extremes_constant_profiles_tiebreak():
    hours = 96
    system = tagged_system(hours, np.full(hours, 50.0), np.full(hours, 0.5), np.full(hours, 0.5))
    partition = PeriodPartition.make(hours, 24)
    assert select_extreme_periods(system, partition) == [0]


def test_extremes_unique_minimum():
    hours = 10 * 24
    solar = np.full(hours, 0.5)
    solar[7 * 24:8 * 24] = 0.0
    system = tagged_system(hours, np.full(hours, 50.0), solar, np.full(hours, 0.5))
    partition = PeriodPartition.make(hours, 24)
    assert select_extreme_periods(system, partition)[0] == 7


def test_extremes_match_exhaustive_scan(three_zone):
    partition = PeriodPartition.make(three_zone.hours, 24)
    got = select_extreme_periods(three_zone, partition)

    def brute(series_list, agg):
        totals = []
        for p in range(partition.n_input_periods):
            s = partition.hour_slice(p)
            totals.append(sum(float(x[s].sum()) for x in series_list))
        return agg(range(len(totals)), key=lambda i: totals[i])

    solar = [three_zone.vre_profiles[r.id] for r in three_zone.resources if r.tech == "solar"]
    wind = [three_zone.vre_profiles[r.id] for r in three_zone.resources if r.tech == "wind"]
    load = list(three_zone.demand.values())
    expect = []
    for idx in (brute(solar, min), brute(wind, min), brute(load, max)):
        if idx not in expect:
            expect.append(idx)
    assert got == expect


def test_missing_tech_warns_and_skips():
    hours = 48
    system = make_system(hours, np.arange(hours, dtype=float) + 1.0, [thermal()])
    partition = PeriodPartition.make(hours, 24)
    with pytest.warns(UserWarning):
        got = select_extreme_periods(system, partition)
    assert got == [1]  # max-load day only


def test_identity_clustering():
    hours = 8 * 24
    rng = np.random.default_rng(0)
    system = tagged_system(hours, 50 + rng.random(hours), rng.random(hours), rng.random(hours))
    partition = PeriodPartition.make(hours, 24)
    rps = cluster_periods(system, partition, k=8)
    assert rps.representatives == tuple(range(8))
    assert all(w == 1 for w in rps.weights.values())
    assert np.array_equal(rps.mapping, np.arange(8))


def test_four_daytypes_recovered():
    tau, reps_per_type = 24, 5
    rng = np.random.default_rng(3)
    types = [rng.random(tau) * 0.2 + off for off in (0.0, 1.0, 2.0, 3.0)]
    order = rng.permutation(np.repeat(np.arange(4), reps_per_type))
    demand = np.concatenate([50 + 10 * types[i] for i in order])
    solar = np.concatenate([np.clip(types[i] / 4, 0, 1) for i in order])
    wind = np.concatenate([np.clip(types[(i + 1) % 4] / 4, 0, 1) for i in order])
    hours = tau * len(order)
    system = tagged_system(hours, demand, solar, wind)
    partition = PeriodPartition.make(hours, tau)
    rps = cluster_periods(system, partition, k=4, seed=11)
    # every period maps to a representative of its own day type: zero assignment error
    X = period_features(system, partition)
    for n in range(partition.n_input_periods):
        assert order[n] == order[rps.mapping[n]]
        assert np.allclose(X[n], X[rps.mapping[n]], atol=0.3)
    assert sorted(rps.weights.values()) == [5, 5, 5, 5]


def test_forced_membership_and_weight():
    hours = 12 * 24
    rng = np.random.default_rng(5)
    system = tagged_system(hours, 50 + 5 * rng.random(hours), rng.random(hours), rng.random(hours))
    partition = PeriodPartition.make(hours, 24)
    rps = cluster_periods(system, partition, k=5, forced=(7,), seed=1)
    assert 7 in rps.representatives
    assert rps.weights[7] >= 1
    assert rps.extreme_flags[7]
    assert rps.mapping[7] == 7


def test_k_too_large_and_too_small():
    hours = 4 * 24
    system = tagged_system(hours, np.arange(hours, dtype=float) + 1, np.ones(hours), np.ones(hours))
    partition = PeriodPartition.make(hours, 24)
    with pytest.raises(KTooLarge):
        cluster_periods(system, partition, k=5)
    with pytest.raises(ValueError):
        cluster_periods(system, partition, k=1, forced=(0, 1))


def test_build_reduction_monolithic():
    hours = 96
    rng = np.random.default_rng(2)
    system = tagged_system(hours, 50 + rng.random(hours), rng.random(hours), rng.random(hours))
    rps = build_reduction(system, period_length=hours, n_periods=1, seed=0)
    assert rps.representatives == (0,)
    assert rps.weights == {0: 1}
    assert rps.partition.dropped_hours == 0


def test_build_reduction_52_weeks(one_zone_small):
    # 2190-hour fixture: 13 periods of 168 h, k = 13 is the identity analogue
    rps = build_reduction(one_zone_small, period_length=168, n_periods=13, seed=0)
    assert rps.n_representatives == 13
    assert sum(rps.weights.values()) == 13
    assert rps.partition.dropped_hours == 2190 - 13 * 168


def test_determinism_byte_identical(tmp_path, one_zone_small):
    a = build_reduction(one_zone_small, 24, 10, seed=42)
    b = build_reduction(one_zone_small, 24, 10, seed=42)
    pa = a.save_csv(tmp_path / "a")
    pb = b.save_csv(tmp_path / "b")
    assert pa[0].read_bytes() == pb[0].read_bytes()
    assert pa[1].read_bytes() == pb[1].read_bytes()


def test_save_load_round_trip(tmp_path, one_zone_small):
    rps = build_reduction(one_zone_small, 24, 7, seed=9)
    rps.save_csv(tmp_path / "x")
    back = RepresentativePeriodSet.load_csv(tmp_path / "x", one_zone_small.hours, 24)
    assert back.representatives == rps.representatives
    assert back.weights == rps.weights
    assert np.array_equal(back.mapping, rps.mapping)
    assert back.extreme_flags == rps.extreme_flags


def test_invariants_rejected():
    partition = PeriodPartition.make(96, 24)
    with pytest.raises(ReductionError):
        RepresentativePeriodSet(partition=partition, representatives=(0, 1),
                                mapping=np.array([0, 1, 3, 1]), weights={0: 1, 1: 3},
                                extreme_flags={})
    with pytest.raises(ReductionError):
        RepresentativePeriodSet(partition=partition, representatives=(0, 1),
                                mapping=np.array([0, 0, 1, 1]), weights={0: 2, 1: 1},
                                extreme_flags={})


def test_reconstruction_error_nonincreasing_in_k(one_zone_small):
    partition = PeriodPartition.make(one_zone_small.hours, 24)
    X = period_features(one_zone_small, partition)

    def recon_error(rps):
        return float(sum(np.sum((X[n] - X[rps.mapping[n]]) ** 2)
                         for n in range(partition.n_input_periods)))

    means = []
    for k in (2, 4, 8, 16):
        errs = [recon_error(cluster_periods(one_zone_small, partition, k=k, seed=s))
                for s in range(10)]
        means.append(np.mean(errs))
    assert all(means[i + 1] <= means[i] + 1e-9 for i in range(len(means) - 1))
