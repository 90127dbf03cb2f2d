import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cemlink.lp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    LpBuilder,
    LpError,
    SolverOptions,
    solve,
    verify_certificate,
)
from oracle_simplex import solve_dense


def build_lp(c, rows, lb=None, ub=None):
    """rows: list of (coeff list, sense, rhs)."""
    b = LpBuilder()
    n = len(c)
    b.add_cols(n, obj=np.asarray(c, dtype=float),
               lb=0.0 if lb is None else np.asarray(lb, dtype=float),
               ub=np.inf if ub is None else np.asarray(ub, dtype=float))
    for coeffs, sense, rhs in rows:
        b.add_row(sense, rhs, [(j, v) for j, v in enumerate(coeffs) if v != 0.0])
    return b.build()


def test_min_x_ge_3():
    lp = build_lp([1.0], [([1.0], "G", 3.0)])
    sol = solve(lp)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(3.0, abs=1e-9)
    # dual convention: d(objective)/d(rhs) = +1 for the binding >= row
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)


def test_box_lp_row_dual_sign():
    lp = build_lp([-1.0, -1.0], [([1.0, 1.0], "L", 1.0)])
    sol = solve(lp)
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)
    assert sol.duals[0] == pytest.approx(-1.0, abs=1e-9)


def test_equality_dual():
    lp = build_lp([2.0, 3.0], [([1.0, 1.0], "E", 4.0)])
    sol = solve(lp)
    assert sol.objective == pytest.approx(8.0, abs=1e-9)
    assert sol.duals[0] == pytest.approx(2.0, abs=1e-9)


def test_infeasible_and_unbounded_status():
    lp = build_lp([1.0], [([1.0], "L", -1.0)])  # x <= -1 with x >= 0
    assert solve(lp).status == INFEASIBLE
    lp = build_lp([-1.0], [([1.0], "G", 0.0)])  # min -x, x unbounded above
    assert solve(lp).status == UNBOUNDED


def test_validate_rejects_nan():
    lp = build_lp([1.0], [([1.0], "G", 3.0)])
    lp.c = np.array([np.nan])
    with pytest.raises(LpError):
        lp.validate()


def test_builder_coalesces_duplicates():
    b = LpBuilder()
    b.add_cols(2, obj=[1.0, 1.0])
    i = b.add_rows(1, "L", 5.0)
    b.put([i[0], i[0]], [0, 0], [2.0, 3.0])
    b.put(i[0], 1, 1.0)
    lp = b.build()
    assert lp.nnz == 2
    assert lp.A[0, 0] == pytest.approx(5.0)


def test_hand_constructed_certificate_pass_and_fail():
    # min 2x + 3y  s.t. x + y >= 4, x + 3y >= 6; optimum (3, 1), duals (3/2, 1/2)
    lp = build_lp([2.0, 3.0], [([1.0, 1.0], "G", 4.0), ([1.0, 3.0], "G", 6.0)])
    x = np.array([3.0, 1.0])
    y = np.array([1.5, 0.5])
    cert = verify_certificate(lp, x, y, tol=1e-6)
    assert cert.passed
    bad = verify_certificate(lp, x + np.array([-1e-2, 0.0]), y, tol=1e-6)
    assert not bad.passed
    assert bad.worst_row  # names the violated row


def test_certificate_from_solver_passes():
    lp = build_lp([1.0, 2.0, -1.0],
                  [([1.0, 1.0, 1.0], "L", 10.0), ([1.0, -1.0, 0.0], "G", 1.0)],
                  ub=[8.0, 8.0, 4.0])
    sol = solve(lp)
    assert sol.status == OPTIMAL
    assert sol.certificate.passed
    assert sol.certificate.duality_gap <= 1e-9


def random_box_lp(seed, m=50, n=80):
    """Feasible (x0 interior) and bounded (finite box) by construction."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.3)
    x0 = rng.uniform(0.1, 2.0, n)
    senses = rng.choice(np.array(["L", "G", "E"]), size=m, p=[0.5, 0.35, 0.15])
    slack = rng.uniform(0.1, 2.0, m)
    Ax0 = A @ x0
    b = np.where(senses == "L", Ax0 + slack, np.where(senses == "G", Ax0 - slack, Ax0))
    c = rng.normal(size=n)
    ub = x0 + rng.uniform(0.5, 3.0, n)
    return c, A, senses, b, ub


def run_oracle_comparison(seed):
    c, A, senses, b, ub = random_box_lp(seed)
    status, obj, _ = solve_dense(c, A, senses, b, ub=ub)
    assert status == "Optimal"
    lp = build_lp(c, [(A[i], senses[i], b[i]) for i in range(len(b))], ub=ub)
    sol = solve(lp)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(obj, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_random_lps_match_dense_oracle(seed):
    run_oracle_comparison(seed)


def test_determinism_identical_bytes():
    c, A, senses, b, ub = random_box_lp(123)
    lp = build_lp(c, [(A[i], senses[i], b[i]) for i in range(len(b))], ub=ub)
    s1 = solve(lp)
    s2 = solve(lp)
    assert s1.objective == s2.objective
    assert np.array_equal(s1.x, s2.x)
    assert np.array_equal(s1.duals, s2.duals)
    assert np.array_equal(s1.reduced_costs, s2.reduced_costs)


def test_scaling_toggle_same_objective():
    c, A, senses, b, ub = random_box_lp(7)
    lp = build_lp(c, [(A[i], senses[i], b[i]) for i in range(len(b))], ub=ub)
    on = solve(lp, SolverOptions(scaling=True))
    off = solve(lp, SolverOptions(scaling=False))
    assert on.objective == pytest.approx(off.objective, rel=1e-9)


def test_rhs_perturbation_matches_dual():
    # binding >= row: bump rhs by eps, objective moves by dual * eps
    lp = build_lp([2.0, 3.0], [([1.0, 1.0], "G", 4.0), ([1.0, 3.0], "G", 6.0)])
    sol = solve(lp)
    eps = 1e-3
    for i in range(2):
        lp2 = build_lp([2.0, 3.0], [([1.0, 1.0], "G", 4.0 + (eps if i == 0 else 0.0)),
                                    ([1.0, 3.0], "G", 6.0 + (eps if i == 1 else 0.0))])
        bumped = solve(lp2)
        fd = (bumped.objective - sol.objective) / eps
        assert fd == pytest.approx(sol.duals[i], rel=0.05)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(2, 8), n=st.integers(2, 10))
def test_property_certificate_and_strong_duality(seed, m, n):
    c, A, senses, b, ub = random_box_lp(seed, m=m, n=n)
    lp = build_lp(c, [(A[i], senses[i], b[i]) for i in range(m)], ub=ub)
    sol = solve(lp)
    assert sol.status == OPTIMAL
    cert = sol.certificate
    assert cert.passed
    assert cert.duality_gap <= 1e-6 * (1 + abs(sol.objective))
