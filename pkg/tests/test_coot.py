"""Unit tests for the alternating solver and the enumeration oracle."""

import numpy as np
import pytest

from coopt import (
    ABSOLUTE,
    CootProblem,
    DimensionError,
    SQUARED_EUCLIDEAN,
    bap_oracle,
    coot_distance_checks,
    coot_objective,
    permutation_equal,
    random_coupling,
    sinkhorn,
    solve_coot,
    uniform_histogram,
    validate_coupling,
)


def test_solve_self_instance_reaches_zero():
    rng = np.random.default_rng(41)
    X = rng.random((2, 2))
    sol = solve_coot(CootProblem(X, X))
    oracle = bap_oracle(X, X)
    assert oracle.cost == 0.0
    assert abs(sol.cost) <= 1e-9


def test_permutation_couplings_give_zero():
    rng = np.random.default_rng(42)
    X = rng.random((4, 3))
    rows = rng.permutation(4)
    cols = rng.permutation(3)
    X2 = X[rows][:, cols]  # X2[i] = X[rows[i]]
    ps = np.zeros((4, 4))
    ps[rows, np.arange(4)] = 0.25
    pv = np.zeros((3, 3))
    pv[cols, np.arange(3)] = 1.0 / 3.0
    # the factored kernel leaves cancellation dust; the direct sum is exact
    assert abs(coot_objective(X, X2, ps, pv, SQUARED_EUCLIDEAN)) <= 1e-12
    from coopt import Side, contract_naive

    direct = float(np.sum(contract_naive(X, X2, ps, SQUARED_EUCLIDEAN, Side.FEATURE).matrix * pv))
    assert direct == 0.0


def test_restarts_match_oracle_on_seeded_instance():
    rng = np.random.default_rng(43)
    X = rng.random((3, 3))
    X2 = rng.random((3, 3))
    oracle = bap_oracle(X, X2)
    sol = solve_coot(CootProblem(X, X2), restarts=20, seed=43)
    assert sol.cost == pytest.approx(oracle.cost, abs=1e-9)
    assert sol.cost >= oracle.cost - 1e-12


def test_trace_monotone_with_exact_solvers():
    rng = np.random.default_rng(44)
    for _ in range(10):
        X = rng.random((6, 5))
        X2 = rng.random((4, 7))
        sol = solve_coot(CootProblem(X, X2))
        trace = sol.objective_trace
        assert all(trace[i + 1] <= trace[i] + 1e-9 for i in range(len(trace) - 1))


def test_max_iter_zero_returns_product_initialization():
    rng = np.random.default_rng(45)
    X = rng.random((3, 2))
    X2 = rng.random((4, 3))
    problem = CootProblem(X, X2, max_iter=0)
    sol = solve_coot(problem)
    ps = np.outer(problem.w, problem.wp)
    pv = np.outer(problem.v, problem.vp)
    np.testing.assert_array_equal(sol.sample_coupling.plan, ps)
    np.testing.assert_array_equal(sol.feature_coupling.plan, pv)
    assert sol.cost == pytest.approx(coot_objective(X, X2, ps, pv, SQUARED_EUCLIDEAN))
    assert sol.iterations == 0 and not sol.converged


def test_returned_couplings_are_feasible():
    rng = np.random.default_rng(46)
    X = rng.random((5, 4))
    X2 = rng.random((6, 3))
    exact = solve_coot(CootProblem(X, X2))
    for c in (exact.sample_coupling, exact.feature_coupling):
        assert validate_coupling(c.plan, c.row_marginal, c.col_marginal, 1e-9)
    entropic = solve_coot(CootProblem(X, X2, eps_samples=0.05, eps_features=0.05))
    for c in (entropic.sample_coupling, entropic.feature_coupling):
        assert validate_coupling(c.plan, c.row_marginal, c.col_marginal, 1e-6)


def test_mixed_mode_runs_exact_samples_entropic_features():
    rng = np.random.default_rng(47)
    X = rng.random((4, 3))
    X2 = rng.random((5, 4))
    sol = solve_coot(CootProblem(X, X2, eps_samples=0.0, eps_features=1.0))
    assert sol.sample_coupling.feasible(1e-9)
    assert sol.feature_coupling.feasible(1e-6)


def test_never_below_oracle_on_uniform_square():
    rng = np.random.default_rng(48)
    for _ in range(5):
        X = rng.random((3, 3))
        X2 = rng.random((3, 3))
        sol = solve_coot(CootProblem(X, X2), restarts=5, seed=0)
        assert sol.cost >= bap_oracle(X, X2).cost - 1e-12


def test_restart_stability_on_permuted_instances():
    """At least one of 20 restarts lands at (near) zero on permuted pairs."""
    rng = np.random.default_rng(49)
    for trial in range(5):
        n, d = rng.integers(2, 5), rng.integers(2, 5)
        X = rng.random((n, d))
        X2 = X[rng.permutation(n)][:, rng.permutation(d)]
        sol = solve_coot(CootProblem(X, X2), restarts=20, seed=trial)
        assert sol.cost <= 1e-8


def test_degenerate_single_column_target():
    rng = np.random.default_rng(50)
    X = rng.random((5, 4))
    X2 = rng.random((1, 1))
    sol = solve_coot(CootProblem(X, X2))
    assert sol.sample_coupling.shape == (5, 1)
    assert sol.feature_coupling.shape == (4, 1)
    np.testing.assert_allclose(sol.sample_coupling.plan.sum(axis=1), 1.0 / 5.0)


def test_random_coupling_is_feasible_and_seeded():
    w = uniform_histogram(4)
    wp = uniform_histogram(6)
    a = random_coupling(w, wp, np.random.default_rng(5))
    b = random_coupling(w, wp, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert validate_coupling(a, w, wp, 1e-9)


def test_jobs_do_not_change_the_selected_restart():
    rng = np.random.default_rng(51)
    X = rng.random((3, 3))
    X2 = rng.random((3, 3))
    serial = solve_coot(CootProblem(X, X2), restarts=8, seed=7, jobs=1)
    threaded = solve_coot(CootProblem(X, X2), restarts=8, seed=7, jobs=4)
    assert serial.cost == threaded.cost
    assert serial.restart_index == threaded.restart_index
    np.testing.assert_array_equal(serial.sample_coupling.plan, threaded.sample_coupling.plan)


def test_bap_oracle_identity_and_swap():
    X = np.array([[0.0, 1.0], [2.0, 3.0]])
    res = bap_oracle(X, X)
    assert res.cost == 0.0
    swapped = X[::-1][:, ::-1]
    res = bap_oracle(X, swapped)
    assert res.cost == 0.0
    assert res.row_perm == (1, 0)
    assert res.col_perm == (1, 0)


def test_bap_oracle_lower_bounds_random_feasible_pairs():
    rng = np.random.default_rng(52)
    X = rng.random((3, 3))
    X2 = rng.random((3, 3))
    oracle = bap_oracle(X, X2).cost
    u3 = uniform_histogram(3)
    for _ in range(100):
        ps = sinkhorn(u3, u3, rng.random((3, 3)), eps=0.5).coupling.plan
        pv = sinkhorn(u3, u3, rng.random((3, 3)), eps=0.5).coupling.plan
        assert coot_objective(X, X2, ps, pv, SQUARED_EUCLIDEAN) >= oracle - 1e-12


def test_bap_oracle_refuses_large_instances():
    big = np.zeros((7, 3))
    with pytest.raises(DimensionError):
        bap_oracle(big, big)


def test_permutation_equal_detects_construction():
    rng = np.random.default_rng(53)
    X = rng.random((3, 4))
    X2 = X[[2, 0, 1]][:, [3, 1, 0, 2]]
    assert permutation_equal(X, X2)
    assert not permutation_equal(X, X2 + 1e-9)


def test_distance_checks_identical_triple():
    X = np.arange(9, dtype=float).reshape(3, 3)
    report = coot_distance_checks([(X, X.copy(), X.copy())], ABSOLUTE)
    assert report["max_symmetry_gap"] == 0.0
    assert report["max_triangle_slack"] <= 0.0
    assert report["triangle_violations"] == 0
    assert report["indiscernibles_ok"]


def test_distance_checks_random_triples():
    rng = np.random.default_rng(54)
    triples = []
    for i in range(10):
        A = rng.random((3, 3))
        B = A[rng.permutation(3)][:, rng.permutation(3)] if i % 3 == 0 else rng.random((3, 3))
        C = rng.random((3, 3))
        triples.append((A, B, C))
    report = coot_distance_checks(triples, ABSOLUTE)
    assert report["max_symmetry_gap"] <= 1e-12
    assert report["triangle_violations"] == 0
    assert report["indiscernibles_ok"]
