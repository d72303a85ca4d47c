import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from oracles import enumerate_active_sets, random_instance

from der_mpc.qp import (
    QpProblem,
    QpSolver,
    SolverSettings,
    Status,
    complementarity_residual,
    dump_problem,
    load_problem,
    presolve_infeasible,
    solve,
    validate_solution,
)

INF = np.inf


def box(P, q, lower, upper, A=None, b=None):
    n = len(q)
    A = np.zeros((0, n)) if A is None else A
    b = np.zeros(0) if b is None else b
    return QpProblem(np.atleast_2d(P), q, A, b, lower, upper)


def test_interior_minimum():
    sol = solve(box([[1.0]], [0.0], [-1.0], [1.0]))
    assert sol.status is Status.OPTIMAL
    assert sol.z[0] == pytest.approx(0.0, abs=1e-9)
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


def test_symmetric_equality():
    prob = box(np.eye(2), [0.0, 0.0], [-INF, -INF], [INF, INF], A=np.array([[1.0, 1.0]]), b=np.array([2.0]))
    sol = solve(prob)
    np.testing.assert_allclose(sol.z, [1.0, 1.0], atol=1e-9)
    assert sol.objective == pytest.approx(1.0, abs=1e-9)


def test_active_upper_bound():
    # 0.5 (z - 3)^2 = 0.5 z^2 - 3 z + 4.5
    sol = solve(box([[1.0]], [-3.0], [-1.0], [1.0]))
    assert sol.z[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.objective + 4.5 == pytest.approx(2.0, abs=1e-9)
    assert sol.y_box[0] == pytest.approx(2.0, abs=1e-9)


def test_six_variable_instance_matches_oracle():
    rng = np.random.default_rng(6)
    P, q, A, b, lo, up = random_instance(rng, 6, 2)
    z_ref, obj_ref = enumerate_active_sets(P, q, A, b, lo, up)
    sol = solve(QpProblem(P, q, A, b, lo, up))
    assert sol.optimal
    assert np.abs(sol.z - z_ref).max() <= 1e-6
    assert sol.objective == pytest.approx(obj_ref, abs=1e-8)
    report = validate_solution(QpProblem(P, q, A, b, lo, up), z_ref)
    assert report.equality <= 1e-8 and report.bound <= 1e-8


@pytest.mark.parametrize("seed", range(40))
def test_random_instances_match_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(1, 9))
    m = int(rng.integers(0, min(3, n - 1) + 1))
    P, q, A, b, lo, up = random_instance(rng, n, m)
    ref = enumerate_active_sets(P, q, A, b, lo, up)
    assert ref is not None
    sol = solve(QpProblem(P, q, A, b, lo, up))
    assert sol.optimal
    assert np.abs(sol.z - ref[0]).max() <= 1e-6
    assert abs(sol.objective - ref[1]) <= 1e-8


# -- validate_solution -----------------------------------------------------------

def test_validate_feasible_point():
    report = validate_solution(box([[1.0]], [0.0], [-1.0], [1.0]), [0.5])
    assert (report.equality, report.bound) == (0.0, 0.0)
    assert report.objective == pytest.approx(0.125)
    assert report.ok


def test_validate_bound_violation():
    prob = box(np.eye(2), [0.0, 0.0], [-1.0, -1.0], [1.0, 1.0])
    report = validate_solution(prob, [1.5, 0.0])
    assert report.bound == pytest.approx(0.5)
    assert not report.ok


def test_validate_dimension_mismatch():
    with pytest.raises(ValueError, match="length"):
        validate_solution(box([[1.0]], [0.0], [-1.0], [1.0]), [0.0, 0.0])
    with pytest.raises(ValueError, match="multiplier"):
        validate_solution(box([[1.0]], [0.0], [-1.0], [1.0]), [0.0], y_box=[0.0, 0.0])


def test_validate_reports_kkt_residuals():
    prob = box([[1.0]], [-3.0], [-1.0], [1.0])
    good = validate_solution(prob, [1.0], y_box=[2.0])
    assert good.stationarity == 0.0 and good.complementarity == 0.0
    wrong_sign = validate_solution(prob, [1.0], y_box=[-2.0])
    assert wrong_sign.complementarity == pytest.approx(4.0)
    assert not wrong_sign.ok


def test_complementarity_unbounded_side():
    assert complementarity_residual(np.array([0.0]), np.array([-1.0]), np.array([-INF]), np.array([1.0])) == INF
    assert complementarity_residual(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0)) == 0.0


# -- problem validation ------------------------------------------------------------

def test_rejects_indefinite_cost():
    with pytest.raises(ValueError, match="positive semidefinite"):
        box([[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0], [-1, -1], [1, 1])


def test_rejects_asymmetric_cost():
    with pytest.raises(ValueError, match="symmetric"):
        box([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0], [-1, -1], [1, 1])


def test_rejects_crossed_bounds():
    with pytest.raises(ValueError):
        box([[1.0]], [0.0], [1.0], [0.0])


def test_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), [0.0], np.zeros((0, 2)), [], [-1, -1], [1, 1])


# -- infeasibility -------------------------------------------------------------------

def test_presolve_detects_empty_row():
    prob = box(np.eye(2), [0.0, 0.0], [0.0, 0.0], [1.0, 1.0], A=np.array([[1.0, 1.0]]), b=np.array([3.0]))
    assert "row 0" in presolve_infeasible(prob)
    sol = solve(prob)
    assert sol.status is Status.INFEASIBLE


def test_conflicting_equalities_infeasible():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    prob = box(np.eye(2), [0.0, 0.0], [-INF, -INF], [INF, INF], A=A, b=np.array([1.0, 2.0]))
    assert presolve_infeasible(prob) is None
    sol = solve(prob)
    assert sol.status is Status.INFEASIBLE


def test_iteration_cap_reports_best_iterate():
    rng = np.random.default_rng(3)
    P, q, A, b, lo, up = random_instance(rng, 8, 3)
    sol = solve(QpProblem(P, q, A, b, lo, up), SolverSettings(max_iter=10, polish=False, check_every=5))
    assert sol.status is Status.MAX_ITERATIONS
    assert sol.iterations == 10
    assert np.isfinite(sol.primal_residual) and np.isfinite(sol.dual_residual)


# -- invariants ------------------------------------------------------------------------

instance_seeds = st.integers(0, 10**6)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(instance_seeds, st.floats(1e-3, 1e3))
def test_argmin_invariant_under_cost_scaling(seed, c):
    rng = np.random.default_rng(seed)
    P, q, A, b, lo, up = random_instance(rng, int(rng.integers(2, 9)), int(rng.integers(0, 3)))
    a = solve(QpProblem(P, q, A, b, lo, up))
    s = solve(QpProblem(c * P, c * q, A, b, lo, up))
    assert a.optimal and s.optimal
    assert np.abs(a.z - s.z).max() <= 10 * 1e-6


def feasible_sample(rng, A, b, lo, up, tries=200):
    """Random point projected onto the equalities then clipped to the box."""
    pinv = np.linalg.pinv(A) if A.shape[0] else None
    for _ in range(tries):
        z = rng.uniform(lo, up)
        if pinv is not None:
            z = z - pinv @ (A @ z - b)
        z = np.clip(z, lo, up)
        if A.shape[0] == 0 or np.abs(A @ z - b).max() <= 1e-9:
            return z
    return None


@settings(max_examples=30, deadline=None)
@given(instance_seeds)
def test_optimum_below_random_feasible_points(seed):
    rng = np.random.default_rng(seed)
    P, q, A, b, lo, up = random_instance(rng, int(rng.integers(2, 9)), int(rng.integers(0, 3)))
    prob = QpProblem(P, q, A, b, lo, up)
    sol = solve(prob)
    assert sol.optimal
    for _ in range(5):
        z = feasible_sample(rng, A, b, lo, up)
        if z is not None:
            assert sol.objective <= prob.objective(z) + 1e-6


@settings(max_examples=25, deadline=None)
@given(instance_seeds)
def test_warm_start_no_slower_than_cold(seed):
    rng = np.random.default_rng(seed)
    P, q, A, b, lo, up = random_instance(rng, int(rng.integers(2, 9)), int(rng.integers(0, 3)))
    prob = QpProblem(P, q, A, b, lo, up)
    cold = solve(prob)
    warm = solve(prob, warm_start=cold.warm_start())
    assert warm.optimal
    assert warm.iterations <= cold.iterations


def test_solve_is_deterministic():
    rng = np.random.default_rng(11)
    P, q, A, b, lo, up = random_instance(rng, 8, 3)
    a = solve(QpProblem(P, q, A, b, lo, up))
    b_ = solve(QpProblem(P, q, A, b, lo, up))
    assert a.z.tobytes() == b_.z.tobytes()
    assert (a.iterations, a.objective) == (b_.iterations, b_.objective)


def test_factorization_reused_across_data_updates():
    rng = np.random.default_rng(5)
    P, q, A, b, lo, up = random_instance(rng, 6, 2)
    prob = QpProblem(sp.csc_matrix(P), q, sp.csc_matrix(A), b, lo, up)
    solver = QpSolver()
    first = solver.solve(prob)
    second = solver.solve(prob.with_data(q=q + 0.1))
    assert first.optimal and second.optimal
    assert prob.with_data(q=q).P is prob.P
    ref = enumerate_active_sets(P, q + 0.1, A, b, lo, up)
    assert np.abs(second.z - ref[0]).max() <= 1e-6


def test_dump_load_round_trip(tmp_path):
    prob = box([[2.0, 0.5], [0.5, 1.0]], [1.0, -1.0], [-INF, 0.0], [1.0, INF],
               A=np.array([[1.0, 2.0]]), b=np.array([0.5]))
    path = tmp_path / "p.qp"
    dump_problem(prob, path)
    assert path.read_text().startswith("qp-triplet 1\n")
    back = load_problem(path)
    np.testing.assert_array_equal(back.P.toarray(), prob.P.toarray())
    np.testing.assert_array_equal(back.A.toarray(), prob.A.toarray())
    for name in ("q", "b", "lower", "upper"):
        np.testing.assert_array_equal(getattr(back, name), getattr(prob, name))


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("hello\n")
    with pytest.raises(ValueError, match="qp-triplet"):
        load_problem(path)
