import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coniclpv import sdp
from coniclpv.errors import DimensionMismatch
from coniclpv.sdp import SdpProblem, SolverOptions, Status

from oracles import determinant_sdp, interval_sdp, random_feasible_sdp


def scalar_block(const, coefs):
    return np.array([[[const]]] + [[[c]] for c in coefs], dtype=float)


def test_scalar_lower_bound_optimum():
    # min x s.t. x - 1 >= 0
    sol = sdp.solve(SdpProblem([1.0], (scalar_block(-1.0, [1.0]),)))
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-6)


def test_infeasible_interval_detected():
    # x >= 1 and x <= 0
    prob = SdpProblem([0.0], (scalar_block(-1.0, [1.0]), scalar_block(0.0, [-1.0])))
    assert sdp.check_feasible(prob).status is Status.INFEASIBLE


def test_feasible_point_is_psd(rng):
    prob, _ = random_feasible_sdp(rng)
    sol = sdp.check_feasible(prob)
    assert sol.status is Status.FEASIBLE
    assert prob.min_eig(sol.x) >= -1e-6


def test_random_feasible_family(rng):
    fails = 0
    for _ in range(40):
        prob, _ = random_feasible_sdp(rng)
        sol = sdp.check_feasible(prob)
        fails += not (sol.status is Status.FEASIBLE and prob.min_eig(sol.x) >= -1e-6)
    assert fails == 0


def test_interval_family(rng):
    for _ in range(10):
        prob, opt = interval_sdp(rng)
        sol = sdp.solve(prob)
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(opt, abs=1e-5)


def test_determinant_family(rng):
    for _ in range(10):
        prob, opt = determinant_sdp(rng)
        sol = sdp.solve(prob)
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(opt, abs=1e-5)


def test_unbounded_direction_is_capped():
    # min x with only x <= 1: the variable box stops the descent
    sol = sdp.solve(SdpProblem([1.0], (scalar_block(1.0, [-1.0]),)))
    assert sol.status is Status.NUMERICAL_FAILURE


def test_problem_shape_validation():
    with pytest.raises(DimensionMismatch):
        SdpProblem([1.0, 2.0], (scalar_block(0.0, [1.0]),))
    bad = np.zeros((2, 2, 2))
    bad[1] = [[0.0, 1.0], [0.0, 0.0]]
    with pytest.raises(DimensionMismatch):
        SdpProblem([1.0], (bad,))


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(feas_tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(mu=1.0)


def test_solver_is_deterministic(rng):
    prob, _ = random_feasible_sdp(rng)
    a, b = sdp.check_feasible(prob), sdp.check_feasible(prob)
    np.testing.assert_array_equal(a.x, b.x)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_optimum_not_worse_than_known_feasible_point(seed):
    r = np.random.default_rng(seed)
    prob, x0 = random_feasible_sdp(r, m_max=6, d_max=4)
    c = r.standard_normal(prob.num_vars)
    # a box keeps the random objective bounded
    m = prob.num_vars
    box = []
    for i in range(m):
        for sign in (1.0, -1.0):
            F = np.zeros((m + 1, 1, 1))
            F[0, 0, 0] = 10.0 + sign * x0[i]
            F[i + 1, 0, 0] = -sign
            box.append(F)
    prob = SdpProblem(c, prob.blocks + tuple(box))
    sol = sdp.solve(prob)
    assert sol.ok
    assert prob.min_eig(sol.x) >= -1e-6
    assert sol.objective <= c @ x0 + 1e-6 * (1 + abs(c @ x0))


def test_random_optima_match_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    for _ in range(5):
        prob, x0 = random_feasible_sdp(rng, m_max=6, d_max=4)
        m = prob.num_vars
        # a box keeps the random objective bounded
        box = np.zeros((m + 1, 2 * m, 2 * m))
        box[0] = 10.0 * np.eye(2 * m)
        for i in range(m):
            box[i + 1, i, i], box[i + 1, m + i, m + i] = 1.0, -1.0
        c = rng.standard_normal(m)
        ours = sdp.solve(SdpProblem(c, prob.blocks + (box,)))
        assert ours.status is Status.OPTIMAL

        x = cp.Variable(m)
        cons = [F[0] + sum(x[i] * F[i + 1] for i in range(m)) >> 0 for F in prob.blocks]
        ref = cp.Problem(cp.Minimize(c @ x), cons + [cp.abs(x) <= 10.0])
        ref.solve(solver=cp.CLARABEL)
        assert ours.objective == pytest.approx(ref.value, abs=1e-5 * max(1.0, abs(ref.value)))
