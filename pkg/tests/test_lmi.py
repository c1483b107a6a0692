import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coniclpv import lmi
from coniclpv.errors import DimensionMismatch, EmptyProgram, UnknownHandle
from coniclpv.lmi import LmiProgram


def test_lyapunov_lmi_feasible():
    prog = LmiProgram()
    P = prog.symmetric(2, "P")
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    prog.add_psd([[P]], strict=True)
    prog.add_nsd([[P @ A + A.T @ P]], strict=True)
    sol = prog.solve()
    assert sol.ok
    Pv = sol.value(P)
    assert np.linalg.eigvalsh(Pv)[0] > 0
    assert np.linalg.eigvalsh(Pv @ A + A.T @ Pv)[-1] < 0


def test_lyapunov_lmi_unstable_is_infeasible():
    prog = LmiProgram()
    P = prog.symmetric(1)
    prog.add_psd([[P]], strict=True)
    prog.add_nsd([[2.0 * P]], strict=True)
    assert not prog.solve().ok


def test_schur_complement_minimum():
    # min t s.t. [[t, x], [x, 1]] >= 0 with x = 2 gives t = 4
    prog = LmiProgram()
    t = prog.scalar("t")
    prog.add_psd([[t], [2.0, 1.0]])
    prog.minimize(t)
    sol = prog.solve()
    assert sol.value(t)[0, 0] == pytest.approx(4.0, abs=1e-5)
    assert sol.objective == pytest.approx(4.0, abs=1e-5)


def test_maximize_sign():
    prog = LmiProgram()
    t = prog.scalar()
    prog.add_psd([[3.0 - t]])
    prog.maximize(t)
    assert prog.solve().value(t)[0, 0] == pytest.approx(3.0, abs=1e-5)


def test_none_blocks_are_zero():
    prog = LmiProgram()
    X = prog.symmetric(2)
    cid = prog.add_psd([[X], [None, np.eye(1)]])
    con = prog.constraints[cid]
    assert con.sizes == (2, 1)
    vals = {X: np.eye(2)}
    np.testing.assert_array_equal(con.evaluate(vals), np.eye(3))


def test_rectangular_variable_and_transpose():
    prog = LmiProgram()
    K = prog.rectangular(2, 1)
    expr = K.T @ np.eye(2)
    assert expr.shape == (1, 2)
    assert expr.evaluate({K: np.array([[1.0], [2.0]])}).tolist() == [[1.0, 2.0]]


def test_trace_expression():
    prog = LmiProgram()
    Z = prog.symmetric(3)
    val = np.diag([1.0, 2.0, 3.0])
    assert Z.trace().evaluate({Z: val})[0, 0] == pytest.approx(6.0)


def test_residuals_orientation():
    prog = LmiProgram()
    t = prog.scalar()
    prog.add_psd([[t - 1.0]], name="lower")
    prog.add_nsd([[t - 5.0]], name="upper")
    prog.minimize(t)
    res = prog.residuals(prog.solve())
    assert res["lower"] == pytest.approx(0.0, abs=1e-5)
    assert res["upper"] == pytest.approx(-4.0, abs=1e-5)


def test_strict_constraint_keeps_margin():
    prog = LmiProgram()
    t = prog.scalar()
    prog.add_psd([[t]], strict=True)
    prog.minimize(t)
    assert prog.solve().value(t)[0, 0] >= lmi.STRICT_MARGIN * 0.99


def test_errors():
    prog = LmiProgram()
    with pytest.raises(EmptyProgram):
        prog.solve()
    X = prog.symmetric(2)
    with pytest.raises(DimensionMismatch):
        prog.add_psd([[X], [np.ones((1, 3)), 1.0]])
    with pytest.raises(DimensionMismatch):
        prog.add_psd([[np.array([[0.0, 1.0], [0.0, 0.0]])]])
    other = LmiProgram().symmetric(2)
    with pytest.raises(UnknownHandle):
        prog.add_psd([[other]])


def test_value_of_foreign_variable():
    prog = LmiProgram()
    t = prog.scalar()
    prog.add_psd([[t]])
    sol = prog.solve()
    with pytest.raises(UnknownHandle):
        sol.value(LmiProgram().scalar())


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_compiled_blocks_match_symbolic_evaluation(n, seed):
    r = np.random.default_rng(seed)
    prog = LmiProgram()
    P = prog.symmetric(n)
    K = prog.rectangular(n, 1)
    A = r.standard_normal((n, n))
    B = r.standard_normal((n, 1))
    prog.add_nsd([[P @ A + A.T @ P], [B.T @ P + K.T, -np.eye(1)]])
    problem, backmap = prog.compile()
    x = r.standard_normal(problem.num_vars)
    vals = {v: backmap.extract(v, x) for v in (P, K)}
    expected = -prog.constraints[0].evaluate(vals)
    np.testing.assert_allclose(problem.evaluate(x)[0], expected, atol=1e-12)
