import numpy as np
import pytest

from dualqss.dae import (ApplyFault, ClearFault, DisturbanceEvent, FunctionDae, LoadChange,
                         SystemState, apply_event, consistent_init, fd_jacobian, order_events)
from dualqss.errors import NonConvergence, NonFiniteValue, ScheduleError, SingularJacobian
from dualqss.powersys import build_model


@pytest.fixture(scope="module")
def wscc():
    return build_model("wscc9")


def linear_dae():
    return FunctionDae(1, 1, f=lambda x, y, p: -y, g=lambda x, y, p: y - p["k"] * x, params={"k": 2.0})


def test_fd_jacobian_linear_map():
    A = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 4.0]])
    J = fd_jacobian(lambda v: A @ v, [0.3, -7.0, 120.0])
    np.testing.assert_allclose(J, A, rtol=1e-7)


def test_fd_jacobian_square():
    assert fd_jacobian(lambda v: v ** 2, [3.0])[0, 0] == pytest.approx(6.0, abs=1e-6)


def test_fd_jacobian_nonfinite():
    with pytest.raises(NonFiniteValue):
        fd_jacobian(lambda v: np.where(v > 0, v, np.nan), [0.0])


def test_consistent_init_without_algebraic_variables():
    s = FunctionDae(2, 0, f=lambda x, y, p: -x)
    st = consistent_init(s, [1.0, 2.0])
    assert st.t == 0.0 and st.y.size == 0
    np.testing.assert_array_equal(st.x, [1.0, 2.0])


def test_consistent_init_linear_constraint():
    st = consistent_init(linear_dae(), [0.1])
    assert st.y[0] == pytest.approx(0.2, abs=1e-12)
    assert st.x[0] == 0.1


def test_consistent_init_nonconvergence():
    s = FunctionDae(1, 1, f=lambda x, y, p: x, g=lambda x, y, p: y ** 2 + 1.0)
    with pytest.raises(NonConvergence) as info:
        consistent_init(s, [0.0], [0.5])
    assert info.value.iterations <= 50


def test_consistent_init_singular():
    s = FunctionDae(1, 1, f=lambda x, y, p: x, g=lambda x, y, p: 0.0 * y + 1.0)
    with pytest.raises(SingularJacobian):
        consistent_init(s, [0.0], [0.0])


def test_wscc9_initial_point_is_equilibrium(wscc):
    st = wscc.initial_state()
    assert np.max(np.abs(wscc.eval_g(st.x, st.y))) <= 1e-8
    assert np.max(np.abs(wscc.eval_f(st.x, st.y))) <= 1e-6


def test_null_event_leaves_state_unchanged(wscc):
    sys = wscc.clone()
    st = sys.initial_state()
    new = apply_event(sys, DisturbanceEvent(0.5, ApplyFault("5", 0.0, 0.0)), SystemState(0.5, st.x, st.y))
    assert new.t == 0.5
    np.testing.assert_array_equal(new.x, st.x)
    np.testing.assert_allclose(new.y, st.y, atol=1e-12)


def test_removing_full_load(wscc):
    sys = wscc.clone()
    st = sys.initial_state()
    p5 = sys.load_p[sys.bus_index["5"]]
    new = apply_event(sys, DisturbanceEvent(1.0, LoadChange(("5",), p5, sys.load_q[sys.bus_index["5"]])), st)
    np.testing.assert_array_equal(new.x, st.x)
    assert np.max(np.abs(sys.eval_g(new.x, new.y))) <= 1e-8
    # consumed power recomputed from the mutated admittance
    V = sys.bus_voltages(new.y)
    i5 = sys.bus_index["5"]
    Y = sys.load_admittance()[i5]
    assert abs(abs(V[i5]) ** 2 * np.conj(Y)) == 0.0
    assert sys.load_power(new.y)[sys.bus_index["6"]].real > 0


def test_fault_round_trip(wscc):
    sys = wscc.clone()
    st = sys.initial_state()
    on = apply_event(sys, DisturbanceEvent(1.0, ApplyFault("7")), st)
    assert np.max(np.abs(on.y - st.y)) > 0.1
    off = apply_event(sys, DisturbanceEvent(1.0, ClearFault("7")), on)
    np.testing.assert_allclose(off.y, st.y, atol=1e-8)
    np.testing.assert_array_equal(off.x, st.x)


def test_event_ordering():
    a = DisturbanceEvent(2.0, None, "a")
    b = DisturbanceEvent(1.0, None, "b")
    c = DisturbanceEvent(2.0, None, "c")
    assert [e.label for e in order_events([a, b, c], 5.0)] == ["b", "a", "c"]
    with pytest.raises(ScheduleError):
        order_events([DisturbanceEvent(6.0, None)], 5.0)
    with pytest.raises(ScheduleError):
        order_events([DisturbanceEvent(-0.1, None)], 5.0)


def test_unknown_action_is_rejected():
    with pytest.raises(TypeError):
        linear_dae().apply_action("explode")


def test_callable_action_mutates_parameters():
    s = linear_dae()
    st = consistent_init(s, [0.1])
    new = apply_event(s, DisturbanceEvent(0.0, lambda sys: sys.params.update(k=3.0)), st)
    assert new.y[0] == pytest.approx(0.3)


def _close(a, b):
    scale = max(np.max(np.abs(a)), 1.0)
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-5 * scale)


@pytest.mark.parametrize("dataset", ["wscc9", "smib"])
def test_analytic_jacobians_match_finite_differences(dataset):
    model = build_model(dataset)
    rng = np.random.default_rng(7)
    st = model.initial_state()
    for _ in range(100):
        x = st.x.copy()
        x[0::2] += rng.normal(0, 0.3, x[0::2].size)
        x[1::2] += rng.normal(0, 0.01, x[1::2].size)
        y = consistent_init(model, x, st.y).y
        for (a, b) in zip(model.jac_f(x, y), model.fd_jac_f(x, y)):
            _close(a, b)
        for (a, b) in zip(model.jac_g(x, y), model.fd_jac_g(x, y)):
            _close(a, b)
