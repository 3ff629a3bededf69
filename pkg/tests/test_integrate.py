import numpy as np
import pytest
from scipy.integrate import solve_ivp

from pscurv.integrate import StepUnderflow, ThresholdExceeded, dopri5


def test_linear_decay_matches_exponential():
    lam = np.array([-1.0, -3.0, 0.5])
    times, states = dopri5(lambda t, y: lam * y, 0.0, np.ones(3), 2.0, rel_tol=1e-10, abs_tol=1e-14)
    assert times[-1] == 2.0
    assert np.allclose(states, np.exp(np.outer(times, lam)), rtol=1e-8)


def test_agrees_with_scipy_on_nonlinear_system():
    def rhs(t, y):
        return np.array([y[1], -np.sin(y[0]) + 0.1 * np.cos(t)])

    _, states = dopri5(rhs, 0.0, np.array([1.0, 0.0]), 10.0, rel_tol=1e-11, abs_tol=1e-13)
    ref = solve_ivp(rhs, (0.0, 10.0), [1.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-14)
    assert np.allclose(states[-1], ref.y[:, -1], atol=1e-8)


def test_threshold_stops_blowup():
    # y' = y^2 blows up at t = 1 from y(0) = 1
    with pytest.raises(ThresholdExceeded) as info:
        dopri5(lambda t, y: y * y, 0.0, np.ones(1), 2.0, threshold=1e4)
    exc = info.value
    assert exc.states[-1].max() > 1e4
    assert exc.times[-1] == pytest.approx(1.0 - 1.0 / exc.states[-1][0], rel=1e-5)


def test_inadmissible_states_underflow():
    # y' = -1 reaches zero at t = 1; positivity cannot be kept beyond it
    with pytest.raises(StepUnderflow) as info:
        dopri5(lambda t, y: -np.ones_like(y), 0.0, np.ones(2), 2.0,
               admissible=lambda y: bool(np.min(y) > 0))
    assert info.value.reason == "admissibility"
    assert np.all(info.value.states > 0)
    assert info.value.times[-1] == pytest.approx(1.0, abs=1e-10)


def test_stride_keeps_endpoints():
    t_all, _ = dopri5(lambda t, y: -y, 0.0, np.ones(1), 5.0, max_step=0.01)
    t_sub, s_sub = dopri5(lambda t, y: -y, 0.0, np.ones(1), 5.0, max_step=0.01, stride=10)
    assert t_sub[0] == 0.0 and t_sub[-1] == 5.0
    assert len(t_sub) < len(t_all) // 5
    assert np.allclose(s_sub[:, 0], np.exp(-t_sub), rtol=1e-9)


def test_stop_predicate_ends_early():
    times, states = dopri5(lambda t, y: np.ones_like(y), 0.0, np.zeros(1), 10.0,
                           stop=lambda t, y: t > 1.0, max_step=0.1)
    assert 1.0 < times[-1] < 1.5


def test_fifth_order_convergence():
    def err(h):
        _, s = dopri5(lambda t, y: np.cos(t) * y, 0.0, np.ones(1), 1.0,
                      rel_tol=1.0, abs_tol=1.0, first_step=h, max_step=h)
        return abs(s[-1, 0] - np.exp(np.sin(1.0)))

    order = np.log2(err(0.1) / err(0.05))
    assert 4.5 < order < 6.5
