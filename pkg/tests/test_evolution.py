import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from pscurv.csf import ConvexCurve, csf_evolve_curvature, csf_to_torus_solution
from pscurv.evolution import (
    BlowupDetected,
    FitRejected,
    estimate_blowup_time,
    evolve,
    evolve_to_blowup,
    fit_blowup_time,
    rescaled_blowup,
    residual,
    trajectory_residuals,
)
from pscurv.frames import Frame, FrameKind, TrivialSolution
from pscurv.sources import SourceTerm
from pscurv.torus import TorusGrid
from pscurv.trajectory import Trajectory

T_FRAME = Frame(FrameKind.T, 3, 1.0)
TAU_FRAME = Frame(FrameKind.TAU, 3, 1.0, 1.0)
R_FRAME = Frame(FrameKind.R, 3, 1.0)


@pytest.fixture
def grid():
    return TorusGrid(2, 16)


def test_tau_frame_fixed_point(grid):
    traj = evolve(grid, grid.constant(1.0), TAU_FRAME, SourceTerm.constant(0.5), 5.0)
    assert np.max(np.abs(traj.fields - 1.0)) < 1e-13


def test_zero_source_keeps_constant(grid):
    traj = evolve(grid, grid.constant(1.7), T_FRAME, SourceTerm.constant(0.0), 3.0)
    assert np.max(np.abs(traj.fields - 1.7)) < 1e-14


def test_zero_source_is_heat_like(grid):
    # u^2 lap u with f = 0 preserves max/min ordering and contracts the spread
    x1, _ = grid.coords
    traj = evolve(grid, 1.0 + 0.2 * np.cos(x1), T_FRAME, SourceTerm.constant(0.0), 3.0)
    spread = traj.sup - traj.inf
    assert np.all(np.diff(spread) <= 1e-12)
    assert traj.sup.max() <= 1.2 + 1e-12 and traj.inf.min() >= 0.8 - 1e-12


def test_trivial_closed_form(grid):
    p = TrivialSolution(3, 0.5, 1.0, 1.0)
    raw = evolve_to_blowup(grid, grid.constant(1.0), T_FRAME, SourceTerm.constant(0.5),
                           t_start=p.t0, blowup_threshold=1e5)
    early = raw.times <= 0.9 * p.t1
    assert np.max(np.abs(raw.sup[early] / p.utilde(raw.times[early]) - 1)) <= 1e-6
    assert abs(estimate_blowup_time(raw) - 1.5) <= 1e-4


def test_r_frame_matches_closed_form():
    g = TorusGrid(1, 8)
    p = TrivialSolution(3, 0.5, 1.0, 1.0)
    traj = evolve(g, g.constant(1.0), R_FRAME, SourceTerm.constant(0.5), 2.5, rel_tol=1e-10)
    assert np.allclose(traj.sup, p(traj.times), rtol=1e-8)


def test_blowup_carries_partial_trajectory(grid):
    with pytest.raises(BlowupDetected) as info:
        evolve(grid, grid.constant(1.0), T_FRAME, SourceTerm.constant(0.5), 10.0,
               t_start=0.5, blowup_threshold=100.0)
    traj = info.value.trajectory
    assert traj.sup[-1] > 100.0 and traj.times[-1] < 1.5


def test_nonpositive_initial_data_rejected(grid):
    with pytest.raises(ValueError):
        evolve(grid, grid.constant(0.0), T_FRAME, SourceTerm.constant(0.5), 1.0)


def _self_similar(grid, omega, f, times):
    fields = omega / np.sqrt(1.0 - times).reshape(-1, *([1] * grid.dim))
    return Trajectory(grid, T_FRAME, times, fields, SourceTerm.constant(f))


def test_residual_of_exact_self_similar(grid):
    taus = np.linspace(0.0, 5.0, 30)
    fields = np.broadcast_to(grid.constant(1.0), (30, *grid.shape))
    traj = Trajectory(grid, TAU_FRAME, taus, fields, SourceTerm.constant(0.5))
    assert trajectory_residuals(traj).max() <= 1e-10
    # t-frame image, sampled uniformly in tau
    t_traj = _self_similar(grid, grid.constant(1.0), 0.5, -np.expm1(-np.arange(0.0, 3.0, 1e-3)))
    assert trajectory_residuals(t_traj).max() <= 1e-8


def test_residual_second_order():
    g = TorusGrid(1, 8)
    p = TrivialSolution(3, 0.5, 1.0, 1.0)

    def worst(m):
        times = np.linspace(0.5, 1.2, m)
        fields = np.array([g.constant(p.utilde(t)) for t in times])
        return trajectory_residuals(Trajectory(g, T_FRAME, times, fields, SourceTerm.constant(0.5))).max()

    coarse, fine = worst(41), worst(81)
    assert coarse > 0
    assert math.log2(coarse / fine) >= 1.9


def test_residual_detects_corruption(grid):
    traj = _self_similar(grid, grid.constant(1.0), 0.5, np.linspace(0.0, 0.9, 50))
    fields = traj.fields.copy()
    fields[20] *= 1.1
    bad = Trajectory(grid, T_FRAME, traj.times, fields, traj.source)
    res = trajectory_residuals(bad)
    assert res[19] > 1e-2 and res[20] > 1e-2
    pair = ((bad.times[20], bad.fields[20]), (bad.times[21], bad.fields[21]))
    assert residual(pair, T_FRAME, bad.source, grid) > 1e-2


def test_blowup_fit_exact_self_similar():
    times = np.linspace(0.0, 1.0 - 1e-6, 400)
    assert abs(fit_blowup_time(times, 1.0 / np.sqrt(1.0 - times)).t1 - 1.0) <= 1e-10
    g = TorusGrid(1, 8)
    traj = _self_similar(g, g.constant(1.0), 0.5, times)
    assert abs(estimate_blowup_time(traj) - 1.0) <= 1e-10


def test_blowup_fit_rejects_bounded_data():
    times = np.linspace(0.0, 1.0, 100)
    with pytest.raises(FitRejected):
        fit_blowup_time(times, 1.0 + 0.01 * times)


def test_blowup_time_of_shrinking_circle():
    curve = ConvexCurve.circle(1.0, 32)
    traj = csf_evolve_curvature(curve.curvature, 0.5 * (1 - 1e-6), rel_tol=1e-12)
    lift = csf_to_torus_solution(traj)
    assert abs(estimate_blowup_time(lift) - 0.5) <= 1e-6


def test_subsolution_ode_blowup():
    # with f = 2c the constant state v* = 1/sqrt(2c) solves
    # v' = 2c v^3 - v/2, and w = v^-2 gives w = 4c - 2c e^tau: blow-up at ln 2
    c = 0.3
    g = TorusGrid(2, 8)
    v0 = 1.0 / math.sqrt(2.0 * c)
    with pytest.raises(BlowupDetected) as info:
        evolve(g, g.constant(v0), TAU_FRAME, SourceTerm.constant(2.0 * c), 5.0,
               rel_tol=1e-10, blowup_threshold=1e4)
    tau_pde = info.value.trajectory.times[-1]

    def hit(t, y):
        return y[0] - 1e4

    hit.terminal = True
    ode = solve_ivp(lambda t, y: 2 * c * y**3 - y / 2, (0.0, 5.0), [v0], method="DOP853",
                    rtol=1e-12, atol=1e-12, events=hit)
    tau_ode = ode.t_events[0][0]
    assert abs(tau_pde - tau_ode) <= 0.01 * tau_ode
    assert abs(tau_ode - math.log(2.0)) <= 0.01 * math.log(2.0)


def test_subsolution_bounds_nonconstant_run():
    # comparison with the spatially constant solution started at min v0
    g = TorusGrid(2, 16)
    x1, x2 = g.coords
    f = SourceTerm.constant(0.5)
    v0 = 1.05 + 0.1 * np.cos(x1) * np.sin(x2)
    lower = float(v0.min())
    try:
        traj = evolve(g, v0, TAU_FRAME, f, 2.0, blowup_threshold=1e4)
    except BlowupDetected as exc:
        traj = exc.trajectory
    ode = solve_ivp(lambda t, y: 0.5 * y**3 - y / 2, (0.0, traj.times[-1]), [lower],
                    method="DOP853", rtol=1e-12, atol=1e-12, t_eval=traj.times, dense_output=True)
    assert np.all(traj.inf >= ode.y[0] * (1 - 1e-7))


def test_rescaled_blowup_normalizes(grid):
    x1, _ = grid.coords
    f = SourceTerm.constant(0.5)
    run = rescaled_blowup(grid, 1.2 + 0.05 * np.cos(x1), f, frame=T_FRAME, tau_max=8.0)
    assert run.normalized.frame.t1 == 1.0
    assert run.tau.frame.kind is FrameKind.TAU
    assert run.tau.times[0] == pytest.approx(0.0)
    # the constant mode converges to 1/sqrt(2 f) = 1
    assert abs(grid.mean(run.tau.fields[-1]) - 1.0) < 1e-3
