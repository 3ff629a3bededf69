"""Method-of-lines time integration in the r-, t- and tau-frames.

Equations (fixed flat metric, so ``A = (n-1)(n-2)/2``):

* r-frame:   ``(n-1) r u_r = u^2 lap u + (n-1)(n-2)/2 u + f u^3``
* t-frame:   ``utilde_t = utilde^2 lap utilde + f utilde^3``
* tau-frame: ``v_tau = v^2 lap v + f v^3 - v/2``
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import integrate
from .frames import Frame, FrameKind, normalize_blowup, to_tau_frame
from .sources import SourceTerm
from .torus import TorusGrid
from .trajectory import Trajectory

log = logging.getLogger(__name__)


class BlowupDetected(RuntimeError):
    """``sup`` of the solution crossed the blow-up threshold.

    ``trajectory`` holds the run up to and including the crossing sample.
    """

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class StepUnderflow(RuntimeError):
    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class FitRejected(ValueError):
    pass


def rhs_function(grid: TorusGrid, frame: Frame, source: SourceTerm):
    """Return ``F(time, field)`` for the frame's evolution equation."""
    kind = frame.kind
    n = frame.n
    a_coef = 0.5 * (n - 1) * (n - 2)

    def f_at(time):
        return source(time) if source.is_constant else np.asarray(source(time, grid))

    if kind is FrameKind.T:
        def rhs(t, u):
            return u * u * (grid.laplacian(u) + f_at(t) * u)
    elif kind is FrameKind.TAU:
        def rhs(tau, v):
            return v * v * (grid.laplacian(v) + f_at(tau) * v) - 0.5 * v
    else:
        def rhs(r, u):
            return (u * u * (grid.laplacian(u) + f_at(r) * u) + a_coef * u) / ((n - 1) * r)
    return rhs


def default_start(frame: Frame) -> float:
    return {FrameKind.R: frame.r0, FrameKind.T: frame.t0, FrameKind.TAU: 0.0}[frame.kind]


def evolve(
    grid: TorusGrid,
    initial,
    frame: Frame,
    source: SourceTerm,
    t_end: float,
    *,
    t_start: float | None = None,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
    blowup_threshold: float = 1e6,
    min_step: float = 1e-14,
    max_step: float = np.inf,
    stride: int = 1,
    max_steps: int = 2_000_000,
) -> Trajectory:
    """Integrate the frame's PDE from ``initial`` up to ``t_end``.

    Parameters
    ----------
    t_start : float, optional
        Initial time; defaults to ``r0`` (r-frame), ``t0 = r_to_t(r0)``
        (t-frame) or ``0`` (tau-frame).
    blowup_threshold : float
        Stop with :class:`BlowupDetected` once ``max`` exceeds this.
    stride : int
        Keep every ``stride``-th accepted step.

    Raises
    ------
    BlowupDetected, StepUnderflow
        Both carry the partial trajectory.
    """
    u0 = grid.check(initial)
    if np.any(u0 <= 0):
        raise ValueError("initial data must be strictly positive")
    t0 = default_start(frame) if t_start is None else float(t_start)
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed the initial time {t0}")
    if frame.kind is FrameKind.TAU and t0 < 0:
        raise ValueError("tau-frame runs start at tau >= 0")
    rhs = rhs_function(grid, frame, source)

    def wrap(times, states):
        return Trajectory(grid, frame, times, states, source)

    try:
        times, states = integrate.dopri5(
            rhs, t0, u0, t_end,
            rel_tol=rel_tol, abs_tol=abs_tol,
            min_step=min_step, max_step=max_step, max_steps=max_steps,
            admissible=lambda y: bool(np.min(y) > 0),
            threshold=blowup_threshold, stride=stride,
        )
    except integrate.ThresholdExceeded as exc:
        raise BlowupDetected(str(exc), wrap(exc.times, exc.states)) from None
    except integrate.StepUnderflow as exc:
        raise StepUnderflow(str(exc), wrap(exc.times, exc.states)) from None
    return wrap(times, states)


def evolve_to_blowup(grid, initial, frame, source, *, t_max=np.inf, **opts) -> Trajectory:
    """Like :func:`evolve` but returns the partial run on blow-up.

    Raises ``RuntimeError`` if the run reaches ``t_max`` without blowing up.
    """
    try:
        traj = evolve(grid, initial, frame, source, t_max if np.isfinite(t_max) else 1e300, **opts)
    except BlowupDetected as exc:
        return exc.trajectory
    raise RuntimeError(f"no blow-up detected before t={traj.times[-1]!r}")


def _midpoint_rhs(rhs, t0, u0, t1, u1):
    """Simpson average of ``rhs`` over ``[t0, t1]`` using the cubic
    Hermite midpoint state built from both endpoints."""
    h = t1 - t0
    f0 = rhs(t0, u0)
    f1 = rhs(t1, u1)
    um = 0.5 * (u0 + u1) + h * (f0 - f1) / 8.0
    fm = rhs(t0 + 0.5 * h, um)
    return (f0 + 4.0 * fm + f1) / 6.0


def residual(pair, frame: Frame, source: SourceTerm, grid: TorusGrid) -> float:
    """A posteriori PDE residual between two consecutive samples.

    ``pair`` is ``((t0, u0), (t1, u1))``. Returns the max-norm of the
    difference quotient minus the time-averaged right-hand side, divided
    by ``max(1, |rhs|_max)`` so the number stays meaningful near blow-up.
    """
    (t0, u0), (t1, u1) = pair
    if not t1 > t0:
        raise ValueError("samples must be ordered in time")
    u0 = grid.check(u0)
    u1 = grid.check(u1)
    rhs = rhs_function(grid, frame, source)
    avg = _midpoint_rhs(rhs, t0, u0, t1, u1)
    dq = (u1 - u0) / (t1 - t0)
    return float(np.max(np.abs(dq - avg)) / max(1.0, float(np.max(np.abs(avg)))))


def trajectory_residuals(traj: Trajectory, source: SourceTerm | None = None) -> np.ndarray:
    """Residual of every consecutive sample pair of ``traj``."""
    source = traj.source if source is None else source
    return np.array([
        residual((traj[k], traj[k + 1]), traj.frame, source, traj.grid)
        for k in range(len(traj) - 1)
    ])


@dataclass(frozen=True)
class BlowupFit:
    t1: float
    slope: float
    r_squared: float
    n_points: int


def fit_blowup_time(times, sup_values, *, fraction=0.2, min_r2=0.999, min_growth=10.0) -> BlowupFit:
    """Fit ``1/sup^2`` linearly in time over the last ``fraction`` of the
    samples and return its root."""
    times = np.asarray(times, dtype=float)
    sup_values = np.asarray(sup_values, dtype=float)
    if sup_values[-1] < min_growth * sup_values[0]:
        raise FitRejected(
            f"sup grew only {sup_values[-1] / sup_values[0]:.3g}x (need {min_growth}x)"
        )
    m = max(3, int(np.ceil(fraction * len(times))))
    if m > len(times):
        raise FitRejected("too few samples for the blow-up fit")
    t = times[-m:]
    y = 1.0 / sup_values[-m:] ** 2
    # shift the abscissa for conditioning near the root
    fit = stats.linregress(t - t[-1], y)
    r2 = fit.rvalue**2
    if not fit.slope < 0:
        raise FitRejected("1/sup^2 is not decreasing")
    if r2 < min_r2:
        raise FitRejected(f"fit R^2 = {r2:.6f} below {min_r2}")
    return BlowupFit(t[-1] - fit.intercept / fit.slope, fit.slope, r2, m)


def estimate_blowup_time(traj: Trajectory, *, fraction=0.2, min_r2=0.999) -> float:
    """Blow-up time of a t-frame trajectory from the inverse-square law
    ``sup utilde ~ c / sqrt(t1 - t)``."""
    if traj.frame.kind is not FrameKind.T:
        raise ValueError("estimate_blowup_time expects a t-frame trajectory")
    return fit_blowup_time(traj.times, traj.sup, fraction=fraction, min_r2=min_r2).t1


@dataclass(frozen=True)
class SelfSimilarRun:
    """A t-frame blow-up run together with its normalized forms."""

    raw: Trajectory
    t1_raw: float
    normalized: Trajectory
    tau: Trajectory


def rescaled_blowup(grid, initial, source, *, frame=None, t_start=0.0, tau_max=None, **opts) -> SelfSimilarRun:
    """Evolve ``utilde`` in the t-frame to blow-up, estimate ``t1``,
    normalize it to 1 and map the run into the tau-frame.

    The limit field ``f_{t1}`` of the returned sources is ``f(t1_raw)``.
    """
    frame = Frame(FrameKind.T) if frame is None else frame
    raw = evolve_to_blowup(grid, initial, frame, source, t_start=t_start, **opts)
    t1_raw = estimate_blowup_time(raw)
    log.info("estimated blow-up time %.15g after %d samples", t1_raw, len(raw))
    limit = np.asarray(source(t1_raw, grid)).copy()
    raw = Trajectory(grid, raw.frame, raw.times, raw.fields,
                     source.with_clock(lambda t: t, limit=limit))
    normalized = normalize_blowup(raw, t1_raw)
    tau = to_tau_frame(normalized)
    if tau_max is not None:
        tau = tau.until(tau_max)
    return SelfSimilarRun(raw, t1_raw, normalized, tau)
