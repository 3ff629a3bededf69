"""Dormand-Prince 5(4) stepping with PI step-size control.

Steps that produce an inadmissible state (non-finite, or rejected by the
caller's ``admissible`` predicate, e.g. loss of positivity) are rejected
and retried with half the step; states are never clipped.
"""

from __future__ import annotations

import numpy as np

# Dormand & Prince (1980), FSAL form
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_LOW

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


class StepUnderflow(RuntimeError):
    """Step size fell below the floor without producing an acceptable step.

    ``reason`` is ``"tolerance"`` or ``"admissibility"``; ``times`` and
    ``states`` hold the accepted part of the run.
    """

    def __init__(self, message, reason, times, states):
        super().__init__(message)
        self.reason = reason
        self.times = times
        self.states = states


class ThresholdExceeded(RuntimeError):
    def __init__(self, message, times, states):
        super().__init__(message)
        self.times = times
        self.states = states


def dopri5(
    rhs,
    t0,
    y0,
    t_end,
    *,
    rel_tol=1e-8,
    abs_tol=1e-12,
    first_step=None,
    max_step=np.inf,
    min_step=1e-14,
    max_steps=2_000_000,
    admissible=None,
    threshold=None,
    stride=1,
    stop=None,
):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y) -> array`` of the same shape as ``y``.
    admissible : callable, optional
        ``admissible(y) -> bool``; failing states are rejected and the
        step halved.
    threshold : float, optional
        Stop with :class:`ThresholdExceeded` once ``max(y)`` exceeds it.
    stride : int
        Record every ``stride``-th accepted step (the first and last
        states are always recorded).
    stop : callable, optional
        ``stop(t, y) -> bool``; ends the run normally after the step.

    Returns
    -------
    times : ndarray
    states : ndarray, shape (n_samples, *y0.shape)
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    times = [t]
    states = [y.copy()]
    if t_end <= t:
        raise ValueError("t_end must exceed the initial time")
    k1 = rhs(t, y)
    if first_step is None:
        scale = abs_tol + rel_tol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(k1) / scale)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, t_end - t, max_step)
    else:
        h = float(first_step)
    err_prev = 1.0
    n_accepted = 0
    last_reject = "tolerance"

    def _fail(reason):
        return StepUnderflow(
            f"step size {h:.3e} below {min_step:.1e} at t={t!r} ({reason})",
            reason,
            np.array(times),
            np.array(states),
        )

    for _ in range(max_steps):
        if t >= t_end:
            break
        h = min(h, t_end - t, max_step)
        if h < min_step and t + h < t_end:
            raise _fail(last_reject)
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            if i == 6:
                y_new = yi
            ks.append(rhs(t + _C[i] * h, yi))
        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(ks[6])) or (
            admissible is not None and not admissible(y_new)
        ):
            last_reject = "admissibility"
            h *= 0.5
            continue
        err_vec = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if err > 1.0:
            last_reject = "tolerance"
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
            continue
        t_new = t + h
        if t_new == t:
            raise _fail("tolerance")
        t, y, k1 = t_new, y_new, ks[6]
        n_accepted += 1
        finished = t >= t_end or (stop is not None and stop(t, y))
        over = threshold is not None and float(np.max(y)) > threshold
        if n_accepted % stride == 0 or finished or over:
            times.append(t)
            states.append(y.copy())
        if over:
            raise ThresholdExceeded(
                f"max value {float(np.max(y)):.3e} exceeded {threshold:.3e} at t={t!r}",
                np.array(times),
                np.array(states),
            )
        if finished:
            break
        err = max(err, 1e-10)
        factor = _SAFETY * err ** (-_ALPHA) * err_prev**_BETA
        h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        err_prev = err
    else:
        raise RuntimeError(f"max_steps={max_steps} exhausted at t={t!r}")
    return np.array(times), np.array(states)
