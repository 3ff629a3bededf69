"""Changes of variables between the three time frames.

* r-frame: radius ``r``, unknown ``u`` (the lapse of ``g = u^2 dr^2 + r^2 gamma``)
* t-frame: ``t = r^(n-2) / ((n-1)(n-2))``, ``utilde = r^(1 - n/2) u``
* tau-frame: blow-up normalized to ``t1 = 1``, ``t = 1 - exp(-tau)``,
  ``v = sqrt(1 - t) utilde``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .trajectory import Trajectory


class FrameKind(str, enum.Enum):
    R = "R"
    T = "T"
    TAU = "TAU"


@dataclass(frozen=True)
class Frame:
    kind: FrameKind = FrameKind.T
    n: int = 3
    r0: float = 1.0
    t1: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FrameKind(self.kind))
        _check_n(self.n)
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if self.kind is FrameKind.TAU and self.t1 != 1.0:
            raise ValueError("the tau-frame requires blow-up normalized to t1 = 1")
        if self.t1 is not None:
            if not self.t1 > 0:
                raise ValueError(f"t1 must be positive, got {self.t1}")
            if self.kind is FrameKind.T and self.r1 <= self.r0:
                raise ValueError(f"r1={self.r1} must exceed r0={self.r0}")

    @property
    def r1(self) -> float | None:
        return None if self.t1 is None else t_to_r(self.t1, self.n)

    @property
    def t0(self) -> float:
        return r_to_t(self.r0, self.n)


def _check_n(n):
    if int(n) != n or n < 3:
        raise ValueError(f"ambient dimension n must be an integer >= 3, got {n!r}")


def r_to_t(r: float, n: int) -> float:
    _check_n(n)
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    return r ** (n - 2) / ((n - 1) * (n - 2))


def t_to_r(t: float, n: int) -> float:
    _check_n(n)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return ((n - 1) * (n - 2) * t) ** (1.0 / (n - 2))


def t_to_tau(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t >= 1):
        raise ValueError("t must lie in [0, 1) once blow-up is normalized to t1 = 1")
    out = -np.log1p(-t)
    return float(out) if out.ndim == 0 else out


def tau_to_t(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be nonnegative")
    out = -np.expm1(-tau)
    return float(out) if out.ndim == 0 else out


def _positive(field, name):
    a = np.asarray(field, dtype=float)
    if np.any(a <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return a


def u_to_utilde(u, r: float, n: int):
    _check_n(n)
    return r ** (1 - n / 2) * _positive(u, "u")


def utilde_to_u(utilde, r: float, n: int):
    _check_n(n)
    return r ** (n / 2 - 1) * _positive(utilde, "utilde")


def utilde_to_v(utilde, t: float):
    if not 0 <= t < 1:
        raise ValueError(f"t must lie in [0, 1), got {t}")
    return math.sqrt(1.0 - t) * np.asarray(utilde, dtype=float)


def v_to_utilde(v, t: float):
    if not 0 <= t < 1:
        raise ValueError(f"t must lie in [0, 1), got {t}")
    return np.asarray(v, dtype=float) / math.sqrt(1.0 - t)


def normalize_blowup(traj: Trajectory, t1_raw: float) -> Trajectory:
    """Rescale a t-frame trajectory so that blow-up happens at ``t = 1``.

    Uses the symmetry ``utilde -> lam * utilde(p, lam^2 t)`` with
    ``lam = sqrt(t1_raw)``; the source is resampled at the rescaled times.
    """
    if traj.frame.kind is not FrameKind.T:
        raise ValueError("normalize_blowup expects a t-frame trajectory")
    if not t1_raw > 0:
        raise ValueError(f"t1_raw must be positive, got {t1_raw}")
    if t1_raw <= traj.times[-1]:
        raise ValueError(f"t1_raw={t1_raw!r} does not exceed the last sample time {traj.times[-1]!r}")
    s = float(t1_raw)
    source = None
    if traj.source is not None:
        source = traj.source.with_clock(lambda t: t * s)
    return Trajectory(
        grid=traj.grid,
        frame=Frame(FrameKind.T, traj.frame.n, traj.frame.r0, 1.0),
        times=traj.times / s,
        fields=traj.fields * math.sqrt(s),
        source=source,
    )


def to_tau_frame(traj: Trajectory) -> Trajectory:
    """Map a normalized t-frame trajectory (``t1 = 1``) to the tau-frame."""
    if traj.frame.kind is not FrameKind.T or traj.frame.t1 != 1.0:
        raise ValueError("to_tau_frame needs a t-frame trajectory normalized to t1 = 1")
    keep = (traj.times >= 0) & (traj.times < 1)
    times = traj.times[keep]
    one_minus_t = 1.0 - times
    fields = traj.fields[keep] * np.sqrt(one_minus_t).reshape(-1, *([1] * traj.grid.dim))
    taus = -np.log(one_minus_t)
    source = None
    if traj.source is not None:
        source = traj.source.with_clock(tau_to_t)
    return Trajectory(
        grid=traj.grid,
        frame=Frame(FrameKind.TAU, traj.frame.n, traj.frame.r0, 1.0),
        times=taus,
        fields=fields,
        source=source,
    )


@dataclass(frozen=True)
class TrivialSolution:
    """Spatially constant blow-up solution for constant ``f0``.

    ``u(r) = 1 / sqrt(c0 ((r1/r)^(n-2) - 1))`` with
    ``r1^(n-2) = (n-1)(n-2) / (2 f0) * u0^-2 * r0^(n-2) + r0^(n-2)`` and
    ``c0 = 2 f0 / ((n-1)(n-2))``.
    """

    n: int = 3
    f0: float = 0.5
    r0: float = 1.0
    u0: float = 1.0

    def __post_init__(self):
        _check_n(self.n)
        for name in ("f0", "r0", "u0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def c0(self) -> float:
        return 2.0 * self.f0 / ((self.n - 1) * (self.n - 2))

    @property
    def r1(self) -> float:
        m = self.n - 2
        return ((self.n - 1) * m / (2.0 * self.f0) * self.u0**-2 * self.r0**m + self.r0**m) ** (1.0 / m)

    @property
    def t0(self) -> float:
        return r_to_t(self.r0, self.n)

    @property
    def t1(self) -> float:
        return r_to_t(self.r1, self.n)

    def __call__(self, r):
        return trivial_solution(self, r)

    def utilde(self, t):
        """Closed form in the t-frame."""
        r = np.vectorize(lambda s: t_to_r(s, self.n))(np.asarray(t, dtype=float))
        return r ** (1 - self.n / 2) * self(r)


def trivial_solution(params: TrivialSolution, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < params.r0) or np.any(r >= params.r1):
        raise ValueError(f"r must lie in [r0, r1) = [{params.r0}, {params.r1})")
    out = 1.0 / np.sqrt(params.c0 * ((params.r1 / r) ** (params.n - 2) - 1.0))
    return float(out) if out.ndim == 0 else out
