"""Curve shortening flow of convex plane curves in the normal-angle
parameterization, and its lift to solutions on the 2-torus.

Support form ``S_t = -1/(S'' + S)``; curvature form ``k_t = k^2 (k'' + k)``
with ``k = 1/(S'' + S)``. The enclosed area obeys ``A(t) = A(0) - 2 pi t``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import integrate
from .evolution import BlowupDetected, StepUnderflow, evolve
from .frames import Frame, FrameKind
from .sources import SourceTerm
from .torus import TorusGrid
from .trajectory import Trajectory


class ConvexityLost(RuntimeError):
    pass


def _circle_grid(points: int) -> TorusGrid:
    return TorusGrid(1, points, 2.0 * math.pi)


def _radius_of_curvature(grid, support):
    return grid.laplacian(support) + support


def _support_from_radius(grid, rho):
    # S'' + S = rho; the kernel (modes +-1) is a translation and is dropped
    k2 = -grid.laplacian_symbol
    symbol = np.zeros_like(k2)
    ok = np.abs(k2 - 1.0) > 0.5
    symbol[ok] = 1.0 / (1.0 - k2[ok])
    return grid.apply_symbol(rho, symbol)


def _area(grid, support, rho):
    return 0.5 * grid.integrate(support * rho)


@dataclass(frozen=True)
class ConvexCurve:
    """Strictly convex closed curve given by its support function."""

    grid: TorusGrid
    support: np.ndarray

    def __post_init__(self):
        if self.grid.dim != 1:
            raise ValueError("a curve lives on the 1-torus of normal angles")
        if not math.isclose(self.grid.periods[0], 2 * math.pi):
            raise ValueError("normal angles have period 2*pi")
        s = self.grid.check(self.support)
        if np.any(_radius_of_curvature(self.grid, s) <= 0):
            raise ConvexityLost("S'' + S must be positive")
        if _area(self.grid, s, _radius_of_curvature(self.grid, s)) <= 0:
            raise ValueError("enclosed area must be positive")

    @classmethod
    def circle(cls, radius: float = 1.0, points: int = 128) -> "ConvexCurve":
        grid = _circle_grid(points)
        return cls(grid, grid.constant(radius))

    @classmethod
    def ellipse(cls, a: float = 2.0, b: float = 1.0, points: int = 128) -> "ConvexCurve":
        grid = _circle_grid(points)
        (th,) = grid.coords
        return cls(grid, np.sqrt(a * a * np.cos(th) ** 2 + b * b * np.sin(th) ** 2))

    @property
    def theta(self) -> np.ndarray:
        return self.grid.axes[0]

    @property
    def radius_of_curvature(self) -> np.ndarray:
        return _radius_of_curvature(self.grid, self.support)

    @property
    def curvature(self) -> np.ndarray:
        return 1.0 / self.radius_of_curvature

    @property
    def area(self) -> float:
        return _area(self.grid, self.support, self.radius_of_curvature)

    @property
    def extinction_time(self) -> float:
        return self.area / (2.0 * math.pi)

    def boundary(self):
        """Points ``S n + S' t`` with ``n = (cos, sin)``, ``t = (-sin, cos)``."""
        th = self.theta
        (ds,) = self.grid.gradient(self.support)
        x = self.support * np.cos(th) - ds * np.sin(th)
        y = self.support * np.sin(th) + ds * np.cos(th)
        return x, y


@dataclass(frozen=True)
class CurveTrajectory:
    """Samples of a CSF run: curvature always, support when the support
    form was integrated (otherwise reconstructed up to translation)."""

    grid: TorusGrid
    times: np.ndarray
    curvature: np.ndarray
    support: np.ndarray | None = None

    def __len__(self):
        return len(self.times)

    def supports(self) -> np.ndarray:
        if self.support is not None:
            return self.support
        return np.array([_support_from_radius(self.grid, 1.0 / k) for k in self.curvature])

    @property
    def areas(self) -> np.ndarray:
        return np.array([
            _area(self.grid, s, 1.0 / k) for s, k in zip(self.supports(), self.curvature)
        ])

    def area_law_deviation(self) -> float:
        """``max |A(t) - A(0) + 2 pi t| / A(0)``."""
        a = self.areas
        return float(np.max(np.abs(a - a[0] + 2.0 * math.pi * (self.times - self.times[0]))) / a[0])

    def curve(self, k: int) -> ConvexCurve:
        return ConvexCurve(self.grid, self.supports()[k])


def csf_evolve_support(
    curve: ConvexCurve,
    t_end: float,
    *,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-13,
    max_curvature: float = 1e6,
    stride: int = 1,
) -> CurveTrajectory:
    """Integrate ``S_t = -1/(S'' + S)`` from ``t = 0``.

    Raises
    ------
    ConvexityLost
        A step cannot be completed without ``S'' + S <= 0``.
    BlowupDetected
        ``max k`` exceeded ``max_curvature`` (carries the partial run).
    """
    grid = curve.grid
    if not t_end < curve.extinction_time:
        raise ValueError(f"t_end={t_end} must precede extinction at {curve.extinction_time!r}")

    def rhs(t, s):
        return -1.0 / _radius_of_curvature(grid, s)

    def wrap(times, states):
        k = np.array([1.0 / _radius_of_curvature(grid, s) for s in states])
        return CurveTrajectory(grid, times, k, states)

    def too_curved(t, s):
        return float(np.max(1.0 / _radius_of_curvature(grid, s))) > max_curvature

    try:
        times, states = integrate.dopri5(
            rhs, 0.0, curve.support, t_end, rel_tol=rel_tol, abs_tol=abs_tol,
            admissible=lambda s: bool(np.min(_radius_of_curvature(grid, s)) > 0),
            stride=stride, stop=too_curved,
        )
    except integrate.StepUnderflow as exc:
        if exc.reason == "admissibility":
            raise ConvexityLost(str(exc)) from None
        raise StepUnderflow(str(exc), None) from None
    out = wrap(times, states)
    if times[-1] < t_end:
        raise BlowupDetected(f"curvature exceeded {max_curvature:g} at t={times[-1]!r}", out)
    return out


def csf_evolve_curvature(
    k0,
    t_end: float,
    *,
    grid: TorusGrid | None = None,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-13,
    blowup_threshold: float = 1e6,
    stride: int = 1,
) -> CurveTrajectory:
    """Integrate ``k_t = k^2 (k'' + k)`` from ``t = 0``.

    This is the t-frame equation with ``f = 1`` on the circle of normal
    angles, so :func:`pscurv.evolution.evolve` does the work and its
    errors propagate unchanged.
    """
    k0 = np.asarray(k0, dtype=float)
    grid = _circle_grid(len(k0)) if grid is None else grid
    traj = evolve(
        grid, k0, Frame(FrameKind.T), SourceTerm.constant(1.0), t_end, t_start=0.0,
        rel_tol=rel_tol, abs_tol=abs_tol, blowup_threshold=blowup_threshold, stride=stride,
    )
    return CurveTrajectory(grid, traj.times, traj.fields)


def normalized_curvature(traj: CurveTrajectory) -> np.ndarray:
    """``sqrt(A(t)/pi) k`` for every sample."""
    return np.sqrt(traj.areas / math.pi)[:, None] * traj.curvature


def csf_to_torus_solution(traj: CurveTrajectory, second_axis_points: int = 8) -> Trajectory:
    """Lift ``utilde(th1, th2, t) = k(th1, t)`` to a t-frame trajectory on
    the 2-torus with ``f = 1``."""
    n1 = traj.grid.shape[0]
    grid = TorusGrid(2, (n1, second_axis_points), 2.0 * math.pi)
    fields = np.repeat(traj.curvature[:, :, None], second_axis_points, axis=2)
    return Trajectory(grid, Frame(FrameKind.T), traj.times, fields, SourceTerm.constant(1.0))


def export_curve_csv(path, traj: CurveTrajectory) -> Path:
    """Write rows ``t, theta, S, k, x, y`` for every sample and angle."""
    path = Path(path)
    theta = traj.grid.axes[0]
    supports = traj.supports()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "S", "k", "x", "y"])
        for t, s, k in zip(traj.times, supports, traj.curvature):
            (ds,) = traj.grid.gradient(s)
            x = s * np.cos(theta) - ds * np.sin(theta)
            y = s * np.sin(theta) + ds * np.cos(theta)
            for row in zip(theta, s, k, x, y):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return path
