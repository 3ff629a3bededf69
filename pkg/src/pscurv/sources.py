"""Source term ``f = r^2 R / 2`` (flat torus, so the scalar curvature of
``gamma`` vanishes) evaluated as a field on the grid at a frame time."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .torus import TorusGrid


class SourceKind(str, enum.Enum):
    CONSTANT = "CONSTANT"
    SEPARABLE = "SEPARABLE"
    TABULATED = "TABULATED"


def _identity(t):
    return t


@dataclass(frozen=True)
class SourceTerm:
    """Nonnegative source ``f(p, time)``.

    * ``CONSTANT``: ``value`` is a float.
    * ``SEPARABLE``: ``value`` is a spatial field ``s(p)`` and
      ``profile(time)`` a scalar multiplier (default 1).
    * ``TABULATED``: ``times`` and ``table`` (one field per time),
      interpolated linearly in time and clamped positive.

    ``clock`` maps the frame time to the native time of the data; the
    frame changes in :mod:`pscurv.frames` compose it instead of
    resampling. ``limit`` is the blow-up limit field ``f_{t1}`` when known.
    """

    kind: SourceKind
    value: object = None
    profile: Callable[[float], float] | None = None
    times: np.ndarray | None = None
    table: np.ndarray | None = None
    monotone: bool = False
    limit: np.ndarray | float | None = None
    clock: Callable[[float], float] = _identity
    description: str = ""

    @classmethod
    def constant(cls, value: float) -> "SourceTerm":
        value = float(value)
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"source must be nonnegative, got {value}")
        return cls(SourceKind.CONSTANT, value, monotone=True, limit=value,
                   description=f"constant {value!r}")

    @classmethod
    def separable(cls, spatial, profile=None, *, monotone=False, description="") -> "SourceTerm":
        s = np.asarray(spatial, dtype=float)
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("spatial source factor must be finite and nonnegative")
        return cls(SourceKind.SEPARABLE, s, profile=profile, monotone=monotone,
                   description=description or "separable")

    @classmethod
    def tabulated(cls, times, table, *, monotone=False) -> "SourceTerm":
        times = np.asarray(times, dtype=float)
        table = np.asarray(table, dtype=float)
        if times.ndim != 1 or len(times) != len(table) or len(times) < 1:
            raise ValueError("times and table must have matching lengths")
        if np.any(np.diff(times) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        return cls(SourceKind.TABULATED, None, times=times, table=table,
                   monotone=monotone, description="tabulated")

    def __call__(self, time: float, grid: TorusGrid | None = None) -> np.ndarray | float:
        """Evaluate at frame time ``time``; scalar for constant sources
        unless ``grid`` is given."""
        s = self.clock(time)
        if self.kind is SourceKind.CONSTANT:
            out = self.value
        elif self.kind is SourceKind.SEPARABLE:
            g = 1.0 if self.profile is None else float(self.profile(s))
            out = self.value * g
        else:
            out = _interp_table(self.times, self.table, s)
        if grid is not None:
            out = np.broadcast_to(np.asarray(out, dtype=float), grid.shape)
        return out

    def with_clock(self, mapping: Callable[[float], float], limit=None) -> "SourceTerm":
        """Source seen through a time reparametrization ``t -> mapping(t)``."""
        old = self.clock
        return replace(self, clock=lambda t: old(mapping(t)),
                       limit=self.limit if limit is None else limit)

    @property
    def is_constant(self) -> bool:
        return self.kind is SourceKind.CONSTANT

    def check_monotone(self, times, grid: TorusGrid, tol=1e-12) -> bool:
        """Sampled ``f`` is pointwise nondecreasing along ``times``."""
        prev = None
        for t in times:
            cur = np.asarray(self(t, grid))
            if prev is not None and np.any(cur < prev - tol):
                return False
            prev = cur
        return True

    def infimum(self, time, grid: TorusGrid) -> float:
        return float(np.min(self(time, grid)))


def _interp_table(times, table, s):
    if s <= times[0]:
        out = table[0]
    elif s >= times[-1]:
        out = table[-1]
    else:
        i = int(np.searchsorted(times, s)) - 1
        w = (s - times[i]) / (times[i + 1] - times[i])
        out = (1 - w) * table[i] + w * table[i + 1]
    return np.maximum(out, 0.0)
