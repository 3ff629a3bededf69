from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .sources import SourceTerm
from .torus import TorusGrid

if TYPE_CHECKING:
    from .frames import Frame


@dataclass(frozen=True)
class Trajectory:
    """Ordered samples ``(times[k], fields[k])`` of a solution in one frame.

    ``fields`` has shape ``(n_samples, *grid.shape)``. Times are strictly
    increasing and every field is strictly positive.
    """

    grid: TorusGrid
    frame: "Frame"
    times: np.ndarray
    fields: np.ndarray
    source: SourceTerm | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        fields = np.asarray(self.fields, dtype=float)
        if times.ndim != 1 or fields.shape != (len(times), *self.grid.shape):
            raise ValueError(
                f"fields shape {fields.shape} incompatible with {len(times)} samples "
                f"on grid {self.grid.shape}"
            )
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(~np.isfinite(fields)) or np.any(fields <= 0):
            raise ValueError("trajectory fields must be finite and strictly positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "fields", fields)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return self.times[k], self.fields[k]

    @property
    def sup(self) -> np.ndarray:
        return self.fields.reshape(len(self), -1).max(axis=1)

    @property
    def inf(self) -> np.ndarray:
        return self.fields.reshape(len(self), -1).min(axis=1)

    def select(self, mask) -> "Trajectory":
        mask = np.asarray(mask)
        return replace(self, times=self.times[mask], fields=self.fields[mask])

    def until(self, time) -> "Trajectory":
        return self.select(self.times <= time)

    def since(self, time) -> "Trajectory":
        return self.select(self.times >= time)

    def at(self, time) -> np.ndarray:
        """Field at ``time``, linearly interpolated between samples."""
        if not self.times[0] <= time <= self.times[-1]:
            raise ValueError(f"time {time} outside [{self.times[0]}, {self.times[-1]}]")
        i = int(np.searchsorted(self.times, time))
        if self.times[i] == time:
            return self.fields[i]
        w = (time - self.times[i - 1]) / (self.times[i] - self.times[i - 1])
        return (1 - w) * self.fields[i - 1] + w * self.fields[i]
