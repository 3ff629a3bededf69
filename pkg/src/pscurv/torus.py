"""Flat periodic torus with a spectral Laplacian.

Fields are plain numpy arrays whose shape equals ``grid.shape``; every
operation checks the shape and rejects non-finite values.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi

_MAGIC = b"PSCF"
_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the flat ``dim``-torus.

    Parameters
    ----------
    dim : int
        Dimension of the torus (``n - 1`` for ambient dimension ``n``).
    points_per_axis : int or tuple of int
        Even number of points per axis, at least 8. A single integer is
        used for every axis.
    period : float or tuple of float
        Period of each axis; defaults to ``2*pi``.
    """

    dim: int
    points_per_axis: int | tuple[int, ...] = 64
    period: float | tuple[float, ...] = TWO_PI
    _n: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _L: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        n = _per_axis(self.points_per_axis, self.dim, int)
        L = _per_axis(self.period, self.dim, float)
        for m in n:
            if m < 8 or m % 2:
                raise ValueError(f"points per axis must be even and >= 8, got {m}")
        for p in L:
            if not p > 0 or not np.isfinite(p):
                raise ValueError(f"period must be positive, got {p}")
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_L", L)

    @property
    def shape(self) -> tuple[int, ...]:
        return self._n

    @property
    def periods(self) -> tuple[float, ...]:
        return self._L

    @property
    def size(self) -> int:
        return int(np.prod(self._n))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self._L, self._n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self._L))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(L * np.arange(n) / n for L, n in zip(self._L, self._n))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcast coordinate arrays ``theta_1, ..., theta_dim``."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def _wavenumbers(self) -> tuple[np.ndarray, ...]:
        ks = []
        for i, (L, n) in enumerate(zip(self._L, self._n)):
            if i == self.dim - 1:
                k = np.fft.rfftfreq(n, d=L / (TWO_PI * n))
            else:
                k = np.fft.fftfreq(n, d=L / (TWO_PI * n))
            shape = [1] * self.dim
            shape[i] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    @cached_property
    def _symbol(self) -> np.ndarray:
        return -sum(k**2 for k in self._wavenumbers)

    @cached_property
    def _inverse_symbol(self) -> np.ndarray:
        sym = self._symbol.copy()
        sym.flat[0] = 1.0
        inv = 1.0 / sym
        inv.flat[0] = 0.0
        return inv

    @cached_property
    def _derivative_symbols(self) -> tuple[np.ndarray, ...]:
        out = []
        for i, k in enumerate(self._wavenumbers):
            k = k.copy()
            n = self._n[i]
            # Nyquist mode has no real first derivative
            nyq = np.isclose(np.abs(k), TWO_PI * (n // 2) / self._L[i])
            k[nyq] = 0.0
            out.append(1j * k)
        return tuple(out)

    def check(self, values) -> np.ndarray:
        """Return ``values`` as a float array on this grid or raise."""
        a = np.asarray(values, dtype=float)
        if a.shape != self._n:
            raise ValueError(f"field shape {a.shape} does not match grid shape {self._n}")
        if not np.all(np.isfinite(a)):
            raise ValueError("field contains NaN or Inf")
        return a

    def constant(self, value: float) -> np.ndarray:
        return np.full(self._n, float(value))

    @cached_property
    def _axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    def _fft(self, a):
        return np.fft.rfftn(a, s=self._n, axes=self._axes)

    def _ifft(self, a_hat):
        return np.fft.irfftn(a_hat, s=self._n, axes=self._axes)

    def laplacian(self, values) -> np.ndarray:
        """Spectral Laplacian; exact on resolved Fourier modes."""
        a = self.check(values)
        return self._ifft(self._symbol * self._fft(a))

    def gradient(self, values) -> tuple[np.ndarray, ...]:
        a_hat = self._fft(self.check(values))
        return tuple(self._ifft(d * a_hat) for d in self._derivative_symbols)

    def grad_norm_sq(self, values) -> np.ndarray:
        return sum(g**2 for g in self.gradient(values))

    def integrate(self, values) -> float:
        """Rectangle-rule quadrature over the torus (spectrally accurate)."""
        return float(np.sum(self.check(values)) * self.cell_volume)

    def mean(self, values) -> float:
        return float(np.mean(self.check(values)))

    def inner(self, a, b) -> float:
        return self.integrate(self.check(a) * self.check(b))

    def greens_solve(self, rho) -> np.ndarray:
        """Mean-zero ``phi`` with ``laplacian(phi) = rho - mean(rho)``."""
        r = self.check(rho)
        return self._ifft(self._inverse_symbol * self._fft(r))

    def green_operator(self, rho) -> np.ndarray:
        """Apply the positive Green's function: ``int G(p, q) rho(q) dV_q``.

        ``G`` satisfies ``-laplacian_q G(p, .) = delta_p - 1/Vol`` and has
        zero mean, so ``v = -green_operator(laplacian(v)) + mean(v)``.
        """
        return -self.greens_solve(rho)

    def apply_symbol(self, values, symbol) -> np.ndarray:
        """Multiply by an arbitrary (real-FFT shaped) Fourier multiplier."""
        return self._ifft(symbol * self._fft(self.check(values)))

    @property
    def laplacian_symbol(self) -> np.ndarray:
        return self._symbol

    def eigenvalue(self, mode: tuple[int, ...]) -> float:
        """Exact Laplacian eigenvalue of the integer Fourier ``mode``."""
        return -sum((TWO_PI * m / L) ** 2 for m, L in zip(mode, self._L))

    def max_wavenumber_sq(self) -> float:
        return float(-self._symbol.min())

    def header(self) -> dict:
        return {
            "dim": self.dim,
            "points_per_axis": list(self._n),
            "period_per_axis": list(self._L),
        }


def _per_axis(value, dim, kind):
    if np.ndim(value) == 0:
        return (kind(value),) * dim
    out = tuple(kind(v) for v in value)
    if len(out) != dim:
        raise ValueError(f"expected {dim} per-axis values, got {len(out)}")
    return out


def save_field(path, grid: TorusGrid, values) -> Path:
    """Write a field as binary (``.bin``) or CSV (any other suffix).

    Both layouts are row-major over the axes and carry the header
    ``dim, points_per_axis, period_per_axis``.
    """
    path = Path(path)
    a = grid.check(values)
    if path.suffix == ".bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, 1, grid.dim))
            fh.write(struct.pack(f"<{grid.dim}I", *grid.shape))
            fh.write(struct.pack(f"<{grid.dim}d", *grid.periods))
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    else:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dim", grid.dim])
            w.writerow(["points_per_axis", *grid.shape])
            w.writerow(["period_per_axis", *(repr(p) for p in grid.periods)])
            for x in a.ravel(order="C"):
                w.writerow([repr(float(x))])
    return path


def load_field(path) -> tuple[TorusGrid, np.ndarray]:
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        magic, version, dim = _HEADER.unpack_from(raw, 0)
        if magic != _MAGIC or version != 1:
            raise ValueError(f"{path}: not a field snapshot")
        off = _HEADER.size
        shape = struct.unpack_from(f"<{dim}I", raw, off)
        off += 4 * dim
        periods = struct.unpack_from(f"<{dim}d", raw, off)
        off += 8 * dim
        grid = TorusGrid(dim, tuple(shape), tuple(periods))
        data = np.frombuffer(raw, dtype="<f8", offset=off)
        return grid, data.reshape(grid.shape).astype(float)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    dim = int(rows[0][1])
    shape = tuple(int(x) for x in rows[1][1:])
    periods = tuple(float(x) for x in rows[2][1:])
    grid = TorusGrid(dim, shape, periods)
    data = np.array([float(r[0]) for r in rows[3:]])
    return grid, data.reshape(grid.shape)
