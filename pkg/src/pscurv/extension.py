"""Reconstruct the r-frame picture of a blow-up run near ``r1``: the
profile estimates ``u sqrt((r1/r)^(n-2) - 1)``, the arc-length variable
``rtilde = rtilde0 + int u dr`` and the mean curvature of the level sets.

The r-frame is never integrated directly; everything is mapped back from
t-frame samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as spi
from scipy import stats

from .frames import normalize_blowup, t_to_r, to_tau_frame, utilde_to_u
from .stationary import stationary_residual
from .trajectory import Trajectory


class DivergentTail(RuntimeError):
    pass


def omega_estimate(u, r: float, r1: float, n: int = 3) -> np.ndarray:
    """``u sqrt((r1/r)^(n-2) - 1)``; tends to the blow-up profile as
    ``r -> r1``."""
    if not 0 < r < r1:
        raise ValueError(f"need 0 < r < r1, got r={r!r}, r1={r1!r}")
    return np.asarray(u, dtype=float) * math.sqrt((r1 / r) ** (n - 2) - 1.0)


def boundary_mean_curvature(u, r: float, n: int = 3) -> float:
    """``sup (n-1) / (r u)`` over the level set ``{r} x Sigma``."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or not r > 0:
        raise ValueError("u and r must be positive")
    return float(np.max((n - 1) / (r * u)))


@dataclass(frozen=True)
class RTilde:
    """Cumulative ``int_{r0}^r u dr`` (spatial max) at the sample radii,
    plus a tail bound from ``r_last`` to ``r1``."""

    r: np.ndarray
    values: np.ndarray
    tail: float
    exponent: float

    @property
    def total(self) -> float:
        return float(self.values[-1] + self.tail)


def fit_blowup_exponent(r, u_sup, r1, *, fraction: float = 0.2) -> float:
    """Slope of ``log sup u`` against ``log(r1 - r)`` over the last
    ``fraction`` of the samples."""
    m = max(3, int(math.ceil(fraction * len(r))))
    x = np.log(r1 - np.asarray(r[-m:]))
    y = np.log(np.asarray(u_sup[-m:]))
    return float(stats.linregress(x, y).slope)


def rtilde(r, u, r1: float, *, rtilde0: float = 0.0, fraction: float = 0.2) -> RTilde:
    """Integrate ``u`` in ``r`` up to the last sample and bound the rest.

    Parameters
    ----------
    r : array, shape (m,)
        Increasing sample radii, all below ``r1``.
    u : array, shape (m, ...)
        r-frame fields at those radii.

    Notes
    -----
    Under ``u ~ C (r1 - r)^(-1/2)`` the integrand is singular at ``r1``;
    the quadrature runs in ``s = sqrt(r1 - r)`` where ``u dr = -2 s u ds``
    is smooth. The tail ``int_{r_last}^{r1}`` is bounded by the fitted power
    law.

    Raises
    ------
    DivergentTail
        The fitted blow-up exponent is ``<= -1`` (not integrable).
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(np.diff(r) <= 0) or r[-1] >= r1:
        raise ValueError("radii must increase and stay below r1")
    u_sup = u.reshape(len(r), -1).max(axis=1)
    alpha = fit_blowup_exponent(r, u_sup, r1, fraction=fraction) if len(r) >= 3 else 0.0
    if alpha <= -1.0:
        raise DivergentTail(f"fitted exponent {alpha:.3f} is not integrable")
    s = np.sqrt(r1 - r)
    # dr = 2 s d(-s), and -s increases with r
    cum = spi.cumulative_simpson(2.0 * s * u_sup, x=-s, initial=0.0)
    # u_sup ~ C (r1 - r)^alpha near r1
    d = r1 - r[-1]
    tail = u_sup[-1] * d / (1.0 + alpha)
    return RTilde(r, rtilde0 + cum, float(tail), alpha)


def fourier_shell_maxima(grid, values) -> np.ndarray:
    """Largest normalized Fourier coefficient magnitude in each integer
    shell ``floor(|k|)``; fast decay is evidence of smoothness."""
    coeffs = np.abs(np.fft.fftn(grid.check(values))) / grid.size
    ks = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n) for n in grid.shape], indexing="ij")
    shell = np.floor(np.sqrt(sum(k * k for k in ks))).astype(int)
    out = np.zeros(shell.max() + 1)
    np.maximum.at(out, shell.ravel(), coeffs.ravel())
    return out


@dataclass(frozen=True)
class ExtensionReport:
    r1: float
    n: int
    epsilons: tuple[float, ...]
    radii: np.ndarray
    omega_estimates: np.ndarray
    cauchy_differences: np.ndarray
    H_sup: np.ndarray
    H_exponent: float
    rtilde: RTilde
    omega_limit: np.ndarray
    limit_residual: float
    f_t1: np.ndarray = field(repr=False, default=None)
    spectrum: np.ndarray = field(repr=False, default=None)

    @property
    def cauchy_ratios(self) -> np.ndarray:
        d = self.cauchy_differences
        return d[:-1] / np.maximum(d[1:], 1e-300)

    def is_cauchy(self, factor: float = 3.0, floor: float = 1e-8) -> bool:
        """Successive differences shrink by ``factor``, or are all at the
        noise floor (already converged)."""
        d = self.cauchy_differences
        if np.all(d < floor):
            return True
        return bool(np.all((d[1:] * factor <= d[:-1]) | (d[1:] < floor)))

    def to_dict(self) -> dict:
        return {
            "r1": self.r1,
            "n": self.n,
            "epsilons": list(self.epsilons),
            "radii": self.radii.tolist(),
            "omega_min": [float(w.min()) for w in self.omega_estimates],
            "omega_max": [float(w.max()) for w in self.omega_estimates],
            "cauchy_differences": self.cauchy_differences.tolist(),
            "H_sup": self.H_sup.tolist(),
            "H_exponent": self.H_exponent,
            "rtilde_total": self.rtilde.total,
            "rtilde_tail": self.rtilde.tail,
            "blowup_exponent": self.rtilde.exponent,
            "limit_residual": self.limit_residual,
            "omega_limit_spectrum": None if self.spectrum is None else self.spectrum.tolist(),
        }


def _u_at_radius(tau: Trajectory, t1_raw: float, r: float, n: int) -> np.ndarray:
    # interpolate the bounded tau-frame field, then map back
    t = r ** (n - 2) / ((n - 1) * (n - 2))
    s = t / t1_raw
    v = tau.at(-math.log1p(-s))
    utilde = v / math.sqrt(t1_raw - t)
    return utilde_to_u(utilde, r, n)


def extension_report(
    raw: Trajectory,
    t1_raw: float,
    *,
    epsilons=(1e-2, 1e-3, 1e-4),
) -> ExtensionReport:
    """Build the report from a raw t-frame run and its blow-up time."""
    n = raw.frame.n
    r1 = t_to_r(t1_raw, n)
    tau = to_tau_frame(normalize_blowup(raw, t1_raw))
    radii = np.array([r1 * (1.0 - e) for e in epsilons])
    fields = [_u_at_radius(tau, t1_raw, r, n) for r in radii]
    omegas = np.array([omega_estimate(u, r, r1, n) for u, r in zip(fields, radii)])
    diffs = np.array([np.max(np.abs(a - b)) for a, b in zip(omegas[:-1], omegas[1:])])
    H = np.array([boundary_mean_curvature(u, r, n) for u, r in zip(fields, radii)])
    H_exp = float(stats.linregress(np.log(r1 - radii), np.log(H)).slope)

    keep = raw.times > 0
    rs = np.array([t_to_r(t, n) for t in raw.times[keep]])
    us = np.array([utilde_to_u(f, r, n) for f, r in zip(raw.fields[keep], rs)])
    rt = rtilde(rs, us, r1)

    # first-order extrapolation of the geometric tail (error ~ eps)
    e = np.asarray(epsilons)
    w_lim = omegas[-1] + (omegas[-1] - omegas[-2]) * e[-1] / (e[-2] - e[-1])
    scale = math.sqrt((n - 1) * (n - 2))
    f_t1 = np.asarray(raw.source(t1_raw, raw.grid)) if raw.source is not None else None
    res = stationary_residual(raw.grid, w_lim / scale, f_t1) if f_t1 is not None else float("nan")
    return ExtensionReport(
        r1=r1, n=n, epsilons=tuple(epsilons), radii=radii, omega_estimates=omegas,
        cauchy_differences=diffs, H_sup=H, H_exponent=H_exp, rtilde=rt,
        omega_limit=w_lim, limit_residual=float(res), f_t1=f_t1,
        spectrum=fourier_shell_maxima(raw.grid, w_lim),
    )
