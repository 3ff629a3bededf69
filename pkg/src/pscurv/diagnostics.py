"""Runtime checks of the inequalities and structural identities that the
convergence argument relies on. All checks are read-only over
trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frames import FrameKind
from .torus import TorusGrid
from .trajectory import Trajectory


class MonotonicityViolation(AssertionError):
    def __init__(self, message, pair):
        super().__init__(message)
        self.pair = pair


class SpanTooShort(ValueError):
    pass


class TailNotConverged(RuntimeError):
    pass


def _f_field(traj: Trajectory, time) -> np.ndarray:
    return np.broadcast_to(np.asarray(traj.source(time, traj.grid), dtype=float), traj.grid.shape)


# -- Lyapunov functional ----------------------------------------------------

def lyapunov_J(grid: TorusGrid, v, f) -> float:
    """``J(v) = int |grad v|^2 - f v^2 + log v``."""
    v = grid.check(v)
    if np.any(v <= 0):
        raise ValueError("J is defined for positive v only")
    return grid.integrate(grid.grad_norm_sq(v) - f * v * v + np.log(v))


def J_series(traj: Trajectory) -> np.ndarray:
    return np.array([lyapunov_J(traj.grid, v, _f_field(traj, t)) for t, v in zip(traj.times, traj.fields)])


@dataclass(frozen=True)
class JMonotoneReport:
    J: np.ndarray
    max_relative_increase: float
    quantitative_margin: float
    lower_bound: float
    lower_bound_ok: bool

    slack: float = 1e-2

    @property
    def passed(self) -> bool:
        return self.quantitative_margin <= self.slack and self.lower_bound_ok


def check_J_monotone(traj: Trajectory, *, rel_tol: float = 1e-6, slack: float = 1e-2) -> JMonotoneReport:
    """Check that ``J`` is non-increasing along a tau-frame run.

    Besides ``J(tau_{k+1}) <= J(tau_k) + rel_tol |J(tau_k)|``, the
    quantitative form ``dJ/dtau <= -2 int v^-2 |v_tau|^2`` is integrated
    over each pair with midpoint differences; ``quantitative_margin`` is the
    largest ``(dJ - bound) / (|dJ| + |bound| + rel_tol |J|)``, so values up
    to ``slack`` are consistent with the inequality.

    Raises
    ------
    MonotonicityViolation
        With the offending ``(k, k+1)`` sample pair.
    """
    if traj.frame.kind is not FrameKind.TAU:
        raise ValueError("J monotonicity is a tau-frame statement")
    if traj.source is None or not traj.source.monotone:
        raise ValueError("J monotonicity needs a source flagged nondecreasing in tau")
    grid = traj.grid
    J = J_series(traj)
    excess = (np.diff(J) - rel_tol * np.abs(J[:-1])) / np.maximum(np.abs(J[:-1]), 1e-300)
    worst = int(np.argmax(excess)) if len(excess) else 0
    if len(excess) and excess[worst] > 0:
        raise MonotonicityViolation(
            f"J increased from {J[worst]!r} to {J[worst + 1]!r} between "
            f"tau={traj.times[worst]!r} and tau={traj.times[worst + 1]!r}",
            (worst, worst + 1),
        )
    q = -np.inf
    for k in range(len(traj) - 1):
        dt = traj.times[k + 1] - traj.times[k]
        vm = 0.5 * (traj.fields[k] + traj.fields[k + 1])
        vt = (traj.fields[k + 1] - traj.fields[k]) / dt
        dJ = J[k + 1] - J[k]
        bound = -2.0 * dt * grid.integrate(vt * vt / (vm * vm))
        q = max(q, (dJ - bound) / (abs(dJ) + abs(bound) + rel_tol * abs(J[k])))
    mu = float(traj.inf.min())
    M = float(traj.sup.max())
    f_sup = max(float(np.max(_f_field(traj, t))) for t in traj.times)
    bound = (-f_sup * M * M + np.log(mu)) * grid.volume
    return JMonotoneReport(
        J=J,
        max_relative_increase=float(np.max(np.diff(J) / np.maximum(np.abs(J[:-1]), 1e-300), initial=-np.inf)),
        quantitative_margin=float(q),
        lower_bound=float(bound),
        lower_bound_ok=bool(np.all(J >= bound)),
        slack=slack,
    )


# -- Aronson-Benilan --------------------------------------------------------

def _ab_weight(traj: Trajectory) -> np.ndarray:
    if traj.frame.kind is FrameKind.T:
        if np.any(traj.times < 0):
            raise ValueError("the t-frame inequality needs t >= 0")
        return np.sqrt(traj.times)
    if traj.frame.kind is FrameKind.TAU:
        return np.sqrt(np.expm1(traj.times))
    raise ValueError("Aronson-Benilan checks apply to t- or tau-frame runs")


def ab_integrated_slack(traj: Trajectory) -> np.ndarray:
    """Worst normalized slack of the integrated inequality for each later
    sample, over every earlier sample.

    In the t-frame ``utilde(t2) >= sqrt(t1/t2) utilde(t1)`` and in the
    tau-frame ``v(tau2) >= exp(-(tau2-tau1)/2) sqrt((1-e^-tau1)/(1-e^-tau2)) v(tau1)``
    are both equivalent to ``g(s2) x(s2) >= g(s1) x(s1)`` with
    ``g = sqrt(t)`` resp. ``sqrt(e^tau - 1)``; a running maximum over the
    earlier samples therefore covers all pairs. The slack
    ``lhs - rhs`` is divided by ``max(1, rhs)``.
    """
    g = _ab_weight(traj)
    shape = (-1,) + (1,) * traj.grid.dim
    q = traj.fields * g.reshape(shape)
    running = np.maximum.accumulate(q, axis=0)
    out = np.empty(len(traj) - 1)
    for k in range(1, len(traj)):
        best = running[k - 1]
        out[k - 1] = np.min((q[k] - best) / np.maximum(g[k], best))
    return out


def ab_differential_margin(traj: Trajectory) -> np.ndarray:
    """``s x_s / x + 1/2`` at interior samples (``s = t``, resp.
    ``s = 1 - e^-tau`` in the tau-frame), with second-order differences."""
    if len(traj) < 3:
        return np.array([])
    dx = np.gradient(traj.fields, traj.times, axis=0)[1:-1]
    x = traj.fields[1:-1]
    if traj.frame.kind is FrameKind.T:
        s = traj.times[1:-1]
    elif traj.frame.kind is FrameKind.TAU:
        s = -np.expm1(-traj.times[1:-1])
    else:
        raise ValueError("Aronson-Benilan checks apply to t- or tau-frame runs")
    s = s.reshape((-1,) + (1,) * traj.grid.dim)
    m = s * dx / x + 0.5
    return m.reshape(len(m), -1).min(axis=1)


def ab_check(traj: Trajectory) -> float:
    """Minimum slack of the integrated inequality over all sample pairs
    and points (negative means violated)."""
    return float(np.min(ab_integrated_slack(traj)))


def ab_z_max(traj: Trajectory) -> float:
    """Largest value of ``z = t w_t - w/2`` with ``w = 1/utilde``."""
    if traj.frame.kind is not FrameKind.T:
        raise ValueError("z is defined for t-frame runs")
    w = 1.0 / traj.fields
    wt = np.gradient(w, traj.times, axis=0)[1:-1]
    t = traj.times[1:-1].reshape((-1,) + (1,) * traj.grid.dim)
    z = t * wt - 0.5 * w[1:-1]
    return float(np.max(z))


# -- Harnack ----------------------------------------------------------------

def harnack_ratio(traj: Trajectory, h: float = 1.0, mu: float | None = None):
    """Empirical Harnack constants ``sup v(tau) / (1/mu + inf v(tau + h))``.

    Returns ``(taus, ratios)``; ``mu`` defaults to the run minimum.
    """
    if traj.times[-1] - traj.times[0] < h:
        raise SpanTooShort(f"trajectory spans {traj.times[-1] - traj.times[0]:.3g} < h={h}")
    mu = float(traj.inf.min()) if mu is None else float(mu)
    taus = traj.times[traj.times + h <= traj.times[-1]]
    inf_later = np.interp(taus + h, traj.times, traj.inf)
    sup_now = traj.sup[: len(taus)]
    return taus, sup_now / (1.0 / mu + inf_later)


def harnack_no_trend(taus, ratios, factor: float = 2.0) -> bool:
    """Last quarter of the tau-range stays below ``factor`` times the
    maximum over the first three quarters."""
    cut = taus[0] + 0.75 * (taus[-1] - taus[0])
    early = ratios[taus < cut]
    late = ratios[taus >= cut]
    if len(early) == 0 or len(late) == 0:
        raise SpanTooShort("not enough samples to compare quartiles")
    return bool(late.max() <= factor * early.max())


# -- lower envelope ------------------------------------------------------------

def inf_bound_margin(traj: Trajectory) -> float:
    """Min over samples of ``1/sqrt(2 inf f) - inf v`` (nonnegative when the
    lower envelope stays below the subsolution threshold)."""
    out = np.inf
    for t, v in zip(traj.times, traj.fields):
        f_inf = float(np.min(_f_field(traj, t)))
        out = min(out, 1.0 / np.sqrt(2.0 * f_inf) - float(v.min()))
    return float(out)


# -- Energy structure of the log-transformed equation -----------------------

@dataclass(frozen=True)
class SimonEnergy:
    """Energy for ``nu = log(v / omega)``:
    ``E(q, z, p) = (exp(2(wt + z)) (|p + grad wt|^2 - f) + z) / 2`` with
    ``wt = log(omega)``."""

    grid: TorusGrid
    omega_tilde: np.ndarray
    f_t1: np.ndarray
    c_convexity: float | None = None

    def __post_init__(self):
        wt = self.grid.check(self.omega_tilde)
        f = np.broadcast_to(np.asarray(self.f_t1, dtype=float), self.grid.shape)
        object.__setattr__(self, "f_t1", f)
        c_max = float(np.min(np.exp(2.0 * wt)))
        if self.c_convexity is None:
            object.__setattr__(self, "c_convexity", c_max)
        elif not 0 < self.c_convexity <= c_max * (1 + 1e-14):
            raise ValueError(f"convexity constant must lie in (0, {c_max}]")

    @classmethod
    def from_omega(cls, grid, omega, f_t1):
        omega = grid.check(omega)
        return cls(grid, np.log(omega), f_t1)

    @property
    def grad_omega_tilde(self):
        return self.grid.gradient(self.omega_tilde)

    def operator(self, nu) -> np.ndarray:
        """``M(nu) = e^(wt+nu) lap e^(wt+nu) + f e^(2(wt+nu)) - 1/2``."""
        phi = np.exp(self.omega_tilde + self.grid.check(nu))
        return phi * self.grid.laplacian(phi) + self.f_t1 * phi * phi - 0.5

    def density(self, z, p) -> np.ndarray:
        gw = self.grad_omega_tilde
        q2 = sum((pi + gi) ** 2 for pi, gi in zip(p, gw))
        return 0.5 * (np.exp(2.0 * (self.omega_tilde + z)) * (q2 - self.f_t1) + z)

    def _density_ld(self, z):
        shape = self.grid.shape
        axes = tuple(range(self.grid.dim))
        z_hat = np.fft.rfftn(z, s=shape, axes=axes)
        wt = self.omega_tilde.astype(np.longdouble)
        q2 = 0
        for sym, gw in zip(self.grid._derivative_symbols, self.grad_omega_tilde):
            q2 = q2 + (np.fft.irfftn(sym * z_hat, s=shape, axes=axes) + gw.astype(np.longdouble)) ** 2
        return 0.5 * (np.exp(2 * (wt + z)) * (q2 - self.f_t1.astype(np.longdouble)) + z)

    def energy(self, nu) -> float:
        nu = self.grid.check(nu)
        return self.grid.integrate(self.density(nu, self.grid.gradient(nu)))

    def pairing(self, nu, xi, steps=(1e-4, 1e-5)):
        """``(<M(nu), xi>, -d/ds E(nu + s xi))``; the derivative uses central
        differences at two steps combined by Richardson extrapolation."""
        lhs = self.grid.inner(self.operator(nu), xi)
        nu = self.grid.check(nu).astype(np.longdouble)
        xi = self.grid.check(xi).astype(np.longdouble)
        d = []
        for s in steps:
            # extended precision keeps roundoff well below the h^4 remainder
            s = np.longdouble(s)
            diff = self._density_ld(nu + s * xi) - self._density_ld(nu - s * xi)
            d.append(float(np.sum(diff) * self.grid.cell_volume / (2 * s)))
        ratio = (steps[0] / steps[1]) ** 2
        rhs = -(ratio * d[1] - d[0]) / (ratio - 1.0)
        return lhs, rhs

    def convexity(self, p, s: float = 1.0):
        """Pointwise ``d^2/ds^2 E(q, 0, s p)`` at ``s = 0``: returns the
        finite-difference value and the closed form ``e^(2 wt) |p|^2``."""
        zero = np.zeros(self.grid.shape)
        e0 = self.density(zero, [np.zeros_like(pi) for pi in p])
        ep = self.density(zero, [s * pi for pi in p])
        em = self.density(zero, [-s * pi for pi in p])
        fd = (ep - 2.0 * e0 + em) / (s * s)
        exact = np.exp(2.0 * self.omega_tilde) * sum(pi**2 for pi in p)
        return fd, exact


def simon_gradient_check(energy: SimonEnergy, nu, xi, *, floor: float = 1e-6) -> float:
    """Relative mismatch between ``<M(nu), xi>`` and ``-dE(nu + s xi)/ds``.

    The denominator is ``max(|lhs|, |rhs|, floor |M(nu)| |xi|)`` (L2 norms);
    the floor keeps nearly orthogonal pairs from dividing noise by noise.
    """
    lhs, rhs = energy.pairing(nu, xi)
    m = energy.operator(nu)
    cs = math.sqrt(energy.grid.inner(m, m) * energy.grid.inner(xi, xi))
    scale = max(abs(lhs), abs(rhs), floor * cs)
    return 0.0 if scale == 0 else abs(lhs - rhs) / scale


# -- Convergence of nu = log(v/omega) ----------------------------------------

@dataclass(frozen=True)
class NuDecayReport:
    taus: np.ndarray
    nu_norms: np.ndarray
    rate: float
    final_norm: float
    F_norms: np.ndarray
    F_rate: float
    F_ok: bool

    @property
    def certified(self) -> bool:
        return self.rate < 0 and self.final_norm < 1e-4


def _tail_slope(x, y):
    ok = y > 0
    if ok.sum() < 2:
        return -np.inf
    return float(np.polyfit(x[ok], np.log(y[ok]), 1)[0])


def nu_decay(traj: Trajectory, omega, f_t1=None, *, tail: float = 0.25, max_tail_norm: float = 0.5) -> NuDecayReport:
    """Fit the decay rate of ``|nu|_max`` over the last ``tail`` of the
    tau-range and check the forcing ``F = (f - f_t1) v^2`` decays like
    ``e^-tau``.

    Raises
    ------
    TailNotConverged
        ``|nu|_max`` exceeds ``max_tail_norm`` somewhere in the tail.
    """
    if traj.frame.kind is not FrameKind.TAU:
        raise ValueError("nu_decay expects a tau-frame trajectory")
    omega = getattr(omega, "omega", omega)
    omega = traj.grid.check(omega)
    if f_t1 is None:
        f_t1 = traj.source.limit
    f_t1 = np.broadcast_to(np.asarray(f_t1, dtype=float), traj.grid.shape)
    nu = np.log(traj.fields / omega)
    norms = np.abs(nu).reshape(len(traj), -1).max(axis=1)
    cut = traj.times[0] + (1.0 - tail) * (traj.times[-1] - traj.times[0])
    sel = traj.times >= cut
    if np.max(norms[sel]) >= max_tail_norm:
        raise TailNotConverged(f"|nu|_max reaches {np.max(norms[sel]):.3g} in the tail")
    F = np.array([
        np.max(np.abs((_f_field(traj, t) - f_t1) * v * v)) for t, v in zip(traj.times, traj.fields)
    ])
    F_rate = _tail_slope(traj.times[sel], F[sel])
    return NuDecayReport(
        taus=traj.times,
        nu_norms=norms,
        rate=_tail_slope(traj.times[sel], norms[sel]),
        final_norm=float(norms[-1]),
        F_norms=F,
        F_rate=F_rate,
        F_ok=bool(np.all(F[sel] < 1e-13) or F_rate <= -0.9),
    )


# -- decay of the source toward its blow-up limit -----------------------------

def source_decay(traj: Trajectory, f_t1=None) -> tuple[np.ndarray, np.ndarray]:
    """``max |e^tau (f - f_t1)|`` and ``max |e^tau d_tau f|`` per sample of a
    tau-frame run; both stay bounded when f approaches its limit at rate
    ``e^-tau``. The derivative uses second-order differences."""
    if traj.frame.kind is not FrameKind.TAU:
        raise ValueError("source decay is measured in the tau-frame")
    if f_t1 is None:
        f_t1 = traj.source.limit
    f_t1 = np.broadcast_to(np.asarray(f_t1, dtype=float), traj.grid.shape)
    f = np.array([_f_field(traj, t) for t in traj.times])
    w = np.exp(traj.times).reshape((-1,) + (1,) * traj.grid.dim)
    i0 = np.abs(w * (f - f_t1)).reshape(len(traj), -1).max(axis=1)
    if len(traj) < 3:
        return i0, np.zeros(len(traj))
    ft = np.gradient(f, traj.times, axis=0)
    i1 = np.abs(w * ft).reshape(len(traj), -1).max(axis=1)
    return i0, i1


def bounded_tail(values, factor: float = 2.0, floor: float = 1e-12) -> bool:
    """Last quarter of the samples stays below ``factor`` times the earlier
    maximum (values below ``floor`` count as zero)."""
    values = np.asarray(values, dtype=float)
    cut = max(1, int(0.75 * len(values)))
    early, late = values[:cut], values[cut:]
    if len(late) == 0 or late.max() <= floor:
        return True
    return bool(late.max() <= factor * max(early.max(), floor))


# -- Per-sample records -------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsRecord:
    tau: float
    J: float
    dJ_dtau_upper: float
    min_v: float
    max_v: float
    ab_margin: float
    harnack_ratio: float


def records(traj: Trajectory, h: float = 1.0) -> list[DiagnosticsRecord]:
    """One record per sample of a tau-frame run; quantities that need a
    neighbouring sample are NaN where unavailable."""
    grid = traj.grid
    J = J_series(traj)
    vt = np.gradient(traj.fields, traj.times, axis=0) if len(traj) > 1 else np.zeros_like(traj.fields)
    upper = np.array([-2.0 * grid.integrate(d * d / (v * v)) for d, v in zip(vt, traj.fields)])
    ab = np.concatenate([[np.nan], ab_integrated_slack(traj)]) if len(traj) > 1 else np.array([np.nan])
    hr = np.full(len(traj), np.nan)
    if traj.times[-1] - traj.times[0] >= h:
        taus, ratios = harnack_ratio(traj, h)
        hr[: len(ratios)] = ratios
    return [
        DiagnosticsRecord(float(t), float(j), float(u), float(v.min()), float(v.max()), float(a), float(r))
        for t, j, u, v, a, r in zip(traj.times, J, upper, traj.fields, ab, hr)
    ]
