import math

import numpy as np
import pytest
from scipy.integrate import quad

from pscurv.extension import (
    DivergentTail,
    boundary_mean_curvature,
    extension_report,
    fourier_shell_maxima,
    fit_blowup_exponent,
    omega_estimate,
    rtilde,
)
from pscurv.frames import Frame, FrameKind, TrivialSolution, t_to_r, u_to_utilde, utilde_to_u
from pscurv.sources import SourceTerm
from pscurv.torus import TorusGrid
from pscurv.trajectory import Trajectory

P = TrivialSolution(3, 0.5, 1.0, 1.0)


def test_estimate_on_trivial_solution():
    for r in np.linspace(1.0, 2.999, 25):
        assert omega_estimate(P(r), r, 3.0) == pytest.approx(math.sqrt(2.0), rel=1e-13)


def test_estimate_on_self_similar_solution():
    g = TorusGrid(2, 16)
    x1, _ = g.coords
    omega = 1.0 + 0.2 * np.cos(x1)
    r1 = t_to_r(1.0, 3)
    for r in np.linspace(0.5, 0.999 * r1, 20):
        t = r / 2.0
        u = utilde_to_u(omega / math.sqrt(1.0 - t), r, 3)
        assert np.max(np.abs(omega_estimate(u, r, r1) - math.sqrt(2.0) * omega)) <= 1e-8


def test_estimate_domain():
    with pytest.raises(ValueError):
        omega_estimate(1.0, 3.0, 3.0)


def test_mean_curvature_examples():
    assert boundary_mean_curvature(np.ones(4), 2.0) == 1.0
    h = boundary_mean_curvature(np.array([P(2.97)]), 2.97)
    assert h == pytest.approx(2 * math.sqrt(0.5 * (3 / 2.97 - 1)) / 2.97, rel=1e-12)
    assert h == pytest.approx(0.04786, abs=5e-6)


def test_rtilde_constant_integrand():
    r = np.linspace(1.0, 2.0, 21)
    rt = rtilde(r, np.full((21, 4), 1.5), 3.0, rtilde0=0.25)
    assert np.allclose(rt.values, 0.25 + 1.5 * (r - 1.0), rtol=1e-12)
    assert rt.exponent == pytest.approx(0.0, abs=1e-10)
    assert rt.tail == pytest.approx(1.5, rel=1e-10)


def test_rtilde_trivial_matches_quadrature():
    # clustered toward r1 like an adaptive run
    s = np.geomspace(math.sqrt(2.0), 1e-4, 400)
    r = 3.0 - s**2
    r[0] = 1.0
    u = P(r)[:, None] * np.ones((1, 4))
    rt = rtilde(r, u, 3.0)
    exact = quad(lambda x: P(x), 1.0, 3.0, limit=400)[0]
    assert abs(rt.total - exact) <= 1e-6
    assert rt.exponent == pytest.approx(-0.5, abs=0.02)


def test_exponent_fit_on_power_law():
    r = 3.0 - np.geomspace(1.0, 1e-4, 60)
    assert fit_blowup_exponent(r, 2.0 * (3.0 - r) ** -0.3, 3.0) == pytest.approx(-0.3, abs=1e-10)


def test_divergent_tail():
    r = 3.0 - np.geomspace(1.0, 1e-4, 60)
    with pytest.raises(DivergentTail):
        rtilde(r, (3.0 - r)[:, None] ** -1.5, 3.0)


def test_report_on_sampled_trivial_solution():
    g = TorusGrid(1, 8)
    frame = Frame(FrameKind.T, 3, 1.0)
    # dense samples in the t-frame, clustered near t1 = 3/2
    s = np.geomspace(1.0, 1e-7, 600)
    times = 1.5 - s
    fields = np.array([g.constant(u_to_utilde(np.array(P(2 * t)), 2 * t, 3)) for t in times])
    raw = Trajectory(g, frame, times, fields, SourceTerm.constant(0.5))
    rep = extension_report(raw, 1.5)
    assert rep.r1 == pytest.approx(3.0)
    assert np.max(np.abs(rep.omega_estimates - math.sqrt(2.0))) <= 1e-6
    assert rep.is_cauchy()
    assert rep.H_exponent == pytest.approx(0.5, abs=0.05)
    assert np.all(np.diff(rep.H_sup) < 0)
    assert rep.limit_residual <= 1e-6
    d = rep.to_dict()
    assert d["epsilons"] == [1e-2, 1e-3, 1e-4]


def test_fourier_shells():
    g = TorusGrid(2, 16)
    x1, x2 = g.coords
    spec = fourier_shell_maxima(g, 2.0 + np.cos(x1) + 0.1 * np.cos(3 * x1 + 4 * x2))
    assert spec[0] == pytest.approx(2.0)
    assert spec[1] == pytest.approx(0.5)
    assert spec[5] == pytest.approx(0.05)
    assert np.all(np.delete(spec, [0, 1, 5]) < 1e-14)
