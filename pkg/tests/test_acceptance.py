"""Acceptance criteria, one test and one printed PASS/FAIL line each."""

import math

import numpy as np
import pytest

from pscurv.config import preset
from pscurv.pipeline import stationary_constants

ALL_RUNS = ("TRIVIAL_ODE", "CONSTANT_F_TAU", "PERTURBED_F", "CSF_CIRCLE", "CSF_ELLIPSE")


def _verdict(report_line, number, title, parts):
    """``parts`` is a list of ``(label, ok, value)``; emits one line."""
    ok = all(p[1] for p in parts)
    detail = "; ".join(f"{label}={value:.3g}{'' if good else ' (FAIL)'}" for label, good, value in parts)
    report_line(number, title, ok, detail)
    return ok


def _value(result, name):
    return result.check(name).value


def test_criterion_1_trivial_blowup(runs, report_line):
    res, seconds = runs("TRIVIAL_ODE")
    assert res.config.grid.points == 64 and res.config.grid.dim == 2
    rel = _value(res, "closed_form_rel_error")
    dt1 = abs(res.metrics["t1_estimate"] - 1.5)
    parts = [
        ("closed-form rel err", rel <= 1e-6, rel),
        ("|t1 - 1.5|", dt1 <= 1e-4, dt1),
        ("runtime s", seconds <= 10.0, seconds),
    ]
    assert _verdict(report_line, 1, "trivial blow-up", parts)


def test_criterion_2_stationary_constants(report_line):
    res = stationary_constants(preset("CONSTANT_F_TAU"), (0.5, 1.0, 2.0))
    parts = []
    for f in (0.5, 1.0, 2.0):
        err = _value(res, f"stationary_error_f={f!r}")
        resid = _value(res, f"self_similar_residual_f={f!r}")
        parts += [(f"f={f} err", err <= 1e-10, err), (f"f={f} resid", resid <= 1e-8, resid)]
    assert _verdict(report_line, 2, "stationary constants", parts)


def test_criterion_3_constant_f_convergence(runs, report_line):
    res, _ = runs("CONSTANT_F_TAU")
    tau = res.trajectories["tau"]
    omega_one = float(np.max(np.abs(res.fields["omega"] - 1.0)))
    dist = _value(res, "v_minus_omega_final")
    j_err = abs(res.metrics["J_final"] + 2 * math.pi**2)
    margin = _value(res, "J_monotone_quantitative")
    parts = [
        ("tau reached", tau.times[-1] >= 20.0 - 0.05, tau.times[-1]),
        ("|omega - 1|", omega_one <= 1e-10, omega_one),
        ("|v - omega|", dist <= 1e-4, dist),
        ("J monotone margin", res.check("J_monotone_quantitative").passed, margin),
        ("|J + 2 pi^2|", j_err <= 1e-4, j_err),
    ]
    assert _verdict(report_line, 3, "constant-f convergence", parts)


def test_criterion_4_aronson_benilan(runs, report_line):
    parts = []
    for name in ALL_RUNS:
        res, _ = runs(name)
        for c in res.checks:
            if c.name.startswith("ab_integrated_"):
                parts.append((f"{name} {c.name[14:]} slack", c.value >= -1e-8, c.value))
    trivial, _ = runs("TRIVIAL_ODE")
    z = _value(trivial, "ab_z_max")
    parts.append(("trivial z max", z <= 1e-8, z))
    assert len(parts) >= 2 * len(ALL_RUNS)
    assert _verdict(report_line, 4, "Aronson-Benilan", parts)


def test_criterion_5_harnack(runs, report_line):
    parts = []
    for name in ("PERTURBED_F", "CSF_ELLIPSE"):
        res, _ = runs(name)
        parts.append((f"{name} no trend", res.check("harnack_no_trend").passed, res.metrics["harnack_max"]))
    assert _verdict(report_line, 5, "Harnack boundedness", parts)


def test_criterion_6_curve_shortening(runs, report_line):
    circle, _ = runs("CSF_CIRCLE")
    ellipse, _ = runs("CSF_ELLIPSE")
    parts = [
        ("circle k rel err", None, _value(circle, "circle_closed_form_rel_error")),
        ("circle area law", None, _value(circle, "area_law_deviation")),
        ("ellipse area law", None, _value(ellipse, "area_law_deviation")),
        ("ellipse |k~ - 1| at 0.99 t1", None, _value(ellipse, "ktilde_dev_at_099")),
        ("ellipse lift residual", None, _value(ellipse, "lift_residual")),
        ("ellipse |v - 1/sqrt2|", None, _value(ellipse, "v_limit_error")),
    ]
    bounds = (1e-6, 1e-4, 1e-4, 0.05, 1e-6, 1e-3)
    parts = [(label, v <= b, v) for (label, _, v), b in zip(parts, bounds)]
    assert _verdict(report_line, 6, "curve shortening flow", parts)


def test_criterion_7_energy_structure(runs, report_line):
    parts = []
    for name in ("CONSTANT_F_TAU", "PERTURBED_F", "CSF_ELLIPSE"):
        res, _ = runs(name)
        assert res.config.run.simon_pairs >= 100
        g = _value(res, "simon_gradient_rel_error")
        c = _value(res, "simon_convexity_margin")
        parts += [(f"{name} gradient rel err", g <= 1e-5, g), (f"{name} convexity margin", c >= 0.0, c)]
    for name in ("CONSTANT_F_TAU", "CSF_ELLIPSE"):
        res, _ = runs(name)
        rate = _value(res, "nu_decay_rate")
        parts.append((f"{name} nu rate", rate < 0, rate))
    assert _verdict(report_line, 7, "energy structure and nu decay", parts)


def test_criterion_8_extension(runs, report_line):
    trivial, _ = runs("TRIVIAL_ODE")
    ellipse, _ = runs("CSF_ELLIPSE")
    t_ext = trivial.extension
    e_ext = ellipse.extension
    # on the trivial run the estimates agree to the noise floor, so there
    # is nothing left to shrink
    trivial_spread = float(np.max(t_ext.cauchy_differences))
    ratio = float(np.min(e_ext.cauchy_ratios))
    parts = [
        ("trivial omega diffs", t_ext.is_cauchy(), trivial_spread),
        ("ellipse min shrink", ratio >= 3.0, ratio),
        ("trivial rtilde total", np.isfinite(t_ext.rtilde.total), t_ext.rtilde.total),
        ("trivial exponent", abs(t_ext.rtilde.exponent + 0.5) <= 0.02, t_ext.rtilde.exponent),
        ("trivial H exponent", abs(t_ext.H_exponent - 0.5) <= 0.05, t_ext.H_exponent),
        ("ellipse H exponent", abs(e_ext.H_exponent - 0.5) <= 0.05, e_ext.H_exponent),
        ("ellipse sup H decreasing", bool(np.all(np.diff(e_ext.H_sup) < 0)), float(e_ext.H_sup[-1])),
    ]
    assert _verdict(report_line, 8, "extension", parts)


@pytest.mark.parametrize("name", ALL_RUNS)
def test_every_acceptance_run_completes(runs, name):
    res, seconds = runs(name)
    assert seconds < 120
    assert res.checks
