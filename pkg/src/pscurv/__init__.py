"""Numerical lab for the parabolic prescribed scalar curvature equation on
flat tori: frame changes, blow-up integration, stationary states, monotone
quantities, curve shortening flow and the r-frame extension picture."""

from .config import ConfigError, ExperimentConfig, Scenario, preset
from .csf import ConvexCurve, ConvexityLost, CurveTrajectory, csf_evolve_curvature, csf_evolve_support
from .diagnostics import (
    SimonEnergy,
    ab_check,
    check_J_monotone,
    harnack_ratio,
    lyapunov_J,
    nu_decay,
)
from .evolution import (
    BlowupDetected,
    estimate_blowup_time,
    evolve,
    evolve_to_blowup,
    rescaled_blowup,
    residual,
    trajectory_residuals,
)
from .extension import extension_report, omega_estimate, rtilde
from .frames import Frame, FrameKind, normalize_blowup, to_tau_frame, trivial_solution
from .pipeline import RunResult, run_scenario, write_artifacts
from .sources import SourceTerm
from .stationary import StationaryState, solve_stationary, stationary_residual
from .torus import TorusGrid, load_field, save_field
from .trajectory import Trajectory

__all__ = [
    "ab_check",
    "BlowupDetected",
    "check_J_monotone",
    "ConfigError",
    "ConvexCurve",
    "ConvexityLost",
    "csf_evolve_curvature",
    "csf_evolve_support",
    "CurveTrajectory",
    "estimate_blowup_time",
    "evolve",
    "evolve_to_blowup",
    "ExperimentConfig",
    "extension_report",
    "Frame",
    "FrameKind",
    "harnack_ratio",
    "load_field",
    "lyapunov_J",
    "normalize_blowup",
    "nu_decay",
    "omega_estimate",
    "preset",
    "rescaled_blowup",
    "residual",
    "rtilde",
    "run_scenario",
    "RunResult",
    "save_field",
    "Scenario",
    "SimonEnergy",
    "solve_stationary",
    "SourceTerm",
    "stationary_residual",
    "StationaryState",
    "to_tau_frame",
    "TorusGrid",
    "Trajectory",
    "trajectory_residuals",
    "trivial_solution",
    "write_artifacts",
]

__version__ = "0.1.0"
