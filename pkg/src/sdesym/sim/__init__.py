"""Euler-Maruyama simulation, pathwise verification and attractivity diagnostics."""

from .attract import AttractivityConfig, AttractivityReport, Verdict, attractivity_diagnostics, initial_cloud
from .integrate import SimulationError, Trajectory, em_ensemble, euler_maruyama, write_csv
from .verify import (
    ExactSolution,
    MonitorReport,
    VerificationReport,
    fit_slope,
    linearize_at_point,
    monitor_ensemble,
    monitor_invariant,
    verify_solution,
    zeta_series,
)
from .wiener import GENERATOR_ID, GridError, WienerPath, coarsen, sample_ensemble, sample_wiener, uniform_grid

__all__ = [
    "AttractivityConfig",
    "AttractivityReport",
    "ExactSolution",
    "GENERATOR_ID",
    "GridError",
    "MonitorReport",
    "SimulationError",
    "Trajectory",
    "Verdict",
    "VerificationReport",
    "WienerPath",
    "attractivity_diagnostics",
    "coarsen",
    "em_ensemble",
    "euler_maruyama",
    "fit_slope",
    "initial_cloud",
    "linearize_at_point",
    "monitor_ensemble",
    "monitor_invariant",
    "sample_ensemble",
    "sample_wiener",
    "uniform_grid",
    "verify_solution",
    "write_csv",
    "zeta_series",
]
