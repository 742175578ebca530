"""Simulation and diagnostics for non-autonomous Amari-type neural fields.

Typical use::

    from nflab import parse_scenario, run_experiment
    s = parse_scenario("fixed_point.scn")
    status, summary = run_experiment(s, "out/")
"""

from .attractor import (AttractorSection, DissipationBudget, absorbing_radius,
                        continuity_gap, decay_envelope_check, hausdorff_semidist,
                        sample_attractor_section, upper_semicontinuity_curve)
from .dynamics import (CoefficientPair, FiringRate, ModelSpec, Stimulus, firing_rate,
                       frechet_derivative, lipschitz_majorant, rhs_F, validate_certificates)
from .field import Field, Grid, lp_distance, lp_norm
from .integrator import ProcessHandle, evolve, step_exponential, step_rk4
from .kernels import Kernel, apply_K, kernel_norm, verify_kernel_bounds
from .scenario import Scenario, ScenarioError, parse_scenario
from .experiments import run_experiment

__version__ = "0.1.0"

__all__ = [
    "AttractorSection", "CoefficientPair", "DissipationBudget", "Field", "FiringRate", "Grid",
    "Kernel", "ModelSpec", "ProcessHandle", "Scenario", "ScenarioError", "Stimulus",
    "absorbing_radius", "apply_K", "continuity_gap", "decay_envelope_check", "evolve",
    "firing_rate", "frechet_derivative", "hausdorff_semidist", "kernel_norm",
    "lipschitz_majorant", "lp_distance", "lp_norm", "parse_scenario", "rhs_F",
    "run_experiment", "sample_attractor_section", "step_exponential", "step_rk4",
    "upper_semicontinuity_curve", "validate_certificates", "verify_kernel_bounds",
]
