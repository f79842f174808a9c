"""Quantum Landau damping toolkit.

Stability scans, linear response, and nonlinear phase-space evolution for
mean-field dynamics near translation-invariant states, uniformly in the
semiclassical parameter.
"""

from .diagnostics import (
    DecayFit,
    DensityHistory,
    MonitorSeries,
    NormParams,
    NormSet,
    bootstrap_monitors,
    decay_fit,
    default_norm_set,
    physical_lp_density,
    sup_decay_exponent,
    weighted_norm,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    DomainError,
    InstabilityError,
    InsufficientDataError,
    NumericalError,
    QmixError,
    QuadratureError,
    RangeError,
)
from .kernels import (
    InteractionKernel,
    VelocityProfile,
    steady_state_kernel,
    steady_state_wigner,
)
from .linear import (
    BracketWigner,
    DensityTrace,
    GaussianWigner,
    GreenRemainder,
    GridWigner,
    free_density,
    free_trace,
    green_remainder,
    linear_density_green,
    linear_density_volterra,
    solve_volterra,
    volterra_kernel,
)
from .nonlinear import (
    ScatteringResult,
    SimConfig,
    SimOutput,
    WignerField,
    density_slice,
    free_decay_certificate,
    rhs,
    scattering_profile,
    simulate,
    step_rk4,
)
from .penrose import (
    DispersionPoint,
    NyquistCurve,
    PenroseReport,
    SufficientConditionReport,
    dispersion,
    dispersion_root,
    lindhard,
    nyquist_curve,
    penrose_margin,
    sufficient_condition,
    winding_number,
)

__version__ = "0.1.0"

__all__ = [
    "BracketWigner",
    "ConfigError",
    "ConsistencyError",
    "DecayFit",
    "DensityHistory",
    "DensityTrace",
    "DispersionPoint",
    "DomainError",
    "GaussianWigner",
    "GreenRemainder",
    "GridWigner",
    "InstabilityError",
    "InsufficientDataError",
    "InteractionKernel",
    "MonitorSeries",
    "NormParams",
    "NormSet",
    "NumericalError",
    "NyquistCurve",
    "PenroseReport",
    "QmixError",
    "QuadratureError",
    "RangeError",
    "ScatteringResult",
    "SimConfig",
    "SimOutput",
    "SufficientConditionReport",
    "VelocityProfile",
    "WignerField",
    "bootstrap_monitors",
    "decay_fit",
    "default_norm_set",
    "density_slice",
    "dispersion",
    "dispersion_root",
    "free_decay_certificate",
    "free_density",
    "free_trace",
    "green_remainder",
    "lindhard",
    "linear_density_green",
    "linear_density_volterra",
    "nyquist_curve",
    "penrose_margin",
    "physical_lp_density",
    "rhs",
    "scattering_profile",
    "simulate",
    "solve_volterra",
    "steady_state_kernel",
    "steady_state_wigner",
    "step_rk4",
    "sufficient_condition",
    "sup_decay_exponent",
    "volterra_kernel",
    "weighted_norm",
    "winding_number",
]
