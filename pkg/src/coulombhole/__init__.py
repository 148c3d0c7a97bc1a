"""Classical Coulomb-hole model for electron pairs in field-emission
beams, with quantum-statistics (HBT) suppression-scale comparisons."""

__version__ = "0.1.0"

from .constants import CONSTANTS, CONSTANTS_VERSION, PhysicalConstants
from .dynamics import (
    BeamParameters,
    Branch,
    CoulombScale,
    DomainError,
    MapSolution,
    PairInitial,
    coulomb_eta,
    critical_scale,
    gamow_factor,
    invert_map,
    map_approx,
    map_derivative,
    map_minimum,
    map_sigma_exact,
    ode_oracle,
    propagate_pair,
    scaled_final_separation,
    turning_point,
)
from .montecarlo import (
    Histogram,
    HistogramSpec,
    SimulationConfig,
    SimulationResult,
    TransverseModel,
    run_simulation,
    sample_pairs,
)
from .scales import (
    DerivedScales,
    ExperimentPreset,
    PRESETS,
    derive_scales,
    ratio_space_coefficient,
    ratio_time_coefficient,
    regime_report,
)
from .statistics import (
    EmissionModel,
    GridFunction,
    GridKind,
    UnderResolvedError,
    convolve_resolution,
    correlation_function,
    default_time_grid,
    interval_mass,
    poisson_interval_pdf,
    pushforward_time_density,
)
from .units import Dimension, Quantity, Unit, convert, parse_quantity

__all__ = [
    "BeamParameters",
    "Branch",
    "CONSTANTS",
    "CONSTANTS_VERSION",
    "CoulombScale",
    "DerivedScales",
    "Dimension",
    "DomainError",
    "EmissionModel",
    "ExperimentPreset",
    "GridFunction",
    "GridKind",
    "Histogram",
    "HistogramSpec",
    "MapSolution",
    "PRESETS",
    "PairInitial",
    "PhysicalConstants",
    "Quantity",
    "SimulationConfig",
    "SimulationResult",
    "TransverseModel",
    "UnderResolvedError",
    "Unit",
    "convert",
    "convolve_resolution",
    "correlation_function",
    "coulomb_eta",
    "critical_scale",
    "default_time_grid",
    "derive_scales",
    "gamow_factor",
    "interval_mass",
    "invert_map",
    "map_approx",
    "map_derivative",
    "map_minimum",
    "map_sigma_exact",
    "ode_oracle",
    "poisson_interval_pdf",
    "propagate_pair",
    "pushforward_time_density",
    "ratio_space_coefficient",
    "ratio_time_coefficient",
    "regime_report",
    "run_simulation",
    "sample_pairs",
    "scaled_final_separation",
    "turning_point",
]
