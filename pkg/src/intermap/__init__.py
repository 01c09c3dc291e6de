"""Two-dimensional intermittent skew products and their induced dynamics.

Layout: mapcore (the map family and derived constants), geometry
(return-time cells, boundary curves, tail measures), kernels (batched
orbit advancement, compiled when available), orbits (ensembles,
first returns, excursions, Birkhoff sums), ulam (transfer-operator
discretizations and spectra), statslab (limit-theorem experiments),
config/reports/cli (reproducible runs and artifacts).
"""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .geometry import (
    CellIndex,
    NotInYError,
    ReturnOverflowError,
    boundary_x,
    boundary_y,
    cell_of,
    curve_table,
    in_Y,
    return_jacobian,
    slope_bound_check,
    tail_measure,
    verify_expansion_distortion,
)
from .kernels import KERNEL_BACKEND
from .mapcore import (
    PRESETS,
    AdmissibilityError,
    BranchBoundaryError,
    DerivedConstants,
    MapParams,
    Point,
    admissible_c0_interval,
    derive_constants,
    envelope,
    evaluate_jacobian,
    evaluate_map,
    make_params,
    min_singular_value,
    preset,
    profile_u,
)
from .orbits import (
    ExcursionOverflowError,
    Observable,
    OrbitEnsemble,
    ReturnEvent,
    ZConfig,
    effective_n_range,
    excursion_to_Z,
    first_return,
    indicator_observable,
    iterate,
    make_ensemble,
    sample_lebesgue,
    sample_mu_Y,
    trig_observable,
)
from .statslab import (
    DEFAULT_V,
    ObservableSpec,
    clt_experiment,
    correlation_mc,
    fit_decay_exponent,
    hill_index,
    infinite_mixing_experiment,
    large_deviation_experiment,
    mean_estimate,
    moment_experiment,
    stable_experiment,
    tau_tail_experiment,
)
from .ulam import (
    DensityEstimate,
    Mesh,
    NonConvergence,
    SpectralReport,
    UlamOperator,
    build_ulam_F,
    build_ulam_f,
    eigenvalue_curve,
    invariant_density,
    leading_eigenvalue,
    mean_phi,
    measure_of_Y,
    twist,
)

__all__ = [
    "__version__",
    "KERNEL_BACKEND",
    # mapcore
    "PRESETS",
    "AdmissibilityError",
    "BranchBoundaryError",
    "DerivedConstants",
    "MapParams",
    "Point",
    "admissible_c0_interval",
    "derive_constants",
    "envelope",
    "evaluate_jacobian",
    "evaluate_map",
    "make_params",
    "min_singular_value",
    "preset",
    "profile_u",
    # geometry
    "CellIndex",
    "NotInYError",
    "ReturnOverflowError",
    "boundary_x",
    "boundary_y",
    "cell_of",
    "curve_table",
    "in_Y",
    "return_jacobian",
    "slope_bound_check",
    "tail_measure",
    "verify_expansion_distortion",
    # orbits
    "ExcursionOverflowError",
    "Observable",
    "OrbitEnsemble",
    "ReturnEvent",
    "ZConfig",
    "effective_n_range",
    "excursion_to_Z",
    "first_return",
    "indicator_observable",
    "iterate",
    "make_ensemble",
    "sample_lebesgue",
    "sample_mu_Y",
    "trig_observable",
    # ulam
    "DensityEstimate",
    "Mesh",
    "NonConvergence",
    "SpectralReport",
    "UlamOperator",
    "build_ulam_F",
    "build_ulam_f",
    "eigenvalue_curve",
    "invariant_density",
    "leading_eigenvalue",
    "mean_phi",
    "measure_of_Y",
    "twist",
    # statslab
    "DEFAULT_V",
    "ObservableSpec",
    "clt_experiment",
    "correlation_mc",
    "fit_decay_exponent",
    "hill_index",
    "infinite_mixing_experiment",
    "large_deviation_experiment",
    "mean_estimate",
    "moment_experiment",
    "stable_experiment",
    "tau_tail_experiment",
    # config
    "ConfigError",
    "ExperimentConfig",
    "config_hash",
    "load_config",
]
