"""Monte Carlo laboratory for averaging of slow-fast SDEs driven by
alpha-stable Levy noise."""

__version__ = "0.1.0"

from ._backend import NAME as backend_name
from .averaging import (
    BbarTable,
    FrozenSpec,
    InvariantMeasureEstimate,
    MemoBbar,
    contraction_check,
    ergodic_average_bbar,
    ergodicity_decay,
    estimate_invariant_measure,
    frozen_sup_moment_growth,
    simulate_averaged,
    simulate_frozen,
)
from .engine import DriftField, EnsembleStat, Path, TimeGrid, ensemble_mc, euler_path, sup_norm_error
from .errors import (
    ConfigError,
    DegenerateFit,
    DomainError,
    GridMismatchError,
    InterpolationRangeError,
    LevyAvgError,
    NonFiniteError,
    StepTooSmall,
    StiffnessError,
    TruncationError,
)
from .multiscale import (
    MultiscaleRun,
    SlowFastSystem,
    fast_moment_bound_scan,
    rescaled_fast_law_check,
    simulate_ensemble,
    simulate_slow_fast,
)
from .oracle import OracleParams, exact_ou_path, oracle_moment_check, sigma_scale
from .poisson import PoissonSolution, dynkin_residual, phi_estimate, phi_gradient_probe, phi_growth_probe
from .problems import get_problem
from .rates import RateCurve, RateExperiment, RateFit, fit_loglog, strong_error_curve, weak_error_curve
from .rng import RngStream
from .stable import (
    StableSpec,
    increments_on_grid,
    sample_isotropic_increment,
    sample_subordinator_increment,
    sample_sym_stable_1d,
)
