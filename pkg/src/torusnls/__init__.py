"""Filtered Lie splitting for the cubic NLS on the 2D torus, with convergence
and discrete Bourgain-norm diagnostics."""

__version__ = "0.1.0"

from .spectral import (  # noqa: E402
    FilterSpec,
    Grid2D,
    SpectralField,
    apply_multiplier,
    free_flow,
    from_physical,
    project,
    to_physical,
)
from .integrators import RunResult, StepperConfig, integrate, lie_step, nonlinear_flow  # noqa: E402
from .rough_data import RoughDataSpec, generate  # noqa: E402
from .norms import (  # noqa: E402
    BourgainParams,
    TimeSequence,
    bourgain_norm_freq,
    bourgain_norm_time,
    hs_norm,
    l2_error,
    l2_norm,
    linf_embedding_ratio,
    strichartz_ratio,
)
from .convergence import (  # noqa: E402
    ConvergenceReport,
    ExperimentConfig,
    fit_order,
    reference_solution,
    resolution_study,
    run_sweep,
)

__all__ = [
    "FilterSpec", "Grid2D", "SpectralField", "apply_multiplier", "free_flow", "from_physical",
    "project", "to_physical",
    "RunResult", "StepperConfig", "integrate", "lie_step", "nonlinear_flow",
    "RoughDataSpec", "generate",
    "BourgainParams", "TimeSequence", "bourgain_norm_freq", "bourgain_norm_time", "hs_norm",
    "l2_error", "l2_norm", "linf_embedding_ratio", "strichartz_ratio",
    "ConvergenceReport", "ExperimentConfig", "fit_order", "reference_solution", "resolution_study",
    "run_sweep",
]
