"""quadrec: recovery from full-rank quadratic Gaussian measurements.

Solvers for y_i = x^T A_i x under a sparsity prior (thresholded Wirtinger
flow with sparse spectral initialization) or a generative prior (projected
power method and projected gradient descent), plus the benchmark harness,
verification oracles, and CLI that reproduce the desk-scale experiments.
"""

from .generative import (
    PGDConfig,
    ProjectionConfig,
    ReluDecoderModel,
    SubspaceModel,
    check_step_condition,
    correlated_direction,
    default_w0,
    latent_project,
    projected_power,
    solve_pgd,
    subspace_project,
)
from .harness import (
    Algorithm,
    GridResult,
    SweepRow,
    TrialRecord,
    TrialSpec,
    phase_transition_grid,
    run_trial,
    sample_sparse_signal,
    spectral_closeness_sweep,
)
from .measure import (
    MeasurementEnsemble,
    MeasurementSet,
    Signal,
    Storage,
    data_matrix,
    forward,
    injected_ensemble,
    sample_ensemble,
    simulate,
    sym_apply,
)
from .metrics import cosine_similarity, norm_matched_distance, relative_distance
from .results import (
    DivergenceError,
    ProjectionError,
    RecoveryResult,
    Status,
    TraceRecord,
)
from .sparse import (
    Constant,
    Damped,
    SparseConfig,
    ThresholdKind,
    estimate_norm,
    estimate_support,
    gradient,
    solve_twf,
    spectral_init,
    spectral_init_unrestricted,
    support_scores,
    threshold,
    threshold_level,
    twf_step,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "Constant",
    "Damped",
    "DivergenceError",
    "GridResult",
    "MeasurementEnsemble",
    "MeasurementSet",
    "PGDConfig",
    "ProjectionConfig",
    "ProjectionError",
    "RecoveryResult",
    "ReluDecoderModel",
    "Signal",
    "SparseConfig",
    "Status",
    "Storage",
    "SubspaceModel",
    "SweepRow",
    "ThresholdKind",
    "TraceRecord",
    "TrialRecord",
    "TrialSpec",
    "check_step_condition",
    "correlated_direction",
    "cosine_similarity",
    "data_matrix",
    "default_w0",
    "estimate_norm",
    "estimate_support",
    "forward",
    "gradient",
    "injected_ensemble",
    "latent_project",
    "norm_matched_distance",
    "phase_transition_grid",
    "projected_power",
    "relative_distance",
    "run_trial",
    "sample_ensemble",
    "sample_sparse_signal",
    "simulate",
    "solve_pgd",
    "solve_twf",
    "spectral_closeness_sweep",
    "spectral_init",
    "spectral_init_unrestricted",
    "subspace_project",
    "support_scores",
    "sym_apply",
    "threshold",
    "threshold_level",
    "twf_step",
    "__version__",
]
