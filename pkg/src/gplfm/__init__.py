"""Joint input and state estimation for linear structural systems.

Latent forces are modelled as Gaussian processes with Matern covariance
functions, converted exactly to state-space form, and inferred jointly
with the structural states by Kalman filtering and RTS smoothing.
Baseline estimators (AKF, AKF with dummy measurements, DKF), maximum
likelihood hyperparameter calibration, observability diagnostics and a
reproducible experiment harness are included.
"""

from .baselines import (
    BaselineConfig,
    LCurveResult,
    add_dummy_measurements,
    akf_model,
    akfdm_model,
    degenerate_realizations,
    dkf_estimate,
    l_curve,
)
from .calibration import (
    HyperParams,
    OptimizationReport,
    default_bounds,
    nll,
    optimize,
)
from .diagnostics import (
    DetectabilityReport,
    MetricSet,
    compute_metrics,
    correlation,
    detectability_check,
    drift_metric,
    nrmse,
    peak_error,
    rmse,
    transmission_zero_rank,
)
from .errors import (
    ConditioningError,
    ConfigurationError,
    DegeneracyError,
    DimensionError,
    GplfmError,
    StabilityError,
    UnsupportedKernelError,
    ValidationError,
)
from .filtering import BACKEND, EstimationResult, kalman_filter, rts_smoother
from .kernels import (
    KernelRealization,
    KernelSpec,
    gp_regress_batch,
    kernel_from_ssm,
    kernel_to_ssm,
    matern_eval,
    sample_gp,
)
from .linalg import (
    RankReport,
    discrete_process_noise,
    discretize_zoh,
    matrix_exponential,
    pbh_rank,
    rank_report,
    solve_lyapunov,
)
from .model import (
    AugmentedModel,
    GaussianBelief,
    SignalEstimates,
    StateLayout,
    assemble_augmented,
    discretize,
    extract_estimates,
)
from .structural import (
    ContinuousStateSpace,
    ModalData,
    SensorLayout,
    StructuralSystem,
    assemble_continuous_ssm,
    build_benchmark_tower,
    build_shear_building,
    modal_analysis,
    modal_truncation,
)

__version__ = "0.1.0"
