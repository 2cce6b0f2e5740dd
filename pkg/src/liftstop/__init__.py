"""Anytime-valid sequential stopping for token streams.

Evidence per token is the clipped log-ratio between the full model's
probability and a weakened skeleton's probability. The evidence feeds
a mixture of self-normalized e-processes; the mixture crossing a
budgeted threshold is a stop decision whose error rate is controlled
at every data-dependent stopping time, not just at a fixed horizon.
"""

from .controller import (
    BudgetSchedule,
    Certificate,
    ConfigError,
    DriftConfig,
    DriftDetector,
    EngineConfig,
    GateConfig,
    GridConfig,
    LifecycleError,
    SequencingError,
    SkipConfig,
    StepVerdict,
    StreamController,
    TraceRow,
    gate_check,
    run,
    segment_budget,
    should_skip,
)
from .eprocess import (
    EProcessState,
    EstimatorState,
    GridBoundError,
    LambdaGrid,
    NumericalOverflowError,
    build_grid,
    mixture_log_value,
    new_eprocess,
    update_eprocess,
    update_estimates,
)
from .lift import (
    LiftConfig,
    LiftIncrement,
    MalformedRecordError,
    TokenRecord,
    compute_lift,
    entropy_slope,
)
from .simlab import (
    BetaScaled,
    CalibrationReport,
    ClippedGaussian,
    EntropySpec,
    SpecError,
    StreamSpec,
    SweepCell,
    TwoPoint,
    clopper_pearson,
    generate_stream,
    monte_carlo_risk,
    sensitivity_sweep,
)
from .skeleton import (
    DiagnosticsConfig,
    DiagnosticsReport,
    DistStep,
    apply_flatten,
    apply_temperature,
    diagnose,
    dist_entropy,
    kl_divergence,
    validate_prob_vector,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # lift
    "TokenRecord",
    "LiftConfig",
    "LiftIncrement",
    "MalformedRecordError",
    "compute_lift",
    "entropy_slope",
    # eprocess
    "EstimatorState",
    "LambdaGrid",
    "EProcessState",
    "GridBoundError",
    "NumericalOverflowError",
    "build_grid",
    "new_eprocess",
    "update_estimates",
    "update_eprocess",
    "mixture_log_value",
    # controller
    "ConfigError",
    "SequencingError",
    "LifecycleError",
    "SkipConfig",
    "DriftConfig",
    "GateConfig",
    "GridConfig",
    "EngineConfig",
    "BudgetSchedule",
    "DriftDetector",
    "StepVerdict",
    "TraceRow",
    "Certificate",
    "StreamController",
    "segment_budget",
    "should_skip",
    "gate_check",
    "run",
    # skeleton
    "DistStep",
    "DiagnosticsConfig",
    "DiagnosticsReport",
    "validate_prob_vector",
    "apply_temperature",
    "apply_flatten",
    "kl_divergence",
    "dist_entropy",
    "diagnose",
    # simlab
    "SpecError",
    "ClippedGaussian",
    "BetaScaled",
    "TwoPoint",
    "EntropySpec",
    "StreamSpec",
    "generate_stream",
    "CalibrationReport",
    "monte_carlo_risk",
    "SweepCell",
    "sensitivity_sweep",
    "clopper_pearson",
]
