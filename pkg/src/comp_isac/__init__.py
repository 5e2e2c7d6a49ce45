"""Coordinated multi-point integrated sensing and communication.

Building blocks for a CoMP-ISAC downlink where base stations reuse
communication waveforms as radar illuminators: special functions for
the noncentral chi-squared tails (Marcum-Q and friends), channel
snapshot sampling, GLRT target detection with closed-form false-alarm
and detection probabilities, sum-rate-maximizing power allocation under
sensing constraints, and a sweep harness with CSV/plot output.
"""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    ConfigError,
    DomainError,
    InfeasibleError,
    InfeasibleTargetError,
    IsacError,
    RankDeficiencyError,
    SamplingExhaustedError,
    SolverError,
)
from .specfun import (
    inv_marcum_q_a,
    inv_upper_gamma_regularized,
    ln_gamma,
    marcum_q,
    upper_gamma_regularized,
)
from .channel import (
    ChannelRealization,
    GeometrySample,
    ScenarioConfig,
    db_to_linear,
    sample_channels,
    scenario_from_dict,
)
from .detection import (
    DetectionSetup,
    DetectionSimResult,
    HypothesisSample,
    SymbolBlock,
    detection_threshold,
    generate_symbols,
    glrt_statistic,
    glrt_statistic_batch,
    pfa_closed_form,
    pod_closed_form,
    pod_exact,
    sample_h0_statistics,
    simulate_detection,
)
from .allocator import (
    AllocationResult,
    FeasibilityReport,
    LinearConstraintSet,
    SubproblemResult,
    SurrogateState,
    build_constraints,
    epa,
    feasibility_check,
    optimize_ppa,
    pod_to_snr_threshold,
    rate_to_sinr_threshold,
    rpa,
    solve_subproblem,
    sum_rate,
    surrogate_objective,
    t_update,
    user_rate,
)
from .harness import (
    HarnessConfig,
    ResultRow,
    SweepSpec,
    emit_csv,
    load_config,
    read_results,
    render_plots,
    run_pod_validation,
    run_rate_sweep,
)

__all__ = [
    "__version__",
    # errors
    "IsacError", "DomainError", "AccuracyError", "ConfigError",
    "RankDeficiencyError", "InfeasibleError", "InfeasibleTargetError",
    "SamplingExhaustedError", "SolverError",
    # specfun
    "ln_gamma", "upper_gamma_regularized", "inv_upper_gamma_regularized",
    "marcum_q", "inv_marcum_q_a",
    # channel
    "ScenarioConfig", "ChannelRealization", "GeometrySample",
    "db_to_linear", "sample_channels", "scenario_from_dict",
    # detection
    "SymbolBlock", "DetectionSetup", "HypothesisSample", "DetectionSimResult",
    "generate_symbols", "glrt_statistic", "glrt_statistic_batch",
    "detection_threshold", "pfa_closed_form", "pod_exact", "pod_closed_form",
    "sample_h0_statistics", "simulate_detection",
    # allocator
    "LinearConstraintSet", "SurrogateState", "AllocationResult",
    "FeasibilityReport", "SubproblemResult", "user_rate", "sum_rate",
    "rate_to_sinr_threshold", "pod_to_snr_threshold", "t_update",
    "surrogate_objective", "build_constraints", "feasibility_check",
    "solve_subproblem", "optimize_ppa", "epa", "rpa",
    # harness
    "SweepSpec", "ResultRow", "HarnessConfig", "load_config",
    "run_pod_validation", "run_rate_sweep", "emit_csv", "read_results",
    "render_plots",
]
