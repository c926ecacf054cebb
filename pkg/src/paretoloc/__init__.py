"""Mobile-node localization by Pareto-optimal fusion of range trilateration
and dead reckoning, with Kalman-filter baselines and Cramer-Rao bound tools."""

from .crlb import (
    FisherBounds,
    PcrlbResult,
    SeriesDivergenceError,
    TrigMoments,
    d11,
    d12,
    d22,
    diag_bounds,
    diag_expectation_mc,
    diag_expectation_series,
    gershgorin_sandwich,
    offdiag_bounds,
    parcrlb_trace,
    pcrlb_bounds,
    pcrlb_recursion,
    pi_expectation_mc,
    position_error_bound,
    trig_moments,
)
from .deadreckoning import DrMoments, dr_first_moment, dr_moments, dr_predict, dr_second_moment
from .filters import (
    KfState,
    cv_init,
    cv_transition_jacobian,
    ekf_cv_step,
    ekf_step,
    lckf_step,
    numerical_jacobian,
    position_init,
    ukf_step,
    unscented_update,
)
from .fusion import (
    AxisContext,
    FusionState,
    ParetoConfig,
    VarianceComponents,
    approximate_kinematics,
    bias_recursion,
    error_variance,
    fuse,
    fusion_step,
    init_fusion,
    mse_beta,
    optimal_beta,
    second_moment_terms,
    select_rho,
)
from .models import (
    DEFAULT_ANCHORS,
    AnchorSet,
    CvProcessModel,
    MeasurementFrame,
    RangeNoiseModel,
    SensorNoiseModel,
    SensorStreams,
    TruthState,
    range_variance,
    synthesize_measurements,
    true_ranges,
)
from .ranging import (
    RangingErrorMoments,
    RangingGeometry,
    build_geometry,
    noise_cov_inverse,
    ranging_bias,
    ranging_error_moments,
    ranging_second_moment,
    wls_estimate,
)
from .simulate import (
    ExperimentConfig,
    RunResult,
    TrajectorySpec,
    crlb_traces,
    gen_trajectory,
    make_scenario,
    run_experiment,
    scenario_cv,
    scenario_linear,
    scenario_pwl,
    sweep,
    write_crlb,
    write_run_trace,
    write_summary,
)

__version__ = "0.1.0"
