"""Per-axis Pareto-optimal fusion of WLS ranging and dead reckoning.

Each axis of the fused estimate is a scalar combination

    x_hat_{k+1} = (1 - beta) x_r + beta x_v,

where x_r is the WLS trilateration estimate and x_v the dead-reckoned
prediction.  The estimation error then obeys the scalar recursion

    w_{k+1} = (1 - beta) w_r + beta w_k + beta T (V~ trig(phi~) - V trig(phi)),

whose bias and variance are available in closed form given the ranging
error moments and the dead-reckoning displacement moments.  beta is
chosen per axis and per step by minimising the weighted Pareto objective

    rho * mu_{k+1}^2(beta) + (1 - rho) * sigma_{k+1}^2(beta),

with rho either fixed, or picked on a grid so bias^2 and variance
balance (knee point), or rho = 1/2 which reduces to the plain MSE
minimiser.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .deadreckoning import dr_predict, dr_second_moment
from .models import (
    AnchorSet,
    MeasurementFrame,
    RangeNoiseModel,
    SensorNoiseModel,
    range_variance,
    true_ranges,
)
from .ranging import (
    RangingGeometry,
    noise_cov_inverse,
    ranging_bias,
    ranging_second_moment,
    wls_estimate,
)


@dataclass(slots=True)
class VarianceComponents:
    """The three variance contributions to one axis of the fused error.

    Attributes
    ----------
    sigma_vr_sq : float
        Variance of the (zero-mean part of the) ranging error.
    sigma_vx_sq : float
        Variance of the previous step's fused error.
    sigma_vv_sq : float
        Variance of the dead-reckoned displacement T * V~ trig(phi~).
    """

    sigma_vr_sq: float
    sigma_vx_sq: float
    sigma_vv_sq: float

    def total(self) -> float:
        return self.sigma_vr_sq + self.sigma_vx_sq + self.sigma_vv_sq


@dataclass(slots=True)
class AxisContext:
    """Everything one axis needs to score a candidate beta at one step.

    Attributes
    ----------
    ranging_mean : float
        E{w_r}, the WLS error bias on this axis.
    ranging_second : float
        E{w_r^2}, the raw WLS error second moment on this axis.
    prev_bias : float
        Tracked bias of the previous fused estimate on this axis.
    prev_variance : float
        Tracked variance of the previous fused estimate on this axis.
    dr_true_first : float
        Noise-free displacement direction term V trig(phi) (trig = cos on
        axis 0, sin on axis 1), from the kinematic approximations.
    heading_attenuation : float
        exp(-sigma_phi^2 / 2); ties the noisy displacement mean to the
        noise-free one.
    dr_second : float
        E{V~^2 trig^2(phi~)}.
    T : float
        Step period.
    """

    ranging_mean: float
    ranging_second: float
    prev_bias: float
    prev_variance: float
    dr_true_first: float
    heading_attenuation: float
    dr_second: float
    T: float

    @property
    def dr_first(self) -> float:
        """E{V~ trig(phi~)} = V trig(phi) * heading attenuation."""
        return self.dr_true_first * self.heading_attenuation

    @property
    def drift(self) -> float:
        """Deterministic dead-reckoning bias increment
        T V trig(phi) (exp(-sigma_phi^2/2) - 1)."""
        return self.T * self.dr_true_first * (self.heading_attenuation - 1.0)

    @property
    def sigma_vr_sq(self) -> float:
        return self.ranging_second - self.ranging_mean**2

    @property
    def sigma_vv_sq(self) -> float:
        return self.T**2 * (self.dr_second - self.dr_first**2)

    @property
    def gamma(self) -> float:
        """Mean of the beta-multiplied error part: -E{w_r} + E{w_k} + drift."""
        return -self.ranging_mean + self.prev_bias + self.drift

    def components(self) -> VarianceComponents:
        return VarianceComponents(
            sigma_vr_sq=self.sigma_vr_sq,
            sigma_vx_sq=self.prev_variance,
            sigma_vv_sq=self.sigma_vv_sq,
        )


@dataclass(slots=True)
class ParetoConfig:
    """Knobs of the per-axis beta selection.

    Attributes
    ----------
    rho_grid : np.ndarray
        Candidate Pareto weights for the knee search, in [0, 1].
    beta_domain : tuple
        Hard feasibility interval for beta.
    beta_clip : float
        Extra cap on |beta|; keeps the fused estimator strictly forgetting
        so bias/variance recursions stay contractive.
    mode : str
        "knee" (grid-balanced rho), "fixed" (use `fixed_rho`) or "mse"
        (plain MSE minimiser, equivalent to rho = 1/2).
    fixed_rho : float
        Pareto weight used when mode == "fixed".
    initial_speed, initial_heading : float
        Kinematic prior used before two estimates exist to difference.
    """

    rho_grid: np.ndarray = field(
        default_factory=lambda: np.linspace(0.0, 1.0, 51)
    )
    beta_domain: tuple = (-1.0, 1.0)
    beta_clip: float = 0.99
    mode: str = "knee"
    fixed_rho: float = 0.5
    initial_speed: float = 0.0
    initial_heading: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("knee", "fixed", "mse"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.beta_clip <= 1.0:
            raise ValueError("beta_clip must be in (0, 1]")


@dataclass(slots=True)
class FusionState:
    """Fused estimator state carried between steps.

    Attributes
    ----------
    estimate : np.ndarray
        Current fused position estimate (2,).
    prev_estimate : np.ndarray or None
        Previous fused estimate, needed to difference out speed/heading.
    bias_estimate : np.ndarray
        Tracked per-axis error bias (2,).
    error_variance : np.ndarray
        Tracked per-axis error variance (2,).
    k : int
        Step index of `estimate`.
    last_speed, last_heading : float
        Kinematic approximations used at the most recent step (fallback
        values before any step has run).
    last_beta, last_rho : np.ndarray
        Per-axis beta and rho chosen at the most recent step (diagnostics).
    """

    estimate: np.ndarray
    prev_estimate: np.ndarray | None
    bias_estimate: np.ndarray
    error_variance: np.ndarray
    k: int = 0
    last_speed: float = 0.0
    last_heading: float = 0.0
    last_beta: np.ndarray = field(default_factory=lambda: np.zeros(2))
    last_rho: np.ndarray = field(default_factory=lambda: np.full(2, 0.5))


def fuse(beta, ranging_estimate, dr_estimate) -> np.ndarray:
    """Per-axis combination (1 - beta) * x_r + beta * x_v.

    beta may be a scalar or one value per axis.
    """
    beta = np.asarray(beta, dtype=float)
    x_r = np.asarray(ranging_estimate, dtype=float)
    x_v = np.asarray(dr_estimate, dtype=float)
    return (1.0 - beta) * x_r + beta * x_v


def bias_recursion(beta: float, ctx: AxisContext) -> float:
    """Bias of the fused error after one step with the given beta.

    mu_{k+1} = (1 - beta) E{w_r} + beta E{w_k}
               + beta T V trig(phi) (exp(-sigma_phi^2/2) - 1).
    """
    return (1.0 - beta) * ctx.ranging_mean + beta * ctx.prev_bias + beta * ctx.drift


def second_moment_terms(ctx: AxisContext) -> tuple:
    """Quadratic coefficients (a_k, b_k) of the fused error second moment.

    E{w_{k+1}^2} = beta^2 a_k + 2 beta b_k + E{w_r^2}, with

    a_k = E{w_r^2} + E{w_k^2} + T^2 E{V~^2 trig^2}
          + T^2 V^2 trig^2 (1 - 2 exp(-sigma_phi^2/2))
          - 2 E{w_k} E{w_r} - 2 E{w_r} c + 2 E{w_k} c,
    b_k = -E{w_r^2} + E{w_k} E{w_r} + E{w_r} c,

    where c is the dead-reckoning drift term.  Algebraically
    a_k = gamma^2 + eta >= 0 and b_k = E{w_r} gamma - sigma_vr^2.
    """
    prev_second = ctx.prev_bias**2 + ctx.prev_variance
    c = ctx.drift
    a_k = (
        ctx.ranging_second
        + prev_second
        + ctx.T**2 * ctx.dr_second
        + ctx.T**2 * ctx.dr_true_first**2 * (1.0 - 2.0 * ctx.heading_attenuation)
        - 2.0 * ctx.prev_bias * ctx.ranging_mean
        - 2.0 * ctx.ranging_mean * c
        + 2.0 * ctx.prev_bias * c
    )
    b_k = -ctx.ranging_second + ctx.prev_bias * ctx.ranging_mean + ctx.ranging_mean * c
    return a_k, b_k


def error_variance(beta: float, comps: VarianceComponents) -> float:
    """Variance of the fused error after one step with the given beta.

    sigma^2 = (1 - beta)^2 sigma_vr^2 + beta^2 sigma_vx^2 + beta^2 sigma_vv^2.
    """
    return (
        (1.0 - beta) ** 2 * comps.sigma_vr_sq
        + beta**2 * comps.sigma_vx_sq
        + beta**2 * comps.sigma_vv_sq
    )


def optimal_beta(rho: float, ctx: AxisContext, config: ParetoConfig | None = None) -> float:
    """Minimiser of rho * mu^2(beta) + (1 - rho) * sigma^2(beta).

    The objective is quadratic in beta; the stationary point is

        xi = [2 (1-rho) sigma_vr^2 - 2 rho gamma E{w_r}]
             / [2 (1-rho) eta + 2 rho gamma^2],

    with eta = sigma_vr^2 + sigma_vx^2 + sigma_vv^2, clamped to the
    feasible domain and capped at |beta| <= beta_clip.  A non-positive
    denominator means the objective has no curvature (all variances and
    the bias drift vanish); beta = 0 is returned with a warning.
    """
    if config is None:
        config = ParetoConfig()
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    comps = ctx.components()
    gamma = ctx.gamma
    eta = comps.total()
    num = 2.0 * (1.0 - rho) * comps.sigma_vr_sq - 2.0 * rho * gamma * ctx.ranging_mean
    den = 2.0 * (1.0 - rho) * eta + 2.0 * rho * gamma**2
    if den <= 0.0:
        warnings.warn(
            "degenerate beta objective (zero curvature); falling back to beta = 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    xi = num / den
    lo, hi = config.beta_domain
    beta = min(max(xi, lo), hi)
    return math.copysign(min(abs(beta), config.beta_clip), beta)


def mse_beta(a_k: float, b_k: float, config: ParetoConfig | None = None) -> float:
    """Plain MSE-minimising beta: clamp(-b_k / a_k) to the feasible domain.

    Raises
    ------
    ValueError
        If a_k <= 0 (the second moment would not be convex in beta,
        which cannot happen for genuine moments).
    """
    if config is None:
        config = ParetoConfig()
    if a_k <= 0.0:
        raise ValueError(f"a_k must be positive, got {a_k}")
    lo, hi = config.beta_domain
    beta = min(max(-b_k / a_k, lo), hi)
    return math.copysign(min(abs(beta), config.beta_clip), beta)


def select_rho(ctx: AxisContext, config: ParetoConfig) -> tuple:
    """Knee-point Pareto weight and its beta for one axis.

    Scans `config.rho_grid`, computes beta*(rho) for each candidate, then
    the resulting one-step bias and variance, and keeps the rho whose
    squared-bias / variance gap (sigma^2 - mu^2)^2 is smallest.  Ties go
    to the smallest rho (np.argmin keeps the first minimum on the sorted
    grid).

    Returns
    -------
    (rho_star, beta_star) : tuple of floats
    """
    comps = ctx.components()
    rho = config.rho_grid
    gamma = ctx.gamma
    eta = comps.total()
    num = 2.0 * (1.0 - rho) * comps.sigma_vr_sq - 2.0 * rho * gamma * ctx.ranging_mean
    den = 2.0 * (1.0 - rho) * eta + 2.0 * rho * gamma**2
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    lo, hi = config.beta_domain
    betas = np.clip(xi, lo, hi)
    betas = np.sign(betas) * np.minimum(np.abs(betas), config.beta_clip)
    mu = (1.0 - betas) * ctx.ranging_mean + betas * ctx.prev_bias + betas * ctx.drift
    var = (
        (1.0 - betas) ** 2 * comps.sigma_vr_sq
        + betas**2 * comps.sigma_vx_sq
        + betas**2 * comps.sigma_vv_sq
    )
    objective = (var - mu**2) ** 2
    best = int(np.argmin(objective))
    return float(rho[best]), float(betas[best])


def approximate_kinematics(
    prev_prev,
    prev,
    T: float,
    fallback_speed: float,
    fallback_heading: float,
) -> tuple:
    """Speed and heading inferred from the last two position estimates.

    V = ||prev - prev_prev|| / T and phi = atan2(dy, dx) (full-quadrant).
    With no older estimate available the configured fallbacks are
    returned; with zero displacement the speed is 0 and the previous
    heading is retained (the direction of a zero step is undefined).
    """
    if prev_prev is None:
        return fallback_speed, fallback_heading
    delta = np.asarray(prev, dtype=float) - np.asarray(prev_prev, dtype=float)
    norm = float(np.linalg.norm(delta))
    if norm < 1e-12:
        return 0.0, fallback_heading
    return norm / T, math.atan2(delta[1], delta[0])


def init_fusion(
    frame: MeasurementFrame,
    anchors: AnchorSet,
    geometry: RangingGeometry,
    range_model: RangeNoiseModel,
    config: ParetoConfig,
) -> FusionState:
    """Bootstrap the fused state from a WLS-only solve of the first frame.

    Weights are evaluated at the measured ranges (no prior estimate
    exists yet); the tracked bias / variance start from the ranging error
    moments at that operating point.
    """
    r = np.maximum(np.asarray(frame.ranges, dtype=float), 0.0)
    variances = range_variance(r, range_model)
    w = noise_cov_inverse(r, variances)
    estimate = wls_estimate(geometry, frame.ranges, w)
    bias = ranging_bias(geometry, w, variances)
    second = ranging_second_moment(geometry, w, r, variances)
    return FusionState(
        estimate=estimate,
        prev_estimate=None,
        bias_estimate=bias,
        error_variance=np.diag(second).copy(),
        k=frame.k,
        last_speed=config.initial_speed,
        last_heading=config.initial_heading,
    )


def fusion_step(
    state: FusionState,
    frame: MeasurementFrame,
    anchors: AnchorSet,
    geometry: RangingGeometry,
    range_model: RangeNoiseModel,
    sensor_model: SensorNoiseModel,
    config: ParetoConfig,
    T: float,
) -> FusionState:
    """Advance the fused estimator by one measurement frame.

    Online operation replaces unknowable quantities by approximations:
    speed/heading by differencing the last two estimates, true ranges by
    ranges from the previous estimate, the previous error variance by the
    tracked one.

    Returns a new FusionState; the input state is not modified.
    """
    v_ap, phi_ap = approximate_kinematics(
        state.prev_estimate, state.estimate, T, state.last_speed, state.last_heading
    )

    x_v = dr_predict(state.estimate, frame, T)

    # The ranging moments describe the *incoming* frame, so the unknown
    # true ranges are approximated at the dead-reckoned prediction (the
    # best available guess of the new position) rather than at the stale
    # previous estimate; the two coincide as the per-step displacement
    # shrinks.
    r_ap = true_ranges(x_v, anchors)
    variances = range_variance(r_ap, range_model)
    weight = noise_cov_inverse(r_ap, variances)
    x_r = wls_estimate(geometry, frame.ranges, weight)
    r_bias = ranging_bias(geometry, weight, variances)
    r_second = ranging_second_moment(geometry, weight, r_ap, variances)

    atten = math.exp(-0.5 * sensor_model.sigma_phi**2)
    new_estimate = np.empty(2)
    new_bias = np.empty(2)
    new_variance = np.empty(2)
    betas = np.empty(2)
    rhos = np.empty(2)
    for axis in range(2):
        trig = math.cos(phi_ap) if axis == 0 else math.sin(phi_ap)
        ctx = AxisContext(
            ranging_mean=float(r_bias[axis]),
            ranging_second=float(r_second[axis, axis]),
            prev_bias=float(state.bias_estimate[axis]),
            prev_variance=float(state.error_variance[axis]),
            dr_true_first=v_ap * trig,
            heading_attenuation=atten,
            dr_second=dr_second_moment(
                v_ap, sensor_model.sigma_v, phi_ap, sensor_model.sigma_phi, axis=axis
            ),
            T=T,
        )
        if config.mode == "knee":
            rho, beta = select_rho(ctx, config)
        elif config.mode == "fixed":
            rho = config.fixed_rho
            beta = optimal_beta(rho, ctx, config)
        else:  # mse
            rho = 0.5
            a_k, b_k = second_moment_terms(ctx)
            beta = mse_beta(a_k, b_k, config)
        new_estimate[axis] = fuse(beta, x_r[axis], x_v[axis])
        new_bias[axis] = bias_recursion(beta, ctx)
        new_variance[axis] = error_variance(beta, ctx.components())
        betas[axis] = beta
        rhos[axis] = rho

    return FusionState(
        estimate=new_estimate,
        prev_estimate=state.estimate.copy(),
        bias_estimate=new_bias,
        error_variance=new_variance,
        k=frame.k,
        last_speed=v_ap,
        last_heading=phi_ap,
        last_beta=betas,
        last_rho=rhos,
    )
