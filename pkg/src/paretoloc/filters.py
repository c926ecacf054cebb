"""Baseline Kalman-type estimators for the same sensor suite.

Three filters treat speed/heading as known inputs driving a 2-D position
state (EKF with linearised range measurements, UKF with an unscented
range update, and a linear-correction KF that first collapses the ranges
to a WLS position fix), plus one 4-D EKF that instead models
(x1, x2, V, phi) as a nearly-constant-velocity state and takes speed and
heading as measurements.  All filters share the distance-dependent range
noise model, evaluated at predicted ranges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    AnchorSet,
    CvProcessModel,
    MeasurementFrame,
    RangeNoiseModel,
    SensorNoiseModel,
    range_variance,
    true_ranges,
)
from .ranging import (
    RangingGeometry,
    build_geometry,
    noise_cov_inverse,
    ranging_bias,
    ranging_second_moment,
    wls_estimate,
)

_MIN_RANGE = 1e-9


@dataclass(slots=True)
class KfState:
    """Gaussian filter belief.

    Attributes
    ----------
    mean : np.ndarray
        State mean, (2,) for the position filters, (4,) for the CV filter.
    covariance : np.ndarray
        State covariance, matching square shape.
    """

    mean: np.ndarray
    covariance: np.ndarray


def position_init(position, variance: float = 1.0) -> KfState:
    """Initial 2-D belief: given position, isotropic covariance."""
    return KfState(
        mean=np.asarray(position, dtype=float).copy(),
        covariance=np.eye(2) * variance,
    )


def cv_init(position, speed: float, heading: float) -> KfState:
    """Initial 4-D belief for the constant-velocity filter.

    Position covariance 1 m^2 per axis, speed 0.25 (m/s)^2, heading
    (pi/4)^2 rad^2 -- loose priors that let the measurements take over.
    """
    mean = np.array([position[0], position[1], speed, heading], dtype=float)
    return KfState(
        mean=mean,
        covariance=np.diag([1.0, 1.0, 0.25, (np.pi / 4.0) ** 2]),
    )


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def _input_driven_predict(
    state: KfState, frame: MeasurementFrame, sensor_model: SensorNoiseModel, T: float
) -> KfState:
    """Dead-reckoning predict step shared by the 2-D filters.

    The measured speed/heading act as control inputs; their noise enters
    the state through the displacement Jacobian B = d(displacement)/d(V, phi),
    giving process noise Q = B diag(sigma_v^2, sigma_phi^2) B^T.
    """
    v, phi = frame.speed, frame.heading
    c, s = np.cos(phi), np.sin(phi)
    mean = state.mean + T * v * np.array([c, s])
    b = np.array([[T * c, -T * v * s], [T * s, T * v * c]])
    q = b @ np.diag([sensor_model.sigma_v**2, sensor_model.sigma_phi**2]) @ b.T
    return KfState(mean=mean, covariance=_symmetrize(state.covariance + q))


def _range_jacobian(position, anchors: AnchorSet) -> tuple:
    """Predicted ranges (M,) and their Jacobian (M, 2) at a position."""
    diff = np.asarray(position, dtype=float)[None, :] - anchors.positions
    r = np.maximum(np.linalg.norm(diff, axis=1), _MIN_RANGE)
    return r, diff / r[:, None]


def ekf_step(
    state: KfState,
    frame: MeasurementFrame,
    anchors: AnchorSet,
    range_model: RangeNoiseModel,
    sensor_model: SensorNoiseModel,
    T: float,
) -> KfState:
    """One EKF predict/update cycle on the 2-D position state.

    Ranges are linearised about the predicted position; the measurement
    noise covariance is diagonal with the distance-dependent variances
    evaluated at the predicted ranges.
    """
    pred = _input_driven_predict(state, frame, sensor_model, T)
    r_hat, h = _range_jacobian(pred.mean, anchors)
    r_cov = np.diag(range_variance(r_hat, range_model))
    innovation = np.asarray(frame.ranges, dtype=float) - r_hat
    s = h @ pred.covariance @ h.T + r_cov
    gain = np.linalg.solve(s.T, (pred.covariance @ h.T).T).T
    mean = pred.mean + gain @ innovation
    cov = (np.eye(2) - gain @ h) @ pred.covariance
    return KfState(mean=mean, covariance=_symmetrize(cov))


def _sigma_points(mean: np.ndarray, cov: np.ndarray, kappa: float = 1.0) -> tuple:
    """Symmetric 2n+1 sigma-point set with weights.

    Cholesky failure triggers one retry with 1e-12 jitter on the
    diagonal; a second failure propagates.
    """
    n = mean.size
    scale = n + kappa
    try:
        root = np.linalg.cholesky(scale * cov)
    except np.linalg.LinAlgError:
        root = np.linalg.cholesky(scale * (cov + 1e-12 * np.eye(n)))
    points = np.vstack([mean, mean + root.T, mean - root.T])
    weights = np.full(2 * n + 1, 1.0 / (2.0 * scale))
    weights[0] = kappa / scale
    return points, weights


def unscented_update(
    state: KfState, z: np.ndarray, h, r_cov: np.ndarray, kappa: float = 1.0
) -> KfState:
    """Generic unscented measurement update.

    Parameters
    ----------
    state : KfState
        Predicted belief.
    z : np.ndarray
        Measurement vector.
    h : callable
        Measurement function mapping a state vector to a measurement
        vector.
    r_cov : np.ndarray
        Additive measurement noise covariance.
    """
    points, weights = _sigma_points(state.mean, state.covariance, kappa)
    z_points = np.array([h(p) for p in points])
    z_hat = weights @ z_points
    dz = z_points - z_hat
    dx = points - state.mean
    s = dz.T @ (weights[:, None] * dz) + r_cov
    cross = dx.T @ (weights[:, None] * dz)
    gain = np.linalg.solve(s.T, cross.T).T
    mean = state.mean + gain @ (np.asarray(z, dtype=float) - z_hat)
    cov = state.covariance - gain @ s @ gain.T
    return KfState(mean=mean, covariance=_symmetrize(cov))


def ukf_step(
    state: KfState,
    frame: MeasurementFrame,
    anchors: AnchorSet,
    range_model: RangeNoiseModel,
    sensor_model: SensorNoiseModel,
    T: float,
) -> KfState:
    """One UKF cycle on the 2-D position state.

    The predict step is exactly linear in the state (the displacement
    does not depend on position), so only the range update goes through
    the unscented transform.
    """
    pred = _input_driven_predict(state, frame, sensor_model, T)
    r_hat, _ = _range_jacobian(pred.mean, anchors)
    r_cov = np.diag(range_variance(r_hat, range_model))

    def h(p):
        return np.maximum(
            np.linalg.norm(p[None, :] - anchors.positions, axis=1), _MIN_RANGE
        )

    return unscented_update(pred, frame.ranges, h, r_cov)


def lckf_step(
    state: KfState,
    frame: MeasurementFrame,
    anchors: AnchorSet,
    range_model: RangeNoiseModel,
    sensor_model: SensorNoiseModel,
    T: float,
    geometry: RangingGeometry | None = None,
) -> KfState:
    """One linear-correction KF cycle: WLS fix treated as a position reading.

    The ranges are collapsed to a WLS position estimate whose error
    covariance (closed form, evaluated at predicted ranges) becomes the
    measurement noise of a linear H = I update.  The covariance is
    floored to stay positive definite.
    """
    if geometry is None:
        geometry = build_geometry(anchors)
    pred = _input_driven_predict(state, frame, sensor_model, T)
    r_hat = true_ranges(pred.mean, anchors)
    variances = range_variance(r_hat, range_model)
    weight = noise_cov_inverse(r_hat, variances)
    z = wls_estimate(geometry, frame.ranges, weight)
    bias = ranging_bias(geometry, weight, variances)
    second = ranging_second_moment(geometry, weight, r_hat, variances)
    r_cov = _symmetrize(second - np.outer(bias, bias))
    eigvals, eigvecs = np.linalg.eigh(r_cov)
    r_cov = eigvecs @ np.diag(np.maximum(eigvals, 1e-12)) @ eigvecs.T

    s = pred.covariance + r_cov
    gain = np.linalg.solve(s.T, pred.covariance.T).T
    mean = pred.mean + gain @ (z - pred.mean)
    cov = (np.eye(2) - gain) @ pred.covariance
    return KfState(mean=mean, covariance=_symmetrize(cov))


def numerical_jacobian(f, x: np.ndarray, h_scale: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of f at x.

    Per-component step h_i = max(h_scale, h_scale * |x_i|).  Row i holds
    the partials of output i with respect to each input.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = max(h_scale, h_scale * abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h)
    return jac


def cv_transition_jacobian(state: np.ndarray, T: float) -> np.ndarray:
    """Analytic Jacobian of the constant-velocity transition (4, 4)."""
    _, _, v, phi = np.asarray(state, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    return np.array(
        [
            [1.0, 0.0, T * c, -T * v * s],
            [0.0, 1.0, T * s, T * v * c],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def ekf_cv_step(
    state: KfState,
    frame: MeasurementFrame,
    anchors: AnchorSet,
    cv_model: CvProcessModel,
    range_model: RangeNoiseModel,
    sensor_model: SensorNoiseModel,
) -> KfState:
    """One EKF cycle on the 4-D constant-velocity state.

    Speed and heading join the ranges as measurements; the transition
    Jacobian is obtained by central differences on the CV transition (the
    analytic form exists and is used as a test oracle, the filter itself
    exercises the numerical path).
    """
    f = cv_model.transition
    f_jac = numerical_jacobian(f, state.mean)
    mean_pred = f(state.mean)
    cov_pred = _symmetrize(f_jac @ state.covariance @ f_jac.T + cv_model.q_matrix())

    r_hat, d = _range_jacobian(mean_pred[:2], anchors)
    m = anchors.m
    h = np.zeros((m + 2, 4))
    h[:m, :2] = d
    h[m, 2] = 1.0
    h[m + 1, 3] = 1.0
    z_hat = np.concatenate([r_hat, mean_pred[2:]])
    z = np.concatenate(
        [np.asarray(frame.ranges, dtype=float), [frame.speed, frame.heading]]
    )
    r_cov = np.diag(
        np.concatenate(
            [
                range_variance(r_hat, range_model),
                [sensor_model.sigma_v**2, sensor_model.sigma_phi**2],
            ]
        )
    )
    s = h @ cov_pred @ h.T + r_cov
    gain = np.linalg.solve(s.T, (cov_pred @ h.T).T).T
    mean = mean_pred + gain @ (z - z_hat)
    cov = (np.eye(4) - gain @ h) @ cov_pred
    return KfState(mean=mean, covariance=_symmetrize(cov))
