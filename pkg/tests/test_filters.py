"""Kalman-filter baselines.

Strongest oracle here: on a *linear* measurement function the unscented
update must reproduce the textbook Kalman update exactly (the sigma-point
transform of an affine map is exact), so the two are compared to
near-machine precision.  The nonlinear filters are checked by noise-free
tracking and by hand-built single steps.
"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from paretoloc.filters import (
    KfState,
    _sigma_points,
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
from paretoloc.models import (
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
from paretoloc.ranging import build_geometry, noise_cov_inverse, wls_estimate

ANCHORS = AnchorSet(
    np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0], [2.0, 0.0]])
)
QUIET_RANGES = RangeNoiseModel(sigma0_sq=1e-10, kappa=0.0)
QUIET_SENSORS = SensorNoiseModel(sigma_v=0.0, sigma_phi=0.0)


def _random_spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


def test_sigma_points_reconstruct_moments():
    rng = np.random.default_rng(0)
    for n in (2, 4):
        mean = rng.normal(size=n)
        cov = _random_spd(rng, n)
        points, weights = _sigma_points(mean, cov)
        assert points.shape == (2 * n + 1, n)
        assert weights.sum() == pytest.approx(1.0)
        assert_allclose(weights @ points, mean, atol=1e-12)
        centered = points - mean
        assert_allclose(
            centered.T @ (weights[:, None] * centered), cov, atol=1e-10
        )


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_unscented_update_linear_case_equals_kalman(seed):
    # affine h: the unscented update and the exact Kalman update must agree
    rng = np.random.default_rng(seed)
    n, m = 4, 3
    prior = KfState(mean=rng.normal(size=n), covariance=_random_spd(rng, n))
    h_mat = rng.normal(size=(m, n))
    offset = rng.normal(size=m)
    r_cov = _random_spd(rng, m)
    z = rng.normal(size=m)

    posterior = unscented_update(prior, z, lambda x: h_mat @ x + offset, r_cov)

    s = h_mat @ prior.covariance @ h_mat.T + r_cov
    gain = prior.covariance @ h_mat.T @ np.linalg.inv(s)
    mean = prior.mean + gain @ (z - h_mat @ prior.mean - offset)
    cov = prior.covariance - gain @ s @ gain.T
    assert_allclose(posterior.mean, mean, atol=1e-8)
    assert_allclose(posterior.covariance, cov, atol=1e-8)


def test_numerical_jacobian_against_analytic():
    def f(x):
        return np.array([math.sin(x[0]) * x[1], x[0] ** 2, math.exp(0.5 * x[1])])

    x = np.array([0.7, -1.2])
    expected = np.array(
        [
            [math.cos(x[0]) * x[1], math.sin(x[0])],
            [2.0 * x[0], 0.0],
            [0.0, 0.5 * math.exp(0.5 * x[1])],
        ]
    )
    assert_allclose(numerical_jacobian(f, x), expected, atol=1e-7)


def test_cv_transition_jacobian_matches_numerical():
    cv = CvProcessModel(T=0.1)
    state = np.array([1.0, 2.0, 0.6, 0.9])
    assert_allclose(
        cv_transition_jacobian(state, cv.T),
        numerical_jacobian(cv.transition, state),
        atol=1e-7,
    )


def test_inits():
    p = position_init([1.0, 2.0], variance=0.5)
    assert_allclose(p.mean, [1.0, 2.0])
    assert_allclose(p.covariance, 0.5 * np.eye(2))
    c = cv_init([1.0, 2.0], 0.3, 0.4)
    assert_allclose(c.mean, [1.0, 2.0, 0.3, 0.4])
    assert_allclose(
        c.covariance, np.diag([1.0, 1.0, 0.25, (np.pi / 4.0) ** 2])
    )


def test_ekf_zero_innovation_keeps_predicted_mean():
    # measurements exactly at the predicted ranges: the update must not
    # move the mean, only shrink the covariance
    state = position_init([1.3, 0.8], variance=0.5)
    v, phi, t_step = 0.4, 0.3, 0.1
    pred_pos = state.mean + t_step * v * np.array([math.cos(phi), math.sin(phi)])
    frame = MeasurementFrame(
        ranges=true_ranges(pred_pos, ANCHORS), speed=v, heading=phi, k=1
    )
    out = ekf_step(state, frame, ANCHORS, RangeNoiseModel(), QUIET_SENSORS, t_step)
    assert_allclose(out.mean, pred_pos, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(out.covariance) > 0.0)
    assert np.trace(out.covariance) < np.trace(state.covariance)


def _track(step, steps=40, start=(1.0, 1.2), init_offset=(0.4, -0.3)):
    """Drive a filter with noise-free measurements from an offset start.

    The assumed sensor noise is small but nonzero so the gain stays
    bounded away from zero (a zero-process-noise filter grows
    overconfident and freezes its transient error).
    """
    t_step, v, phi = 0.1, 0.3, 0.5
    sensors = SensorNoiseModel(sigma_v=1e-3, sigma_phi=1e-3)
    pos = np.array(start, dtype=float)
    state = position_init(np.array(start) + np.array(init_offset))
    for k in range(1, steps + 1):
        pos = pos + t_step * v * np.array([math.cos(phi), math.sin(phi)])
        frame = MeasurementFrame(
            ranges=true_ranges(pos, ANCHORS), speed=v, heading=phi, k=k
        )
        state = step(state, frame, ANCHORS, QUIET_RANGES, sensors, t_step)
    return state, pos


@pytest.mark.parametrize("step", [ekf_step, ukf_step, lckf_step])
def test_position_filters_lock_onto_noise_free_truth(step):
    state, pos = _track(step)
    assert_allclose(state.mean, pos, atol=1e-4)


def test_ekf_cv_locks_onto_noise_free_truth():
    t_step, v, phi = 0.1, 0.3, 0.5
    cv = CvProcessModel(
        T=t_step, sigma1_sq=1e-8, sigma2_sq=1e-8, sigma3_sq=1e-8, sigma4_sq=1e-8
    )
    pos = np.array([1.0, 1.2])
    state = cv_init(pos + np.array([0.3, -0.2]), speed=0.0, heading=0.0)
    for k in range(1, 40):
        pos = pos + t_step * v * np.array([math.cos(phi), math.sin(phi)])
        frame = MeasurementFrame(
            ranges=true_ranges(pos, ANCHORS), speed=v, heading=phi, k=k
        )
        state = ekf_cv_step(state, frame, ANCHORS, cv, QUIET_RANGES, QUIET_SENSORS)
    assert_allclose(state.mean[:2], pos, atol=1e-4)
    assert state.mean[2] == pytest.approx(v, abs=1e-4)
    assert state.mean[3] == pytest.approx(phi, abs=1e-4)


@pytest.mark.parametrize("step", [ekf_step, ukf_step, lckf_step])
def test_noisy_steps_keep_covariance_positive(step):
    range_model, sensor_model = RangeNoiseModel(), SensorNoiseModel()
    streams = SensorStreams.from_seed(7)
    state = position_init([1.5, 1.5])
    pos = np.array([1.5, 1.5])
    for k in range(1, 25):
        pos = pos + 0.03 * np.array([1.0, 0.5])
        truth = TruthState(position=pos, speed=0.3, heading=0.46, k=k)
        frame = synthesize_measurements(
            truth, ANCHORS, range_model, sensor_model, streams
        )
        state = step(state, frame, ANCHORS, range_model, sensor_model, 0.1)
        cov = state.covariance
        assert_allclose(cov, cov.T, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(cov) > 0.0)
    assert np.linalg.norm(state.mean - pos) < 0.5


def test_ekf_beats_memoryless_wls():
    # filtering with memory must beat the per-step WLS fix it ingests
    range_model, sensor_model = RangeNoiseModel(), SensorNoiseModel()
    geometry = build_geometry(ANCHORS)
    streams = SensorStreams.from_seed(42)
    t_step, v, phi = 0.1, 0.3, 0.5
    pos = np.array([1.0, 1.2])
    state = position_init(pos)
    ekf_sq, wls_sq = [], []
    for k in range(1, 300):
        pos = pos + t_step * v * np.array([math.cos(phi), math.sin(phi)])
        if not (0.2 < pos[0] < 3.8 and 0.2 < pos[1] < 3.8):
            phi += math.pi / 2.0
        truth = TruthState(position=pos.copy(), speed=v, heading=phi, k=k)
        frame = synthesize_measurements(
            truth, ANCHORS, range_model, sensor_model, streams
        )
        state = ekf_step(state, frame, ANCHORS, range_model, sensor_model, t_step)
        r_true = true_ranges(pos, ANCHORS)
        w = noise_cov_inverse(r_true, range_variance(r_true, range_model))
        fix = wls_estimate(geometry, frame.ranges, w)
        ekf_sq.append(np.sum((state.mean - pos) ** 2))
        wls_sq.append(np.sum((fix - pos) ** 2))
    assert math.sqrt(np.mean(ekf_sq)) < 0.6 * math.sqrt(np.mean(wls_sq))
