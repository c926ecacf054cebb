"""Trajectory generation, paired Monte Carlo experiments, CSV output.

The load-bearing invariant: every generated state's speed/heading
describe the displacement of the interval ending at that step, so
noise-free dead reckoning must replay the exact path — bounces, ramps
and all.  The experiment harness is checked for seed determinism and for
noise pairing across estimator subsets.
"""
import csv
import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from paretoloc.models import CvProcessModel, DEFAULT_ANCHORS
from paretoloc.simulate import (
    ARENA_BOUNDS,
    ExperimentConfig,
    KNOWN_ESTIMATORS,
    TrajectorySpec,
    _reflect,
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


# ---------------------------------------------------------------------------
# trajectory generation
# ---------------------------------------------------------------------------


def test_reflect_folds_into_interval():
    assert _reflect(2.5, 0.0, 4.0) == (2.5, 1.0)
    assert _reflect(5.2, 0.0, 4.0) == pytest.approx((2.8, -1.0))
    assert _reflect(-0.6, 0.0, 4.0) == pytest.approx((0.6, -1.0))
    # two walls crossed: value folds twice, velocity sign restored
    assert _reflect(9.0, 0.0, 4.0) == pytest.approx((1.0, 1.0))


def _dr_replay(states, t_step):
    """Positions rebuilt from each state's own chord kinematics."""
    pos = [states[0].position]
    for s in states[1:]:
        step = t_step * s.speed * np.array([math.cos(s.heading), math.sin(s.heading)])
        pos.append(pos[-1] + step)
    return np.array(pos)


@pytest.mark.parametrize(
    "spec",
    [
        TrajectorySpec(kind="linear", steps=120, speed=0.3, heading=0.7),
        TrajectorySpec(
            kind="linear", steps=400, speed=0.9, heading=0.7, bounds=ARENA_BOUNDS
        ),
        TrajectorySpec(kind="pwl", steps=150, speed=0.2, a_max=0.6),
        TrajectorySpec(
            kind="pwl",
            steps=300,
            start=np.array([2.0, 2.0]),
            speed=0.2,
            a_max=0.8,
            bounds=ARENA_BOUNDS,
        ),
    ],
    ids=["linear-free", "linear-bouncing", "pwl-free", "pwl-contained"],
)
def test_chord_kinematics_replay_the_path_exactly(spec):
    states = gen_trajectory(spec, np.random.default_rng(3))
    truth = np.array([s.position for s in states])
    assert_allclose(_dr_replay(states, spec.T), truth, atol=1e-9)
    assert [s.k for s in states] == list(range(spec.steps))


def test_cv_rollout_follows_model_kinematics():
    cv = CvProcessModel(
        T=0.1, sigma1_sq=1e-18, sigma2_sq=1e-18, sigma3_sq=1e-18, sigma4_sq=1e-18
    )
    spec = TrajectorySpec(kind="cv", steps=50, speed=0.3, heading=0.5, cv=cv)
    states = gen_trajectory(spec, np.random.default_rng(0))
    # displacement at k uses the k-1 state's speed/heading (model form)
    for prev, cur in zip(states, states[1:]):
        step = spec.T * prev.speed * np.array(
            [math.cos(prev.heading), math.sin(prev.heading)]
        )
        assert_allclose(cur.position, prev.position + step, atol=1e-7)


def test_bouncing_linear_track_stays_inside_and_keeps_speed():
    spec = TrajectorySpec(
        kind="linear", steps=500, speed=1.2, heading=0.9, bounds=ARENA_BOUNDS
    )
    states = gen_trajectory(spec)
    pos = np.array([s.position for s in states])
    (x_lo, x_hi), (y_lo, y_hi) = ARENA_BOUNDS
    assert np.all((pos[:, 0] >= x_lo) & (pos[:, 0] <= x_hi))
    assert np.all((pos[:, 1] >= y_lo) & (pos[:, 1] <= y_hi))
    speeds = np.array([s.speed for s in states[1:]])
    # a wall hit shortens that step's chord, never lengthens it
    assert np.all(speeds <= spec.speed + 1e-9)
    assert np.median(speeds) == pytest.approx(spec.speed)


def test_pwl_acceleration_cap_limits_velocity_increments():
    spec = TrajectorySpec(kind="pwl", steps=200, speed=0.2, a_max=0.4)
    states = gen_trajectory(spec, np.random.default_rng(8))
    pos = np.array([s.position for s in states])
    vel = np.diff(pos, axis=0) / spec.T
    accel = np.linalg.norm(np.diff(vel, axis=0), axis=1) / spec.T
    assert np.max(accel) <= spec.a_max + 1e-9
    duration = (spec.steps - 1) * spec.T
    assert np.max(np.linalg.norm(vel, axis=1)) <= spec.speed + spec.a_max * duration


def test_contained_pwl_keeps_long_runs_in_coverage():
    for seed in range(4):
        spec = TrajectorySpec(
            kind="pwl",
            steps=600,
            start=np.array([2.0, 2.0]),
            speed=0.2,
            a_max=1.0,
            bounds=ARENA_BOUNDS,
        )
        pos = np.array(
            [s.position for s in gen_trajectory(spec, np.random.default_rng(seed))]
        )
        # the steering is soft (velocity targets, not walls): overshoot
        # past the inset margin is fine, an unbounded walk-off is not
        assert np.all(pos >= -0.8) and np.all(pos <= 4.8)
        assert np.all(np.abs(pos.mean(axis=0) - 2.0) < 1.5)


def test_gen_trajectory_is_seed_deterministic():
    spec = TrajectorySpec(kind="pwl", steps=60, a_max=0.5)
    a = gen_trajectory(spec, np.random.default_rng(5))
    b = gen_trajectory(spec, np.random.default_rng(5))
    assert_allclose(
        [s.position for s in a], [s.position for s in b], atol=0.0
    )


def test_trajectory_spec_validation():
    with pytest.raises(ValueError):
        TrajectorySpec(kind="spiral")
    with pytest.raises(ValueError):
        TrajectorySpec(steps=1)
    with pytest.raises(ValueError):
        TrajectorySpec(T=0.0)


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------


def _small_config(**overrides):
    defaults = dict(
        trajectory=TrajectorySpec(
            kind="linear",
            steps=60,
            start=np.array([1.0, 1.5]),
            speed=0.3,
            heading=0.6,
            bounds=ARENA_BOUNDS,
        ),
        estimators=("fusion", "ekf"),
        runs=3,
        seed=0,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        _small_config(estimators=("fusion", "kalman"))
    with pytest.raises(ValueError):
        _small_config(runs=0)


def test_run_experiment_shapes_and_summary_consistency():
    config = _small_config()
    result = run_experiment(config)
    assert result.estimators == ("fusion", "ekf")
    assert result.runs == 3 and result.steps == 60
    assert result.truth_trace.shape == (60, 2)
    for name in result.estimators:
        err = result.errors[name]
        assert err.shape == (3, 60)
        assert result.excluded[name] == 0
        assert not np.any(np.isnan(err))
        assert result.rmse[name] == pytest.approx(
            float(np.mean(np.sqrt(np.mean(err**2, axis=1))))
        )
        assert result.p95[name] == pytest.approx(
            float(np.percentile(err.ravel(), 95.0))
        )
        assert result.estimate_traces[name].shape == (60, 2)
        # first-run trace consistent with first-run errors
        re_err = np.linalg.norm(
            result.estimate_traces[name] - result.truth_trace, axis=1
        )
        assert_allclose(re_err, err[0], atol=1e-12)


def test_run_experiment_is_deterministic():
    a = run_experiment(_small_config())
    b = run_experiment(_small_config())
    for name in a.estimators:
        assert_allclose(a.errors[name], b.errors[name], atol=0.0)


def test_noise_pairing_survives_estimator_subsetting():
    # the same seed must feed each estimator the same measurement
    # sequences no matter which other estimators run alongside
    both = run_experiment(_small_config(estimators=("fusion", "ekf")))
    alone = run_experiment(_small_config(estimators=("ekf",)))
    assert_allclose(both.errors["ekf"], alone.errors["ekf"], atol=0.0)


def test_all_known_estimators_produce_finite_errors():
    config = _small_config(estimators=KNOWN_ESTIMATORS, runs=2)
    result = run_experiment(config)
    for name in KNOWN_ESTIMATORS:
        assert np.isfinite(result.rmse[name]), name
        assert result.rmse[name] < 2.0, name


def test_sweep_varies_one_parameter_without_touching_config():
    config = _small_config(runs=2)
    out = sweep(config, "speed", [0.1, 0.4])
    assert [v for v, _ in out] == [0.1, 0.4]
    assert config.trajectory.speed == 0.3
    for _, result in out:
        assert set(result.rmse) == {"fusion", "ekf"}
    # amax maps onto the acceleration cap of an accelerating track
    pwl = _small_config(
        trajectory=scenario_pwl(steps=50), estimators=("ekf",), runs=2
    )
    out = sweep(pwl, "amax", [0.2])
    assert out[0][0] == 0.2
    with pytest.raises(ValueError):
        sweep(config, "wind", [1.0])


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def test_scenario_presets():
    a = make_scenario("A")
    assert a.kind == "linear" and a.bounds == ARENA_BOUNDS
    b = make_scenario("b", a_max=0.7)
    assert b.kind == "pwl" and b.a_max == 0.7
    cv = make_scenario("CV")
    assert cv.kind == "cv" and cv.cv is not None
    assert make_scenario("a", speed=0.4).speed == 0.4
    assert scenario_linear().steps == 300
    assert scenario_cv().heading == pytest.approx(np.pi / 12.0)
    with pytest.raises(ValueError):
        make_scenario("D")


def test_default_anchor_cell_is_shared():
    config = ExperimentConfig()
    assert config.anchors is DEFAULT_ANCHORS
    assert config.anchors.m == 8


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def test_write_run_trace_and_summary(tmp_path):
    result = run_experiment(_small_config(runs=2))
    trace_path = tmp_path / "trace.csv"
    write_run_trace(trace_path, result)
    with open(trace_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == [
        "k",
        "truth_x1",
        "truth_x2",
        "fusion_x1",
        "fusion_x2",
        "fusion_err",
        "ekf_x1",
        "ekf_x2",
        "ekf_err",
    ]
    assert len(rows) == 1 + result.steps
    assert float(rows[1][1]) == pytest.approx(result.truth_trace[0, 0])
    assert float(rows[5][8]) == pytest.approx(result.errors["ekf"][0, 4])

    summary_path = tmp_path / "summary.csv"
    write_summary(summary_path, result)
    with open(summary_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["estimator", "rmse_m", "p95_err_m", "runs", "excluded"]
    assert rows[1][0] == "fusion"
    assert float(rows[1][1]) == pytest.approx(result.rmse["fusion"])
    assert rows[2][3] == "2" and rows[2][4] == "0"


def test_write_crlb(tmp_path):
    path = tmp_path / "crlb.csv"
    write_crlb(
        path,
        np.array([0.5, 0.4]),
        np.array([0.45, 0.35]),
        np.array([0.4, 0.3]),
        np.array([0.5, 0.4]),
    )
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "parcrlb", "pcrlb", "pcrlb_lb", "pcrlb_ub"]
    assert rows[2] == ["1", "0.4", "0.35", "0.3", "0.4"]


def test_crlb_traces_small():
    config = ExperimentConfig(
        trajectory=scenario_cv(steps=10), estimators=("ekf",), runs=1, seed=4
    )
    out = crlb_traces(config, n_ensemble=150)
    assert set(out) == {"parcrlb", "pcrlb", "pcrlb_lb", "pcrlb_ub", "sandwich_ok"}
    for key in ("parcrlb", "pcrlb", "pcrlb_lb", "pcrlb_ub"):
        assert out[key].shape == (10,)
    assert np.all(out["parcrlb"] > 0.0) and np.all(np.isfinite(out["parcrlb"]))
    assert np.all(out["pcrlb"] > 0.0) and np.all(np.isfinite(out["pcrlb"]))
    finite = np.isfinite(out["pcrlb_ub"])
    assert np.all(out["pcrlb_lb"][finite] <= out["pcrlb_ub"][finite] + 1e-12)
    assert out["sandwich_ok"].dtype == bool
