"""Shared domain types and measurement synthesis.

Scene convention: a mobile node moves in the plane among M >= 4 fixed
anchors with known positions.  Per discrete step k the node observes one
range per anchor plus a speed and a heading measurement, all corrupted by
zero-mean Gaussian noise.  Range noise variance grows exponentially with
the true range (distance-dependent model), speed/heading noise is
homoscedastic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(slots=True)
class TruthState:
    """Ground-truth kinematic state of the mobile node at one step.

    Attributes
    ----------
    position : np.ndarray
        True planar position (2,) in metres.
    speed : float
        True speed magnitude in m/s.
    heading : float
        True heading angle in radians (atan2 convention).
    k : int
        Discrete step index.
    """

    position: np.ndarray
    speed: float
    heading: float
    k: int = 0

    def velocity(self) -> np.ndarray:
        """Velocity vector (2,) implied by speed and heading."""
        return self.speed * np.array(
            [math.cos(self.heading), math.sin(self.heading)]
        )


@dataclass(slots=True)
class AnchorSet:
    """Fixed anchor constellation.

    Attributes
    ----------
    positions : np.ndarray
        Anchor coordinates, shape (M, 2).  The last anchor is used as the
        reference when differencing squared ranges.
    """

    positions: np.ndarray

    def __post_init__(self) -> None:
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError(f"anchor positions must be (M, 2), got {self.positions.shape}")
        if self.m < 4:
            raise ValueError(f"need at least 4 anchors, got {self.m}")
        diffs = self.positions[:, None, :] - self.positions[None, :, :]
        dists = np.linalg.norm(diffs, axis=-1)
        np.fill_diagonal(dists, np.inf)
        if np.min(dists) <= 0.0:
            raise ValueError("anchors must be pairwise distinct")
        # Collinear anchors leave the position unobservable in the
        # squared-range-difference formulation.
        rel = self.positions[:-1] - self.positions[-1]
        if np.linalg.matrix_rank(rel) < 2:
            raise ValueError("anchors are collinear")

    @property
    def m(self) -> int:
        return self.positions.shape[0]


@dataclass(slots=True)
class RangeNoiseModel:
    """Distance-dependent range-noise variance sigma0_sq * exp(kappa * r).

    Attributes
    ----------
    sigma0_sq : float
        Variance floor at zero range, m^2.
    kappa : float
        Exponential growth rate per metre of true range.
    """

    sigma0_sq: float = 0.0625
    kappa: float = 0.25

    def __post_init__(self) -> None:
        if self.sigma0_sq <= 0.0:
            raise ValueError(f"sigma0_sq must be positive, got {self.sigma0_sq}")
        if self.kappa < 0.0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")


@dataclass(slots=True)
class SensorNoiseModel:
    """Speed / heading measurement noise (standard deviations).

    Attributes
    ----------
    sigma_v : float
        Speed noise standard deviation, m/s.
    sigma_phi : float
        Heading noise standard deviation, rad.
    """

    sigma_v: float = 0.05
    sigma_phi: float = math.pi / 8.0

    def __post_init__(self) -> None:
        if self.sigma_v < 0.0 or self.sigma_phi < 0.0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass(slots=True)
class CvProcessModel:
    """Nearly-constant-velocity process model in (x1, x2, V, phi) coordinates.

    The transition is x1' = x1 + T V cos(phi), x2' = x2 + T V sin(phi),
    V' = V, phi' = phi, plus zero-mean Gaussian process noise with diagonal
    covariance diag(sigma1_sq, sigma2_sq, sigma3_sq, sigma4_sq).

    The position noise components are assumed isotropic
    (sigma1_sq == sigma2_sq is *not* required, but several closed-form
    expectations below simplify when they match).
    """

    T: float = 0.1
    sigma1_sq: float = 1e-4
    sigma2_sq: float = 1e-4
    sigma3_sq: float = 1e-4
    sigma4_sq: float = 1e-4

    def __post_init__(self) -> None:
        if self.T <= 0.0:
            raise ValueError(f"step period T must be positive, got {self.T}")
        for name in ("sigma1_sq", "sigma2_sq", "sigma3_sq", "sigma4_sq"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")

    def q_matrix(self) -> np.ndarray:
        """Process-noise covariance Q, shape (4, 4)."""
        return np.diag(
            [self.sigma1_sq, self.sigma2_sq, self.sigma3_sq, self.sigma4_sq]
        )

    def transition(self, state: np.ndarray) -> np.ndarray:
        """Noise-free transition applied to a state vector (4,)."""
        x1, x2, v, phi = np.asarray(state, dtype=float)
        return np.array(
            [x1 + self.T * v * math.cos(phi), x2 + self.T * v * math.sin(phi), v, phi]
        )


@dataclass(slots=True)
class MeasurementFrame:
    """One step's worth of raw measurements.

    Attributes
    ----------
    ranges : np.ndarray
        Measured anchor ranges (M,), metres.
    speed : float
        Measured speed, m/s.
    heading : float
        Measured heading, rad.
    k : int
        Step index the frame belongs to.
    """

    ranges: np.ndarray
    speed: float
    heading: float
    k: int = 0


@dataclass(slots=True)
class SensorStreams:
    """Independent random substreams, one per physical sensor.

    Keeping the sensors on separate substreams makes paired experiments
    reproducible: changing how often one sensor is sampled does not
    perturb the noise another sensor sees.
    """

    ranges: np.random.Generator
    speed: np.random.Generator
    heading: np.random.Generator
    process: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int | np.random.SeedSequence) -> "SensorStreams":
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = root.spawn(4)
        return cls(*(np.random.default_rng(c) for c in children))


def range_variance(r, model: RangeNoiseModel):
    """Range-noise variance at true range r.

    Parameters
    ----------
    r : array_like
        True range(s), metres, >= 0.
    model : RangeNoiseModel

    Returns
    -------
    np.ndarray or float
        sigma0_sq * exp(kappa * r), same shape as `r`.

    Raises
    ------
    ValueError
        If any range is negative.

    Example
    -------
    >>> range_variance(0.0, RangeNoiseModel(sigma0_sq=0.0625, kappa=0.25))
    0.0625
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("ranges must be non-negative")
    out = model.sigma0_sq * np.exp(model.kappa * r)
    return float(out) if out.ndim == 0 else out


def true_ranges(position, anchors: AnchorSet) -> np.ndarray:
    """Euclidean ranges (M,) from a position (2,) to every anchor."""
    position = np.asarray(position, dtype=float)
    return np.linalg.norm(anchors.positions - position[None, :], axis=1)


def synthesize_measurements(
    state: TruthState,
    anchors: AnchorSet,
    range_model: RangeNoiseModel,
    sensor_model: SensorNoiseModel,
    streams: SensorStreams,
) -> MeasurementFrame:
    """Draw one noisy measurement frame for a true state.

    Ranges get independent N(0, sigma_i^2) noise with sigma_i^2 evaluated
    at the *true* range; speed and heading get N(0, sigma_v^2) and
    N(0, sigma_phi^2).  Each sensor consumes its own substream.
    """
    r = true_ranges(state.position, anchors)
    sigmas = np.sqrt(range_variance(r, range_model))
    ranges = r + streams.ranges.normal(0.0, 1.0, size=anchors.m) * sigmas
    speed = state.speed + streams.speed.normal(0.0, sensor_model.sigma_v)
    heading = state.heading + streams.heading.normal(0.0, sensor_model.sigma_phi)
    return MeasurementFrame(ranges=ranges, speed=speed, heading=heading, k=state.k)


# Eight anchors on the perimeter of a 4 m x 4 m cell (corners plus edge
# midpoints).  The exponential range-noise model makes anchors past ~6 m
# nearly uninformative, so a compact, surrounding constellation is what
# keeps the WLS fix usable; spacing is configurable everywhere.
DEFAULT_ANCHORS = AnchorSet(
    positions=np.array(
        [
            [0.0, 0.0],
            [2.0, 0.0],
            [4.0, 0.0],
            [0.0, 2.0],
            [4.0, 2.0],
            [0.0, 4.0],
            [2.0, 4.0],
            [4.0, 4.0],
        ]
    )
)
