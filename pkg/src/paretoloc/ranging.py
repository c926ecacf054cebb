"""Weighted least-squares trilateration from differenced squared ranges.

Squaring the range equations and subtracting the last anchor's equation
linearises the problem: with s_l the l-th anchor and x the unknown
position,

    2 (s_l - s_M)^T x = a_l - (r_l^2 - r_M^2),      l = 1..M-1,
    a_l = ||s_l||^2 - ||s_M||^2.

The noise entering the right-hand side is a quadratic function of the
raw range noise, so it is biased and correlated across rows; the helpers
here provide its exact inverse covariance (rank-one update in closed
form), the induced estimator bias, and the estimator error correlation.
All second-order quantities assume independent zero-mean Gaussian range
noise with per-anchor variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import AnchorSet


@dataclass(slots=True)
class RangingGeometry:
    """Linearised trilateration geometry for a fixed anchor set.

    Attributes
    ----------
    design_matrix : np.ndarray
        A, shape (M-1, 2), rows 2 * (s_l - s_M).
    offset_vector : np.ndarray
        a, shape (M-1,), entries ||s_l||^2 - ||s_M||^2.
    """

    design_matrix: np.ndarray
    offset_vector: np.ndarray


@dataclass(slots=True)
class RangingErrorMoments:
    """First and second moments of the WLS position error.

    Attributes
    ----------
    mean : np.ndarray
        Estimator bias (2,): E{x_hat - x}.
    correlation : np.ndarray
        Raw error correlation (2, 2): E{(x_hat - x)(x_hat - x)^T}.
    link_variances : np.ndarray
        Per-anchor range-noise variances (M,) the moments were built from.
    """

    mean: np.ndarray
    correlation: np.ndarray
    link_variances: np.ndarray

    def variance(self) -> np.ndarray:
        """Per-axis variances (2,): diag(correlation) - mean^2."""
        return np.diag(self.correlation) - self.mean**2


def build_geometry(anchors: AnchorSet) -> RangingGeometry:
    """Design matrix and offset vector for an anchor set.

    The last anchor is the differencing reference.

    Raises
    ------
    ValueError
        If the design matrix is rank deficient (collinear anchors).
    """
    s = anchors.positions
    a_mat = 2.0 * (s[:-1] - s[-1])
    if np.linalg.matrix_rank(a_mat) < 2:
        raise ValueError("design matrix is rank deficient (collinear anchors)")
    offset = np.sum(s[:-1] ** 2, axis=1) - np.sum(s[-1] ** 2)
    return RangingGeometry(design_matrix=a_mat, offset_vector=offset)


def noise_cov_inverse(ranges, variances) -> np.ndarray:
    """Inverse covariance of the differenced squared-range noise.

    The noise vector has entries
    w_l = w_M^2 + 2 r_M w_M - w_l^2 - 2 r_l w_l with w_i ~ N(0, sigma_i^2),
    so its covariance is D + p 11^T where D_ll = 4 r_l^2 sigma_l^2
    + 2 sigma_l^4 and p = 4 r_M^2 sigma_M^2 + 2 sigma_M^4.  The rank-one
    structure inverts in closed form:

        (D + p 11^T)^{-1} = (I - G 11^T / (1 + q)) D^{-1},
        G = p D^{-1},  q = sum_l p / D_ll.

    Parameters
    ----------
    ranges : array_like
        Ranges (M,) the weights are evaluated at (true ranges in analysis,
        estimated ranges online).
    variances : array_like
        Per-anchor range-noise variances (M,).

    Returns
    -------
    np.ndarray
        W = R^{-1}, shape (M-1, M-1).
    """
    r = np.asarray(ranges, dtype=float)
    var = np.asarray(variances, dtype=float)
    if r.shape != var.shape or r.ndim != 1:
        raise ValueError("ranges and variances must be 1-D with equal length")
    if np.any(var <= 0.0):
        raise ValueError("variances must be positive")
    d = 4.0 * r[:-1] ** 2 * var[:-1] + 2.0 * var[:-1] ** 2
    p = 4.0 * r[-1] ** 2 * var[-1] + 2.0 * var[-1] ** 2
    d_inv = 1.0 / d
    g = p * d_inv
    q = float(np.sum(g))
    return (np.eye(d.size) - np.outer(g, np.ones(d.size)) / (1.0 + q)) @ np.diag(d_inv)


def wls_estimate(
    geometry: RangingGeometry, measured_ranges, weight: np.ndarray
) -> np.ndarray:
    """Weighted least-squares position estimate from measured ranges.

    Solves (A^T W A) x = A^T W b with b_l = r_M^2 - r_l^2 + a_l built
    from the *measured* ranges.

    Raises
    ------
    np.linalg.LinAlgError
        If A^T W A is singular.
    """
    r = np.asarray(measured_ranges, dtype=float)
    a_mat = geometry.design_matrix
    b = r[-1] ** 2 - r[:-1] ** 2 + geometry.offset_vector
    atw = a_mat.T @ weight
    return np.linalg.solve(atw @ a_mat, atw @ b)


def ranging_bias(geometry: RangingGeometry, weight: np.ndarray, variances) -> np.ndarray:
    """Closed-form WLS estimator bias (2,).

    The differenced squared-range noise has mean sigma_M^2 - sigma_l^2 in
    row l, which the linear solve maps to
    (A^T W A)^{-1} A^T W (1 sigma_M^2 - [sigma_1^2 .. sigma_{M-1}^2]^T).
    """
    var = np.asarray(variances, dtype=float)
    a_mat = geometry.design_matrix
    atw = a_mat.T @ weight
    mean_vec = var[-1] - var[:-1]
    return np.linalg.solve(atw @ a_mat, atw @ mean_vec)


def noise_raw_second_moment(ranges, variances) -> np.ndarray:
    """Raw second moment E{b b^T} of the differenced squared-range noise.

    Entries, with r/sigma^2 the per-anchor ranges and variances and M the
    reference index:

        C_ll = 3 sigma_M^4 + 4 r_M^2 sigma_M^2 + 3 sigma_l^4
               + 4 r_l^2 sigma_l^2 - 2 sigma_M^2 sigma_l^2,
        C_lj = 3 sigma_M^4 - sigma_M^2 sigma_j^2 + 4 r_M^2 sigma_M^2
               - sigma_l^2 sigma_M^2 + sigma_l^2 sigma_j^2,   l != j.

    The off-diagonal expression is already symmetric in (l, j); the
    result is symmetrised anyway to keep downstream eigensolvers happy.
    """
    r = np.asarray(ranges, dtype=float)
    var = np.asarray(variances, dtype=float)
    vm = var[-1]
    rm = r[-1]
    v = var[:-1]
    n = v.size
    common = 3.0 * vm**2 + 4.0 * rm**2 * vm
    c = common - vm * v[None, :] - v[:, None] * vm + v[:, None] * v[None, :]
    diag = common + 3.0 * v**2 + 4.0 * r[:-1] ** 2 * v - 2.0 * vm * v
    c[np.arange(n), np.arange(n)] = diag
    return 0.5 * (c + c.T)


def ranging_second_moment(
    geometry: RangingGeometry, weight: np.ndarray, ranges, variances
) -> np.ndarray:
    """Raw correlation E{w w^T} (2, 2) of the WLS position error.

    Maps the noise second moment through the WLS solve:
    (A^T W A)^{-1} A^T W C W^T A (A^T W A)^{-1}.
    """
    a_mat = geometry.design_matrix
    c = noise_raw_second_moment(ranges, variances)
    atw = a_mat.T @ weight
    gram = atw @ a_mat
    left = np.linalg.solve(gram, atw)
    corr = left @ c @ left.T
    return 0.5 * (corr + corr.T)


def ranging_error_moments(
    geometry: RangingGeometry, ranges, variances
) -> RangingErrorMoments:
    """Bias and raw correlation of the WLS error for given ranges/variances.

    Builds the weight matrix internally from the same ranges and
    variances, which is the configuration every closed-form expression
    here assumes.
    """
    w = noise_cov_inverse(ranges, variances)
    return RangingErrorMoments(
        mean=ranging_bias(geometry, w, variances),
        correlation=ranging_second_moment(geometry, w, ranges, variances),
        link_variances=np.asarray(variances, dtype=float).copy(),
    )
