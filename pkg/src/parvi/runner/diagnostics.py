"""Convergence and shape diagnostics for particle ensembles."""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from ..errors import InvalidInputError, InvalidParameterError

COV_JITTER = 1e-8


def _sqrtm_psd(a):
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def gaussian_w2_proxy(particles, mean, cov, return_flag: bool = False):
    """Bures-Wasserstein distance from the ensemble's moment-matched Gaussian to N(mean, cov).

    ``sqrt(||m - mean||^2 + tr(S + cov - 2 (cov^1/2 S cov^1/2)^1/2))`` with
    ``m, S`` the empirical mean and covariance.  A singular ``S`` gets
    ``COV_JITTER * I`` added; ``return_flag=True`` also reports whether that
    happened.
    """
    x = np.atleast_2d(np.asarray(particles, dtype=float))
    n, d = x.shape
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if mean.shape != (d,) or cov.shape != (d, d):
        raise InvalidInputError("target mean/covariance do not match the particle dimension")
    if n <= d:
        raise InvalidInputError(f"need more particles than dimensions (N={n}, D={d})")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise InvalidParameterError("target covariance is not positive definite") from None
    m = x.mean(axis=0)
    S = np.cov(x, rowvar=False).reshape(d, d)
    jittered = False
    if np.linalg.matrix_rank(S) < d:
        S = S + COV_JITTER * np.eye(d)
        jittered = True
    root = _sqrtm_psd(cov)
    cross = _sqrtm_psd(root @ S @ root)
    w2sq = float(np.sum((m - mean) ** 2) + np.trace(S) + np.trace(cov) - 2.0 * np.trace(cross))
    w2 = float(np.sqrt(max(w2sq, 0.0)))
    return (w2, jittered) if return_flag else w2


def gaussian_w2_proxy_reference(particles, mean, cov):
    """Independent evaluation through ``scipy.linalg.sqrtm`` (for tests)."""
    x = np.atleast_2d(np.asarray(particles, dtype=float))
    m = x.mean(axis=0)
    S = np.atleast_2d(np.cov(x, rowvar=False))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    s_half = scipy.linalg.sqrtm(S).real
    cross = scipy.linalg.sqrtm(s_half @ cov @ s_half).real
    val = np.sum((m - mean) ** 2) + np.trace(S + cov - 2.0 * cross)
    return float(np.sqrt(max(val, 0.0)))


def mode_balance(particles) -> float:
    """Fraction of particles with first coordinate >= 0."""
    x = np.asarray(particles, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    return float(np.mean(x[:, 0] >= 0.0))


def mean_nn_distance(particles) -> float:
    """Mean Euclidean distance from each particle to its nearest neighbour."""
    x = np.asarray(particles, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    if x.shape[0] < 2:
        raise InvalidInputError("nearest-neighbour distance needs at least two particles")
    dist, _ = cKDTree(x).query(x, k=2)
    return float(dist[:, 1].mean())
