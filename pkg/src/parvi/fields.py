"""ParVI vector-field estimators.

Each estimator approximates the gradient-flow field ``grad log p - grad log q``
at the particles and returns an (N, D) velocity matrix, row ``i`` being the
velocity of particle ``i``.  ``grad_log_p`` maps an (N, D) array to an (N, D)
array of target scores.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .errors import InvalidParameterError, LinearSolveError, NonFiniteError
from .kernel import _check_bandwidth, as_particles, kernel_matrices, pairwise_differences

__all__ = [
    "ESTIMATORS",
    "target_scores",
    "svgd_field",
    "blob_field",
    "gfsd_field",
    "gfsf_field",
    "default_gfsf_reg",
    "make_field",
]


def target_scores(grad_log_p, x: np.ndarray) -> np.ndarray:
    """Evaluate the oracle on all particles and check the result."""
    g = np.asarray(grad_log_p(x), dtype=float)
    if g.shape != x.shape:
        raise NonFiniteError(f"grad_log_p returned shape {g.shape}, expected {x.shape}")
    if not np.all(np.isfinite(g)):
        bad = int(np.argwhere(~np.isfinite(g))[0, 0])
        raise NonFiniteError(f"grad_log_p is non-finite at particle {bad}", index=bad)
    return g


def _gaussian_terms(x, h):
    """Kernel matrix ``K`` and ``G[i, j] = grad_{x_i} K(x_i, x_j)``."""
    dim = x.shape[1]
    diff, sq = pairwise_differences(x)
    K = (2.0 * math.pi * h) ** (-dim / 2.0) * np.exp(-sq / (2.0 * h))
    G = -diff * (K / h)[:, :, None]
    return K, G


def svgd_field(particles, grad_log_p, h: float) -> np.ndarray:
    """``(1/N) sum_j [K(x_j, x_i) grad log p(x_j) + grad_{x_j} K(x_j, x_i)]``."""
    _check_bandwidth(h)
    x = as_particles(particles)
    g = target_scores(grad_log_p, x)
    km = kernel_matrices(x, h)
    return (km.K.T @ g + km.K_prime.T) / x.shape[0]


def gfsd_field(particles, grad_log_p, h: float) -> np.ndarray:
    """``grad log p - grad log (q_hat * K)`` at the particles."""
    _check_bandwidth(h)
    x = as_particles(particles)
    g = target_scores(grad_log_p, x)
    K, G = _gaussian_terms(x, h)
    return g - G.sum(axis=1) / K.sum(axis=1)[:, None]


def blob_field(particles, grad_log_p, h: float) -> np.ndarray:
    """Blob field: ``gfsd`` plus ``- sum_j grad_{x_i} K_ij / sum_k K_jk``."""
    _check_bandwidth(h)
    x = as_particles(particles)
    g = target_scores(grad_log_p, x)
    K, G = _gaussian_terms(x, h)
    row_sums = K.sum(axis=1)
    return g - G.sum(axis=1) / row_sums[:, None] - np.einsum("ijd,j->id", G, 1.0 / row_sums)


def default_gfsf_reg(h: float, dim: int, rel: float = 1e-5) -> float:
    """Ridge scaled to the kernel diagonal ``(2 pi h)^(-D/2)``."""
    return rel * (2.0 * math.pi * h) ** (-dim / 2.0)


def gfsf_field(particles, grad_log_p, h: float, reg: float | None = None) -> np.ndarray:
    """``grad log p + K'(K + reg I)^-1`` in row layout.

    ``reg`` defaults to :func:`default_gfsf_reg`.  Coincident particles make
    ``K`` singular; they raise :class:`LinearSolveError` whatever ``reg`` is,
    rather than being jittered away.
    """
    _check_bandwidth(h)
    x = as_particles(particles)
    if reg is None:
        reg = default_gfsf_reg(h, x.shape[1])
    if not (np.isfinite(reg) and reg >= 0):
        raise InvalidParameterError(f"GFSF regularization must be >= 0, got {reg!r}")
    g = target_scores(grad_log_p, x)
    km = kernel_matrices(x, h)
    n = x.shape[0]
    off_diag = km.K[~np.eye(n, dtype=bool)]
    if n > 1 and np.any(off_diag == km.K[0, 0]):
        i, j = np.argwhere((km.K == km.K[0, 0]) & ~np.eye(n, dtype=bool))[0]
        raise LinearSolveError(
            f"particles {i} and {j} coincide, so the kernel matrix is singular; "
            "jitter duplicate particles or increase the GFSF regularization"
        )
    A = km.K + reg * np.eye(n)
    try:
        c, lower = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveError(
            "kernel matrix (K + reg*I) is not positive definite; "
            "increase the GFSF regularization or jitter duplicate particles"
        ) from exc
    pivots = np.diag(c)
    if pivots.min() ** 2 < 1e-14 * pivots.max() ** 2:
        raise LinearSolveError(
            "kernel matrix (K + reg*I) is numerically singular; "
            "increase the GFSF regularization or jitter duplicate particles"
        )
    # u = K' A^-1 (D x N); A symmetric so u^T = A^-1 K'^T
    u = scipy.linalg.cho_solve((c, lower), km.K_prime.T)
    return g + u


ESTIMATORS = {
    "svgd": svgd_field,
    "blob": blob_field,
    "gfsd": gfsd_field,
    "gfsf": gfsf_field,
}


def make_field(name: str, grad_log_p, reg: float | None = None, reg_relative: bool = True):
    """Bind an estimator to a target; returns ``field(x, h) -> (N, D)``."""
    try:
        fn = ESTIMATORS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATORS)}") from None
    if name != "gfsf":
        return lambda x, h: fn(x, grad_log_p, h)

    def field(x, h):
        if reg is None:
            gamma = None
        elif reg_relative:
            gamma = default_gfsf_reg(h, np.shape(x)[1], rel=reg)
        else:
            gamma = reg
        return gfsf_field(x, grad_log_p, h, gamma)

    return field
