"""Gaussian kernel, kernel matrices and bandwidth selection.

One convention is used throughout the package::

    K_h(x, y) = (2 pi h)^(-D/2) exp(-||x - y||^2 / (2 h))

so ``h`` is the variance of the Gaussian, not its standard deviation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEnsembleError, InvalidInputError, InvalidParameterError

__all__ = [
    "BandwidthPolicy",
    "KernelConfig",
    "KernelMatrices",
    "eval_kernel",
    "pairwise_differences",
    "kernel_matrices",
    "median_bandwidth",
    "he_objective",
    "select_bandwidth_he",
]


class BandwidthPolicy(str, enum.Enum):
    FIXED = "fixed"
    MEDIAN = "median"
    HE = "he"


@dataclass
class KernelConfig:
    """Bandwidth state and the policy used to update it between iterations."""

    bandwidth: float = 1.0
    policy: BandwidthPolicy = BandwidthPolicy.MEDIAN
    he_trust_ratio: float = 2.0
    he_probe_delta: float = 0.1

    def __post_init__(self):
        self.policy = BandwidthPolicy(self.policy)
        _check_bandwidth(self.bandwidth)
        if not self.he_trust_ratio > 1.0:
            raise InvalidParameterError(f"he_trust_ratio must be > 1, got {self.he_trust_ratio}")
        if not 0.0 < self.he_probe_delta < 1.0:
            raise InvalidParameterError(f"he_probe_delta must be in (0, 1), got {self.he_probe_delta}")

    def update(self, particles):
        """Refresh ``bandwidth`` for the current ensemble and return it."""
        if self.policy is BandwidthPolicy.MEDIAN:
            self.bandwidth = median_bandwidth(particles)
        elif self.policy is BandwidthPolicy.HE:
            self.bandwidth = select_bandwidth_he(particles, self.bandwidth, self)
        return self.bandwidth


@dataclass(frozen=True)
class KernelMatrices:
    """Gram matrix ``K`` (N x N) and ``K_prime`` (D x N).

    Column ``i`` of ``K_prime`` is ``sum_j grad_{x_j} K(x_j, x_i)``.
    """

    K: np.ndarray
    K_prime: np.ndarray


def _check_bandwidth(h):
    if not (np.isfinite(h) and h > 0):
        raise InvalidParameterError(f"bandwidth must be a positive finite number, got {h!r}")


def as_particles(particles) -> np.ndarray:
    """Validate and return an (N, D) float array."""
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InvalidInputError(f"particles must have shape (N, D) with N, D >= 1, got {x.shape}")
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.isfinite(x))[0, 0]
        raise InvalidInputError(f"particle {bad} has non-finite coordinates")
    return x


def eval_kernel(x, y, h: float) -> float:
    _check_bandwidth(h)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = x.shape[0]
    r = np.sum((x - y) ** 2) / (2.0 * h)
    return float((2.0 * math.pi * h) ** (-d / 2.0) * math.exp(-r))


def pairwise_differences(x: np.ndarray):
    """Return ``diff[i, j] = x_i - x_j`` and the squared norms ``sq[i, j]``."""
    diff = x[:, None, :] - x[None, :, :]
    sq = np.einsum("ijd,ijd->ij", diff, diff)
    return diff, sq


def kernel_matrices(particles, h: float) -> KernelMatrices:
    _check_bandwidth(h)
    x = as_particles(particles)
    dim = x.shape[1]
    diff, sq = pairwise_differences(x)
    K = (2.0 * math.pi * h) ** (-dim / 2.0) * np.exp(-sq / (2.0 * h))
    # grad_{x_j} K(x_j, x_i) = (x_i - x_j) / h * K_ji
    K_prime = np.einsum("ji,ijd->di", K, diff) / h
    return KernelMatrices(K=K, K_prime=K_prime)


def median_bandwidth(particles) -> float:
    """Median heuristic mapped to the ``1/(2h)`` exponent convention.

    ``h = median(||x_i - x_j||^2, i < j) / (2 log(N + 1))``
    """
    x = as_particles(particles)
    n = x.shape[0]
    if n < 2:
        raise DegenerateEnsembleError("median bandwidth needs at least two particles")
    _, sq = pairwise_differences(x)
    med = float(np.median(sq[np.triu_indices(n, k=1)]))
    if med <= 0.0:
        if not np.any(sq > 0):
            raise DegenerateEnsembleError("all particles coincide; median bandwidth undefined")
        # more than half the pairs coincide: fall back to the smallest positive distance
        med = float(np.min(sq[sq > 0]))
    return med / (2.0 * math.log(n + 1.0))


def he_objective(particles, h: float) -> tuple[float, float]:
    """Heat-equation bandwidth objective ``J(h)`` and its derivative ``dJ/dh``.

    ``J = sum_k g_k(h)^2`` where ``g_k`` measures, at particle ``k``, the
    mismatch between the smoothed-density particle dynamics and the heat
    equation.  The constant factor ``(2 pi)^(D/2)`` is dropped.
    """
    _check_bandwidth(h)
    x = as_particles(particles)
    dim = x.shape[1]
    # d[i, j] = x_i - x_j
    d, sq = pairwise_differences(x)
    e = np.exp(-sq / (2.0 * h) - 0.5 * dim * math.log(h))

    S = e.sum(axis=0)  # S_j = sum_i e_ij
    V = np.einsum("ij,ijd->jd", e, d)  # V_j = sum_i e_ij d_ij
    W = np.einsum("ij,ijd->jd", e * sq, d)  # sum_i e_ij ||d_ij||^2 d_ij
    Q = (e * sq).sum(axis=0)  # sum_i e_ij ||d_ij||^2

    # P[j, k] = d_jk . V_j and R[j, k] = d_jk . W_j
    P = np.einsum("jkd,jd->jk", d, V)
    R = np.einsum("jkd,jd->jk", d, W)
    eP_S = e * P / S[:, None]

    g = (e * sq).sum(axis=0) - h * dim * e.sum(axis=0) - eP_S.sum(axis=0)

    inv2h2 = 0.5 / h**2
    dg = (
        inv2h2 * (e * sq**2).sum(axis=0)
        - (dim / h) * (e * sq).sum(axis=0)
        + (0.5 * dim**2 - dim) * e.sum(axis=0)
        - inv2h2 * (e * R / S[:, None]).sum(axis=0)
        - inv2h2 * (eP_S * sq).sum(axis=0)
        + inv2h2 * (eP_S * (Q / S)[:, None]).sum(axis=0)
        + (0.5 * dim / h) * eP_S.sum(axis=0)
    )
    return float(np.sum(g**2)), float(2.0 * np.sum(g * dg))


def _scaled_he_objective(x, h):
    """``h^(D-2) * J`` and its derivative in ``log h``; scale free under ``(x, h) -> (c x, c^2 h)``."""
    dim = x.shape[1]
    j, dj = he_objective(x, h)
    w = h ** (dim - 2.0)
    return w * j, w * (h * dj + (dim - 2.0) * j)


def select_bandwidth_he(particles, h_prev: float, cfg: KernelConfig | None = None) -> float:
    """One quadratic-interpolation step on the HE objective in ``u = log h``.

    The objective minimized is ``h^(D-2) J(h)``, which equals ``J`` for
    ``D = 2`` and is invariant to rescaling the particles in any dimension.
    The quadratic matches its value and slope at ``h_prev`` and its value at
    a probe ``h_prev * (1 + delta)``.  The minimizer is clipped to
    ``[h_prev / rho, h_prev * rho]`` and accepted only if it lowers the
    objective; otherwise ``h_prev`` is returned.
    """
    if cfg is None:
        cfg = KernelConfig(bandwidth=h_prev, policy=BandwidthPolicy.HE)
    _check_bandwidth(h_prev)
    rho, delta = cfg.he_trust_ratio, cfg.he_probe_delta
    x = as_particles(particles)
    step = math.log1p(delta)
    with np.errstate(all="ignore"):
        j0, slope = _scaled_he_objective(x, h_prev)
        j1, _ = _scaled_he_objective(x, h_prev * (1.0 + delta))
        curv = (j1 - j0 - slope * step) / step**2
        if not all(np.isfinite(v) for v in (j0, j1, slope, curv)) or curv <= 0.0:
            return h_prev
        du = float(np.clip(-slope / (2.0 * curv), -math.log(rho), math.log(rho)))
        if du == 0.0:
            return h_prev
        h_new = h_prev * math.exp(du)
        if not (np.isfinite(h_new) and h_new > 0):
            return h_prev
        j_new, _ = _scaled_he_objective(x, h_new)
    if not (np.isfinite(j_new) and j_new < j0):
        return h_prev
    return h_new
