"""Finite-particle Riemannian primitives on Wasserstein space (Euclidean support).

With particles of ``q`` and ``r`` paired index-by-index and pairwise close,
the exponential map is a per-particle Euler step, the inverse exponential map
is the per-particle displacement, and parallel transport carries each row of
a velocity matrix unchanged from ``x_i`` to ``y_i``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .kernel import as_particles

__all__ = [
    "PairwiseCloseWarning",
    "PairedEnsembles",
    "exp_map",
    "inverse_exp",
    "parallel_transport",
]


class PairwiseCloseWarning(UserWarning):
    """Paired ensembles are not pairwise close; the particle approximations may be poor."""


def _nn_distance(x):
    if x.shape[0] < 2:
        return np.inf
    sq = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(sq, np.inf)
    return float(np.sqrt(sq.min()))


@dataclass(frozen=True)
class PairedEnsembles:
    """Two ensembles paired by index: ``source[i] <-> dest[i]``."""

    source: np.ndarray
    dest: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        src = as_particles(self.source)
        dst = as_particles(self.dest)
        if src.shape != dst.shape:
            raise InvalidInputError(f"paired ensembles differ in shape: {src.shape} vs {dst.shape}")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "dest", dst)

    def max_displacement(self) -> float:
        return float(np.max(np.linalg.norm(self.dest - self.source, axis=1)))

    def is_pairwise_close(self) -> bool:
        """``max_i |y_i - x_i| <= c * min(nn spacing of source, nn spacing of dest)``."""
        spacing = min(_nn_distance(self.source), _nn_distance(self.dest))
        return self.max_displacement() <= self.threshold * spacing


def exp_map(particles, field, eps: float = 1.0) -> np.ndarray:
    """Push particles along ``field``: ``x_i + eps * v_i``."""
    x = as_particles(particles)
    v = np.asarray(field, dtype=float)
    if v.shape != x.shape:
        raise InvalidInputError(f"field shape {np.shape(field)} does not match particles {x.shape}")
    if not eps > 0:
        raise InvalidParameterError(f"step must be positive, got {eps}")
    return x + eps * v


def inverse_exp(pair: PairedEnsembles) -> np.ndarray:
    """Velocity matrix taking ``source`` to ``dest`` in unit time."""
    if not pair.is_pairwise_close():
        warnings.warn(
            f"ensembles are not pairwise close (max displacement {pair.max_displacement():.3g}); "
            "the displacement field is only a rough inverse exponential map",
            PairwiseCloseWarning,
            stacklevel=2,
        )
    return pair.dest - pair.source


def parallel_transport(field, pair: PairedEnsembles) -> np.ndarray:
    """Carry a velocity matrix from ``pair.source`` to ``pair.dest``.

    Row ``i`` of the result is the velocity at ``dest[i]``; it equals row
    ``i`` of ``field``.
    """
    v = np.asarray(field, dtype=float)
    if v.shape != pair.source.shape:
        raise InvalidInputError(f"field shape {v.shape} does not match ensemble {pair.source.shape}")
    return v.copy()
