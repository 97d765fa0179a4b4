"""Target log-density gradient oracles.

Every oracle accepts a single point of shape (D,) or a batch of particles of
shape (N, D) and returns an array of the same shape.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, logsumexp

from .errors import DataError, InvalidInputError, InvalidParameterError

__all__ = [
    "TargetModel",
    "gaussian_grad_log_p",
    "gaussian_log_p",
    "gaussian_target",
    "toy_bimodal_log_p",
    "toy_bimodal_grad_log_p",
    "toy_bimodal_target",
    "Dataset",
    "BlrModel",
    "blr_metrics",
    "load_dataset",
    "synthetic_logistic_data",
]


@dataclass
class TargetModel:
    dim: int
    grad_log_p: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    log_p: Callable[[np.ndarray], np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)


def _rows(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x, x.ndim == 1


def _check_spd(sigma):
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != sigma.shape[1] or not np.allclose(sigma, sigma.T):
        raise InvalidParameterError("covariance must be a symmetric square matrix")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise InvalidParameterError("covariance is not positive definite") from None
    return sigma, chol


def gaussian_grad_log_p(mu, sigma):
    """Score oracle ``x -> -Sigma^-1 (x - mu)`` of N(mu, Sigma)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma, _ = _check_spd(sigma)
    precision = np.linalg.inv(sigma)

    def grad(x):
        xs, single = _rows(x)
        g = -(xs - mu) @ precision
        return g[0] if single else g

    return grad


def gaussian_log_p(mu, sigma):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma, chol = _check_spd(sigma)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    dim = mu.shape[0]

    def log_p(x):
        xs, single = _rows(x)
        z = np.linalg.solve(chol, (xs - mu).T)
        lp = -0.5 * np.sum(z**2, axis=0) - 0.5 * (logdet + dim * np.log(2.0 * np.pi))
        return lp[0] if single else lp

    return log_p


def gaussian_target(mu, sigma) -> TargetModel:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    return TargetModel(
        dim=mu.shape[0],
        grad_log_p=gaussian_grad_log_p(mu, sigma),
        log_p=gaussian_log_p(mu, sigma),
        name="gaussian",
        metadata={"mean": mu, "cov": np.atleast_2d(np.asarray(sigma, dtype=float))},
    )


def toy_bimodal_log_p(z):
    """Unnormalized log density of the ring-shaped bimodal toy in R^2."""
    zs, single = _rows(z)
    z1 = zs[:, 0]
    r2 = np.sum(zs**2, axis=1)
    lp = -2.0 * (r2 - 3.0) ** 2 + logsumexp(
        np.stack([-2.0 * (z1 - 3.0) ** 2, -2.0 * (z1 + 3.0) ** 2]), axis=0
    )
    return lp[0] if single else lp


def toy_bimodal_grad_log_p(z):
    zs, single = _rows(z)
    z1 = zs[:, 0]
    r2 = np.sum(zs**2, axis=1)
    ring = -8.0 * (r2 - 3.0)
    a = -2.0 * (z1 - 3.0) ** 2
    b = -2.0 * (z1 + 3.0) ** 2
    # mixture weight of the +3 component, computed without overflow
    w_plus = expit(a - b)
    g = np.empty_like(zs)
    g[:, 0] = ring * z1 - 4.0 * (z1 - 3.0) * w_plus - 4.0 * (z1 + 3.0) * (1.0 - w_plus)
    g[:, 1] = ring * zs[:, 1]
    return g[0] if single else g


def toy_bimodal_target() -> TargetModel:
    return TargetModel(dim=2, grad_log_p=toy_bimodal_grad_log_p, log_p=toy_bimodal_log_p, name="toy_bimodal")


# ---------------------------------------------------------------------------
# Bayesian logistic regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.labels.shape[0]


@dataclass
class BlrModel:
    """Logistic regression with a Gaussian prior on ``w`` of precision ``alpha``
    and ``alpha ~ Gamma(a0, scale=b0)``.

    Particles are laid out as ``[w_1..w_d, log(alpha)]``.
    """

    features: np.ndarray
    labels: np.ndarray
    a0: float = 1.0
    b0: float = 100.0
    batch_size: int = 50

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise InvalidInputError("features must be (M, d) and labels (M,)")
        if self.a0 <= 0 or self.b0 <= 0:
            raise InvalidParameterError("Gamma prior parameters must be positive")
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size must be >= 1")

    @property
    def n_data(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.n_features + 1

    def _split(self, theta):
        ts, single = _rows(theta)
        if ts.shape[1] != self.dim:
            raise InvalidInputError(f"expected particles of dimension {self.dim}, got {ts.shape[1]}")
        return ts[:, :-1], ts[:, -1], single

    def _batch(self, batch_indices):
        if batch_indices is None:
            return self.features, self.labels
        idx = np.asarray(batch_indices, dtype=int)
        if idx.size == 0:
            raise InvalidInputError("batch must be nonempty")
        if idx.min() < 0 or idx.max() >= self.n_data:
            raise InvalidInputError(f"batch index out of range [0, {self.n_data})")
        return self.features[idx], self.labels[idx]

    def log_joint(self, theta, batch_indices=None):
        """Log joint density in ``(w, log alpha)`` coordinates, up to a constant."""
        w, zeta, single = self._split(theta)
        f, y = self._batch(batch_indices)
        logits = w @ f.T
        # y log s(z) + (1 - y) log(1 - s(z)) = y z - log(1 + e^z)
        ll = np.sum(y * logits - np.logaddexp(0.0, logits), axis=1) * (self.n_data / len(y))
        alpha = np.exp(zeta)
        d = self.n_features
        lp = (
            ll
            + 0.5 * d * zeta
            - 0.5 * alpha * np.sum(w**2, axis=1)
            + self.a0 * zeta
            - alpha / self.b0
        )
        return lp[0] if single else lp

    def grad_log_p(self, theta, batch_indices=None):
        w, zeta, single = self._split(theta)
        f, y = self._batch(batch_indices)
        scale = self.n_data / len(y)
        resid = y[None, :] - expit(w @ f.T)
        alpha = np.exp(zeta)
        g = np.empty((w.shape[0], self.dim))
        g[:, :-1] = scale * resid @ f - alpha[:, None] * w
        g[:, -1] = self.a0 + 0.5 * self.n_features - alpha * (1.0 / self.b0 + 0.5 * np.sum(w**2, axis=1))
        return g[0] if single else g

    def stochastic_oracle(self, rng: np.random.Generator):
        """Oracle drawing a fresh minibatch (without replacement) on every call."""
        if self.batch_size >= self.n_data:
            return self.grad_log_p

        def grad(theta):
            idx = rng.choice(self.n_data, size=self.batch_size, replace=False)
            return self.grad_log_p(theta, idx)

        return grad

    def sample_prior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        alpha = rng.gamma(self.a0, self.b0, size=n)
        w = rng.normal(size=(n, self.n_features)) / np.sqrt(alpha)[:, None]
        return np.column_stack([w, np.log(alpha)])

    def target(self, rng: np.random.Generator | None = None) -> TargetModel:
        grad = self.grad_log_p if rng is None else self.stochastic_oracle(rng)
        return TargetModel(dim=self.dim, grad_log_p=grad, log_p=self.log_joint, name="blr")


def blr_metrics(particles, test: Dataset) -> tuple[float, float]:
    """Posterior-predictive accuracy and mean log-likelihood on ``test``.

    Predictive probabilities are averaged over particles (not their weights).
    A probability of exactly 0.5 predicts label 1.
    """
    x = np.atleast_2d(np.asarray(particles, dtype=float))
    if len(test) == 0:
        raise InvalidInputError("test set is empty")
    w = x[:, :-1]
    if w.shape[1] != test.features.shape[1]:
        raise InvalidInputError("particle dimension does not match test features")
    logits = w @ test.features.T
    prob = expit(logits).mean(axis=0)
    y = test.labels
    pred = (prob >= 0.5).astype(float)
    acc = float(np.mean(pred == y))
    # log mean_p sigmoid(+-z), stable in the saturated regime
    signed = np.where(y[None, :] == 1.0, logits, -logits)
    log_prob = logsumexp(-np.logaddexp(0.0, -signed), axis=0) - np.log(x.shape[0])
    return acc, float(np.mean(log_prob))


def load_dataset(path, split_seed: int = 0, train_fraction: float = 0.8, skip_header: bool = False):
    """Read a CSV whose final column is a 0/1 label; return ``(train, test)``.

    A constant bias feature 1.0 is appended to every row.  The split is a
    seeded permutation, so the same seed always yields the same partition.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise InvalidParameterError("train_fraction must be in (0, 1]")
    rows, labels = [], []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            lineno = reader.line_num
            if skip_header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise DataError(f"line {lineno}: need at least one feature and a label", line=lineno)
            if len(row) != width:
                raise DataError(f"line {lineno}: expected {width} fields, got {len(row)}", line=lineno)
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric field", line=lineno) from None
            if values[-1] not in (0.0, 1.0):
                raise DataError(f"line {lineno}: label {row[-1].strip()!r} is not 0 or 1", line=lineno)
            rows.append(values[:-1])
            labels.append(values[-1])
    if not rows:
        raise DataError(f"{path}: no data rows")
    features = np.asarray(rows)
    features = np.column_stack([features, np.ones(len(rows))])
    labels = np.asarray(labels)
    perm = np.random.default_rng(split_seed).permutation(len(labels))
    n_train = int(round(train_fraction * len(labels)))
    tr, te = perm[:n_train], perm[n_train:]
    return Dataset(features[tr], labels[tr]), Dataset(features[te], labels[te])


def synthetic_logistic_data(n: int, d: int, rng: np.random.Generator, scale: float = 1.0):
    """Logistic data from a random ground-truth weight vector.

    Returns ``(features, labels, w_true)``; features are standard normal and
    include no bias column.
    """
    w_true = rng.normal(scale=scale, size=d)
    features = rng.normal(size=(n, d))
    labels = (rng.random(n) < expit(features @ w_true)).astype(float)
    return features, labels, w_true
