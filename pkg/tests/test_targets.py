import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from parvi.errors import DataError, InvalidInputError, InvalidParameterError
from parvi.targets import (
    BlrModel,
    Dataset,
    blr_metrics,
    gaussian_grad_log_p,
    gaussian_log_p,
    load_dataset,
    synthetic_logistic_data,
    toy_bimodal_grad_log_p,
    toy_bimodal_log_p,
)


def fd_gradient(f, x, step=1e-6):
    g = np.zeros_like(x)
    for d in range(x.shape[0]):
        e = np.zeros_like(x)
        e[d] = step
        g[d] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def random_spd(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + dim * np.eye(dim)


@pytest.fixture
def separable():
    # four points with bias column; label is the sign of the first feature
    f = np.array([[2.0, 1.0], [1.0, 1.0], [-1.0, 1.0], [-2.0, 1.0]])
    return BlrModel(f, np.array([1.0, 1.0, 0.0, 0.0]), batch_size=2)


def test_gaussian_score_basics():
    mu = np.array([1.0, -2.0])
    grad = gaussian_grad_log_p(mu, np.eye(2))
    assert_array_equal(grad(mu), 0.0)
    std = gaussian_grad_log_p(np.zeros(3), np.eye(3))
    x = np.array([[0.5, -1.0, 2.0], [1.0, 1.0, 1.0]])
    assert_allclose(std(x), -x)


def test_gaussian_score_matches_finite_differences():
    rng = np.random.default_rng(0)
    mu = rng.normal(size=4)
    sigma = random_spd(rng, 4)
    grad, logp = gaussian_grad_log_p(mu, sigma), gaussian_log_p(mu, sigma)
    for _ in range(20):
        x = mu + rng.normal(size=4)
        assert_allclose(grad(x), fd_gradient(logp, x), rtol=1e-5, atol=1e-8)


def test_gaussian_log_p_normalized():
    assert gaussian_log_p(np.zeros(1), np.eye(1))(np.zeros(1)) == pytest.approx(-0.5 * math.log(2 * math.pi))


@pytest.mark.parametrize("sigma", [np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([[1.0, 0.5], [0.0, 1.0]])])
def test_gaussian_rejects_non_spd(sigma):
    with pytest.raises(InvalidParameterError):
        gaussian_grad_log_p(np.zeros(2), sigma)


def test_toy_gradient_hand_values():
    assert_allclose(toy_bimodal_grad_log_p(np.array([0.0, 0.0])), [0.0, 0.0], atol=1e-12)
    assert toy_bimodal_grad_log_p(np.array([0.0, 1.0]))[1] == pytest.approx(16.0)


def test_toy_gradient_matches_finite_differences_on_grid():
    for a, b in itertools.product(np.linspace(-4, 4, 5), repeat=2):
        z = np.array([a, b])
        assert_allclose(toy_bimodal_grad_log_p(z), fd_gradient(toy_bimodal_log_p, z), rtol=1e-5, atol=1e-5)


def test_toy_gradient_parity():
    rng = np.random.default_rng(1)
    z = rng.uniform(-4, 4, size=(20, 2))
    g = toy_bimodal_grad_log_p(z)
    flipped = toy_bimodal_grad_log_p(z * [-1.0, 1.0])
    assert_allclose(flipped, g * [-1.0, 1.0], atol=1e-12)
    assert_allclose(toy_bimodal_log_p(z * [-1.0, 1.0]), toy_bimodal_log_p(z))


def test_toy_gradient_stable_far_out():
    g = toy_bimodal_grad_log_p(np.array([[40.0, 0.0], [-40.0, 3.0]]))
    assert np.all(np.isfinite(g))


def test_blr_gradient_matches_finite_differences(separable):
    rng = np.random.default_rng(2)
    for _ in range(20):
        theta = np.concatenate([rng.normal(size=2), [rng.normal(scale=0.5)]])
        assert_allclose(separable.grad_log_p(theta), fd_gradient(separable.log_joint, theta), rtol=1e-5, atol=1e-6)


def test_blr_gradient_matches_finite_differences_synthetic():
    rng = np.random.default_rng(3)
    f, y, _ = synthetic_logistic_data(30, 3, rng)
    model = BlrModel(f, y)
    for _ in range(20):
        theta = np.concatenate([rng.normal(size=3), [rng.normal(scale=0.5)]])
        assert_allclose(model.grad_log_p(theta), fd_gradient(model.log_joint, theta), rtol=1e-5, atol=1e-6)


def test_blr_minibatch_is_unbiased(separable):
    theta = np.array([[0.3, -0.2, 0.1], [-1.0, 0.5, -0.4]])
    full = separable.grad_log_p(theta)
    batches = list(itertools.combinations(range(4), 2))
    mean = sum(separable.grad_log_p(theta, list(b)) for b in batches) / len(batches)
    assert_allclose(mean, full, rtol=1e-14, atol=1e-14)


def test_blr_minibatch_unbiased_six_points():
    rng = np.random.default_rng(4)
    f, y, _ = synthetic_logistic_data(6, 2, rng)
    model = BlrModel(f, y)
    theta = rng.normal(size=(3, 3))
    batches = list(itertools.combinations(range(6), 3))
    mean = sum(model.grad_log_p(theta, list(b)) for b in batches) / len(batches)
    assert_allclose(mean, model.grad_log_p(theta), rtol=1e-12, atol=1e-12)


def test_blr_likelihood_part_at_zero_weights(separable):
    theta = np.array([0.0, 0.0, 0.0])
    g = separable.grad_log_p(theta, [0, 2])
    f, y = separable.features[[0, 2]], separable.labels[[0, 2]]
    assert_allclose(g[:2], (y - 0.5) @ f * 2.0)
    # alpha = 1: a0 + d/2 - 1/b0
    assert g[2] == pytest.approx(1.0 + 1.0 - 0.01)


@pytest.mark.parametrize("idx", [[4], [-1], []])
def test_blr_rejects_bad_batch(separable, idx):
    with pytest.raises(InvalidInputError):
        separable.grad_log_p(np.zeros(3), idx)


def test_blr_stochastic_oracle_is_seeded(separable):
    theta = np.array([[0.5, 0.1, 0.0]])
    a = separable.stochastic_oracle(np.random.default_rng(0))
    b = separable.stochastic_oracle(np.random.default_rng(0))
    assert_array_equal(a(theta), b(theta))


def test_blr_prior_sample_layout(separable):
    x = separable.sample_prior(500, np.random.default_rng(5))
    assert x.shape == (500, 3)
    # alpha ~ Gamma(1, scale 100) has mean 100
    assert 70 < np.mean(np.exp(x[:, -1])) < 130


def test_blr_metrics_zero_weights():
    test = Dataset(np.array([[1.0, 1.0], [2.0, 1.0], [3.0, 1.0]]), np.array([1.0, 0.0, 1.0]))
    acc, ll = blr_metrics(np.zeros((1, 3)), test)
    assert acc == pytest.approx(2.0 / 3.0)  # ties predict 1
    assert ll == pytest.approx(math.log(0.5))


def test_blr_metrics_saturated_separator(separable):
    test = Dataset(separable.features, separable.labels)
    acc, ll = blr_metrics(np.array([[200.0, 0.0, 0.0]]), test)
    assert acc == 1.0
    assert -1e-12 < ll <= 0.0


def test_blr_metrics_average_probabilities_not_logits():
    test = Dataset(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))
    acc, ll = blr_metrics(np.array([[2.0, 0.0], [-1.0, 0.0]]), test)
    assert acc == 1.0
    assert ll == pytest.approx(-0.553612655913649, rel=1e-12)


def test_blr_metrics_empty_test():
    with pytest.raises(InvalidInputError):
        blr_metrics(np.zeros((1, 2)), Dataset(np.zeros((0, 1)), np.zeros(0)))


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_dataset_split_and_bias(tmp_path):
    rows = "\n".join(f"{i},{i * 0.5},{i % 2}" for i in range(10))
    path = _write(tmp_path, rows + "\n")
    train, test = load_dataset(path, split_seed=3, train_fraction=0.8)
    assert len(train) == 8 and len(test) == 2
    assert_array_equal(train.features[:, -1], 1.0)
    assert_array_equal(test.features[:, -1], 1.0)
    train2, test2 = load_dataset(path, split_seed=3, train_fraction=0.8)
    assert_array_equal(train.features, train2.features)
    assert set(train.features[:, 0]) | set(test.features[:, 0]) == set(range(10))
    other, _ = load_dataset(path, split_seed=4, train_fraction=0.8)
    assert not np.array_equal(other.features, train.features)


def test_load_dataset_header(tmp_path):
    path = _write(tmp_path, "a,b,label\n1,2,0\n3,4,1\n")
    train, test = load_dataset(path, train_fraction=0.5, skip_header=True)
    assert len(train) + len(test) == 2
    with pytest.raises(DataError, match="line 1"):
        load_dataset(path)


@pytest.mark.parametrize(
    "text, line, pattern",
    [
        ("1,2,0\n1,2\n", 2, "expected 3 fields"),
        ("1,2,0\n1,x,1\n3,4,0\n", 2, "non-numeric"),
        ("1,2,0\n1,2,1\n1,2,2\n", 3, "not 0 or 1"),
    ],
)
def test_load_dataset_errors(tmp_path, text, line, pattern):
    with pytest.raises(DataError, match=pattern) as info:
        load_dataset(_write(tmp_path, text))
    assert info.value.line == line


def test_synthetic_data_shapes():
    f, y, w = synthetic_logistic_data(100, 4, np.random.default_rng(0))
    assert f.shape == (100, 4) and y.shape == (100,) and w.shape == (4,)
    assert set(np.unique(y)) <= {0.0, 1.0}
