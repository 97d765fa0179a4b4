import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from parvi.errors import InvalidInputError, InvalidParameterError
from parvi.geometry import PairedEnsembles, PairwiseCloseWarning, exp_map, inverse_exp, parallel_transport


@pytest.fixture
def grid():
    xs, ys = np.meshgrid(np.arange(4.0), np.arange(3.0))
    return np.column_stack([xs.ravel(), ys.ravel()])


def test_exp_map_zero_and_constant_fields(grid):
    assert_array_equal(exp_map(grid, np.zeros_like(grid)), grid)
    c = np.array([0.5, -2.0])
    assert_allclose(exp_map(grid, np.tile(c, (len(grid), 1))), grid + c)


def test_exp_map_half_steps_compose(grid):
    v = np.tile([0.3, 0.1], (len(grid), 1))
    twice = exp_map(exp_map(grid, v, 0.5), v, 0.5)
    assert_allclose(twice, exp_map(grid, v, 1.0), rtol=1e-15)


def test_exp_map_errors(grid):
    with pytest.raises(InvalidInputError):
        exp_map(grid, np.zeros((2, 2)))
    with pytest.raises(InvalidParameterError):
        exp_map(grid, np.zeros_like(grid), 0.0)


def test_inverse_exp_identity_pair_is_zero(grid):
    assert_array_equal(inverse_exp(PairedEnsembles(grid, grid)), 0.0)


def test_exp_map_inverts_inverse_exp(grid):
    rng = np.random.default_rng(0)
    dest = grid + 0.05 * rng.normal(size=grid.shape)
    v = inverse_exp(PairedEnsembles(grid, dest))
    assert_array_equal(exp_map(grid, v, 1.0), grid + (dest - grid))
    assert_allclose(exp_map(grid, v, 1.0), dest, rtol=0, atol=1e-15)


def test_inverse_exp_scales_linearly(grid):
    dest = grid + 0.02
    v = inverse_exp(PairedEnsembles(grid, dest))
    v3 = inverse_exp(PairedEnsembles(grid, grid + 3.0 * (dest - grid)))
    assert_allclose(v3, 3.0 * v, rtol=1e-12)


def test_pairwise_close_diagnostic(grid):
    rng = np.random.default_rng(1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        inverse_exp(PairedEnsembles(grid, grid + 0.01 * rng.normal(size=grid.shape)))
    shuffled = grid[rng.permutation(len(grid))]
    with pytest.warns(PairwiseCloseWarning):
        v = inverse_exp(PairedEnsembles(grid, shuffled))
    assert_array_equal(v, shuffled - grid)


def test_pairwise_close_threshold_respected(grid):
    # nn spacing is 1; displacement 0.5 sits exactly on the default threshold
    assert PairedEnsembles(grid, grid + [0.5, 0.0]).is_pairwise_close()
    assert not PairedEnsembles(grid, grid + [0.5, 0.0], threshold=0.4).is_pairwise_close()


def test_paired_shape_mismatch():
    with pytest.raises(InvalidInputError):
        PairedEnsembles(np.zeros((3, 2)), np.zeros((4, 2)))


def test_parallel_transport_is_isometric_copy(grid):
    rng = np.random.default_rng(2)
    dest = grid + 0.01
    v = rng.normal(size=grid.shape)
    out = parallel_transport(v, PairedEnsembles(grid, dest))
    assert_array_equal(out, v)
    assert out is not v
    assert np.sum(out**2) == np.sum(v**2)
    back = parallel_transport(out, PairedEnsembles(dest, grid))
    assert_array_equal(back, v)
    assert_array_equal(parallel_transport(np.zeros_like(grid), PairedEnsembles(grid, dest)), 0.0)


def test_parallel_transport_shape_check(grid):
    with pytest.raises(InvalidInputError):
        parallel_transport(np.zeros((1, 2)), PairedEnsembles(grid, grid))
