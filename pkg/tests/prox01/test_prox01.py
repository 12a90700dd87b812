import numpy as np
import pytest
from numpy.testing import assert_array_equal

from qshs.prox01 import (
    ProxParams,
    in_working_band,
    prox,
    prox_objective,
    working_band_mask,
    zero_one_loss,
    zero_one_loss_count,
)


def test_zero_one_loss_examples():
    assert zero_one_loss(0.5) == 1
    assert zero_one_loss(0.0) == 0
    assert zero_one_loss(-3.0) == 0
    assert zero_one_loss_count([0.5, 0.0, -3.0, 2.0]) == 2


def test_prox_example():
    # gamma * C = 0.5 puts the threshold at 1.
    params = ProxParams(gamma=0.5, C=1.0)
    assert params.threshold == 1.0
    assert_array_equal(prox([0.5, 2.0, -1.0], params), [0.0, 2.0, -1.0])


def test_prox_keeps_nonpositive_vectors():
    params = ProxParams(gamma=2.0, C=3.0)
    v = np.array([-4.0, -0.1, 0.0])
    assert_array_equal(prox(v, params), v)


def test_band_endpoints():
    params = ProxParams(gamma=0.5, C=1.0)
    assert in_working_band(params.threshold, params)
    assert not in_working_band(0.0, params)
    assert prox([params.threshold], params)[0] == 0.0
    assert prox([0.0], params)[0] == 0.0


def test_prox_does_not_modify_input():
    params = ProxParams(gamma=1.0, C=1.0)
    v = np.array([0.5, 3.0])
    prox(v, params)
    assert_array_equal(v, [0.5, 3.0])


def test_prox_matches_grid_minimisation():
    rng = np.random.default_rng(11)
    n_triples, step, radius = 10_000, 1e-4, 5.0
    gamma = rng.uniform(0.05, 5.0, n_triples)
    C = rng.uniform(0.05, 5.0, n_triples)
    v = rng.uniform(-4.0, 4.0, n_triples)
    # Integer multiples of the step, so u == 0 is on the grid exactly.
    half = int(round(radius / step))
    grid = np.arange(-half, half + 1) * step

    achieved = np.empty(n_triples)
    for i, params in enumerate(ProxParams(gamma=g, C=c) for g, c in zip(gamma, C)):
        achieved[i] = prox_objective(prox(v[i], params)[0], v[i], params)

    best = np.empty(n_triples)
    for start in range(0, n_triples, 50):
        rows = slice(start, start + 50)
        objective = C[rows, None] * (grid > 0.0) + (grid - v[rows, None]) ** 2 / (
            2.0 * gamma[rows, None]
        )
        best[rows] = objective.min(axis=1)

    # The closed form is never worse than the grid, and the grid gets within
    # one step of it.
    assert np.all(achieved <= best + 1e-12)
    assert np.all(best - achieved <= step**2 / (2.0 * gamma) + 1e-12)


def test_band_agrees_with_prox_zeroing():
    rng = np.random.default_rng(12)
    params = ProxParams(gamma=0.7, C=1.3)
    v = rng.normal(scale=2.0, size=10_000)
    zeroed = (prox(v, params) == 0.0) & (v > 0.0)
    assert_array_equal(working_band_mask(v, params), zeroed)


def test_prox_is_idempotent():
    rng = np.random.default_rng(13)
    params = ProxParams(gamma=1.5, C=0.4)
    v = rng.normal(size=500)
    once = prox(v, params)
    assert_array_equal(prox(once, params), once)


def test_larger_penalty_never_shrinks_zeroed_set():
    rng = np.random.default_rng(14)
    v = rng.normal(size=1000)
    small = working_band_mask(v, ProxParams(gamma=1.0, C=0.5))
    large = working_band_mask(v, ProxParams(gamma=1.0, C=2.0))
    assert np.all(large[small])


def test_from_sigma_uses_reciprocal_step():
    params = ProxParams.from_sigma(sigma=2.0, C=1.0)
    assert params.gamma == 0.5
    assert params.threshold == pytest.approx(1.0)


def test_invalid_params():
    with pytest.raises(ValueError):
        ProxParams(gamma=0.0, C=1.0)
    with pytest.raises(ValueError):
        ProxParams(gamma=1.0, C=-1.0)
