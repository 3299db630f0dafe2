import numpy as np
import pytest

from nlch import Grid, ModelParams, validate_coefficient


@pytest.fixture
def params():
    return ModelParams(theta=1.0, theta0=2.0)


@pytest.fixture
def params_var():
    """Variable gradient coefficient and mobility, both even in s."""
    return ModelParams(
        theta=1.0,
        theta0=2.0,
        coeff_a=validate_coefficient("polynomial", [1.0, 0.0, 0.5]),
        coeff_b=validate_coefficient("polynomial", [1.0, 0.3]),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid2():
    return Grid.square(16, 1.0)


def random_state(grid, rng, amp=0.8):
    return rng.uniform(-amp, amp, grid.shape)


def mean_zero(grid, rng):
    v = rng.standard_normal(grid.shape)
    return v - np.mean(v)
