import numpy as np
import pytest

from covmet import RegressorSpec, RngStream


@pytest.fixture
def linear_spec():
    return RegressorSpec("linear")


@pytest.fixture
def small_forest_spec():
    # enough trees to be stable, few enough to keep unit tests quick
    return RegressorSpec("random_forest", params={"n_trees": 50})


def make_linear_null(seed: int, n: int = 300, d: int = 1, d_z: int = 3):
    """Gaussian linear null: X and y both driven by Z only."""
    gen = np.random.default_rng(seed)
    z = gen.normal(size=(n, d_z))
    x = z @ gen.normal(size=(d_z, d)) + gen.normal(size=(n, d))
    y = z @ gen.normal(size=d_z) + gen.normal(size=n)
    return y, x, z


@pytest.fixture
def rng_pair():
    return RngStream(seed=2024), RngStream(seed=2024)
