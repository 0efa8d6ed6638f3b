import numpy as np
import pytest

from divan.synth import dataset_from_arrays, uniform_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    return dataset_from_arrays(
        {
            "a": np.array([5.0, 2.0, 9.0, 1.0, 7.0, 3.0, 8.0, 4.0]),
            "b": np.array([1, 1, 0, 0, 1, 0, 1, 0]),
        }
    )


@pytest.fixture
def medium_uniform():
    return uniform_dataset(20000, 4, seed=7)
