import numpy as np
import pytest

from pgbj.datagen import generate_synthetic
from pgbj.metric import Dataset


def line(name, values, ids=None):
    """1-D dataset from a list of numbers."""
    return Dataset.from_array(name, np.asarray(values, dtype=float)[:, None], ids)


def pts(name, rows, ids=None):
    return Dataset.from_array(name, np.asarray(rows, dtype=float), ids)


def self_join_s(R):
    return Dataset("S", R.ids.copy(), R.coords.copy())


@pytest.fixture
def small_pair():
    R = generate_synthetic("GAUSSIAN_MIXTURE", 3, 300, clusters=5, seed=11, name="R")
    S = generate_synthetic("UNIFORM", 3, 250, seed=12, name="S")
    S = Dataset("S", S.ids + 1000, S.coords)
    return R, S


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
