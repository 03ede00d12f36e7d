import numpy as np
import pytest

from tsnorm import Dataset


def col(*values):
    """Single-channel (T, 1) matrix from scalars."""
    return np.array(values, dtype=np.float64).reshape(-1, 1)


def central_difference(fn, x, step=1e-5):
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for i in range(x.size):
        bump = np.zeros_like(x).reshape(-1)
        bump[i] = step
        bump = bump.reshape(x.shape)
        flat[i] = (fn(x + bump) - fn(x - bump)) / (2.0 * step)
    return grad


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(0)
    t = np.arange(400, dtype=np.float64)
    values = np.column_stack([
        10.0 + 3.0 * np.sin(2 * np.pi * t / 24) + rng.normal(0, 0.2, t.size),
        -5.0 + 0.5 * np.cos(2 * np.pi * t / 24) + rng.normal(0, 0.05, t.size),
    ])
    return Dataset(name="tiny", values=values, frequency="1h",
                   seasonal_period=24, split_index=320)
