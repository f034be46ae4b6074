import numpy as np
import pytest

from interlab.ingest import Dataset, TransformSpec, example_path, load_dataset

STUDY_SPEC = TransformSpec(dose_transform="log10", center_doses=True, response_transform="natural_log")


@pytest.fixture(scope="session")
def ldh():
    return load_dataset(example_path("ldh"), STUDY_SPEC)


@pytest.fixture(scope="session")
def tp():
    return load_dataset(example_path("tp"), STUDY_SPEC)


def random_dataset(rng, m, n, levels=None, scale=1.0):
    """Balanced dataset with a random centered design and random responses."""
    if levels is None:
        levels = rng.integers(2, min(n, 6) + 1)
    base = np.sort(rng.normal(size=levels))
    x = np.sort(np.resize(base, n))
    x = x - x.mean()
    a = rng.normal(size=m)
    b = rng.normal(size=m)
    y = 3.0 + a[:, None] + (1.5 + b[:, None]) * x[None, :] + scale * rng.normal(size=(m, n))
    return Dataset(tuple(f"L{i}" for i in range(m)), x, y)


def ols_line(x, y):
    """Two-parameter least squares via a design matrix; returns (intercept at x=0, slope)."""
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef[0], coef[1]
