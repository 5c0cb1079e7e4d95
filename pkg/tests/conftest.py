import numpy as np
import pytest

from coxflow import ModelParams, ResponseFunction, simulate
from coxflow.cycles import cycle_statistics


@pytest.fixture(scope="session")
def linear_h():
    return ResponseFunction.linear()


@pytest.fixture(scope="session")
def cubic_h():
    return ResponseFunction.cubic()


@pytest.fixture(scope="session")
def const_h():
    return ResponseFunction.constant()


@pytest.fixture(scope="session")
def desk_params():
    return ModelParams(sigma=1.0, mu=1000.0, horizon=5.0, bins=150, seed=42)


@pytest.fixture(scope="session")
def desk_record(desk_params, linear_h):
    return simulate(desk_params, linear_h)


@pytest.fixture(scope="session")
def stats_small(linear_h):
    """Moderate-precision cycle statistics shared across test modules."""
    return cycle_statistics(1.0, linear_h, n_cycles=30_000, step=5e-4, seed=3)


def chi2_uniform_pvalue(values, n_bins=20):
    """Chi-square goodness-of-fit p-value of values in [0,1) against uniform."""
    from scipy import stats as sps

    counts, _ = np.histogram(values, bins=n_bins, range=(0.0, 1.0))
    expected = len(values) / n_bins
    stat = float(((counts - expected) ** 2 / expected).sum())
    return float(sps.chi2.sf(stat, n_bins - 1))
