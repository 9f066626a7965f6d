import numpy as np
import pytest

from gmmdr import FitConfig, em_fit


@pytest.fixture(scope="session", autouse=True)
def warm_compiled_kernels():
    """Trigger JIT compilation once so timed tests measure the algorithms."""
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2))
    em_fit(X, 2, "VVV", FitConfig(max_iter=5, seed=0))
    em_fit(X[:, :1], 2, "V", FitConfig(max_iter=5, seed=0))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
