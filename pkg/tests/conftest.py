import numpy as np
import pytest

from hslg_lab.special import ModelParams


@pytest.fixture
def params():
    """Default bound-phase parameter point used across suites."""
    return ModelParams(1.0, -0.5)


@pytest.fixture
def params_grid():
    """A few bound-phase points with different binding strengths."""
    return [ModelParams(1.0, -0.5), ModelParams(0.7, -0.3),
            ModelParams(2.0, -1.2), ModelParams(1.0, -0.1)]


@pytest.fixture(autouse=True)
def _no_numpy_warnings():
    with np.errstate(all="raise"):
        # sampling kernels manage their own errstate; tests should not
        # silently generate NaNs anywhere else
        yield
