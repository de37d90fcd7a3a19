import numpy as np
import pytest


@pytest.fixture
def cos2():
    """Boundary datum cos(phi) + 2 as a function of phi."""
    return lambda p: np.cos(p) + 2.0


@pytest.fixture
def cos2_disk():
    return lambda t, p: np.cos(p) + 2.0 + 0.0 * t
