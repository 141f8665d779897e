import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _strict_float_errors():
    with np.errstate(divide="raise", invalid="raise", over="raise"):
        yield
