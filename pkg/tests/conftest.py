import numpy as np
import pytest

from pseudofol.geometry import Box, MetricField
from pseudofol.models import make_product, make_suspension, make_warped_counterexample


@pytest.fixture(scope="session")
def suspension():
    return make_suspension([[2, 1], [1, 1]], 1.0)


@pytest.fixture(scope="session")
def warped():
    return make_warped_counterexample()


@pytest.fixture(scope="session")
def lorentz_product():
    return make_product(MetricField.from_matrix([[-1.0]]),
                        MetricField.from_matrix(np.eye(2)), name="product")


@pytest.fixture(scope="session")
def torus_product():
    return make_product(MetricField.from_matrix([[1.0]], Box.torus(1)),
                        MetricField.from_matrix([[1.0]], Box.torus(1)), name="torus")
