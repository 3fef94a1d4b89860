import numpy as np
import pytest

from problem import QuadraticSaddleSpec, make_auc_instance, make_quadratic_saddle


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks (deselect with -m 'not slow')")


@pytest.fixture(scope="session")
def decoupled():
    """A = C = I, B = 0 in two dimensions with radii 2"""
    spec = QuadraticSaddleSpec(dim_w=2, dim_v=2, dim_z=2, rho=1.0, A=np.eye(2), C=np.eye(2),
                               B=np.zeros((2, 2)), radius_w=2.0, radius_v=2.0)
    return make_quadratic_saddle(spec, seed=0)


@pytest.fixture(scope="session")
def coupled():
    """p = 8, rho = 1, ||B|| = 0.5"""
    return make_quadratic_saddle(QuadraticSaddleSpec(dim_w=8, dim_v=8, dim_z=8, rho=1.0, coupling=0.5), seed=7)


@pytest.fixture(scope="session")
def small_coupled():
    return make_quadratic_saddle(QuadraticSaddleSpec(dim_w=3, dim_v=3, dim_z=3, rho=1.0, coupling=0.5), seed=11)


@pytest.fixture(scope="session")
def auc():
    return make_auc_instance(0.3, 1.0, seed=3, dim=3, constant_samples=20000)
