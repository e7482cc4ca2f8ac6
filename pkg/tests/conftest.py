import numpy as np
import pytest

from jumpdelay import InitialData, JumpLinearModel, solve_riccati, two_mode_example
from jumpdelay.suite import boundary_instances, random_suite


def scalar_model(a=1.0, b=1.0, q=1.0, r=1.0, pf=1.0, d=1, N=2):
    one = lambda v: np.full((1, 1, 1), v)
    return JumpLinearModel(A=one(a), B=one(b), Q=one(q), R=one(r), P_term=one(pf),
                           trans=np.ones((1, 1)), pi0=np.ones(1), d=d, N=N)


@pytest.fixture(scope="session")
def example():
    return two_mode_example()


@pytest.fixture(scope="session")
def example_tables(example):
    return solve_riccati(example[0])


@pytest.fixture(scope="session")
def suite():
    return random_suite()


@pytest.fixture(scope="session")
def boundary():
    return boundary_instances()


@pytest.fixture
def scalar():
    return scalar_model()


@pytest.fixture
def scalar_init():
    return InitialData(np.array([0.7]), np.array([[-0.2]]))
