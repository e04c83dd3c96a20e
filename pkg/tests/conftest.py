import pytest

from dihedral_dynamics.exact_circle import GOLDEN, Theta
from dihedral_dynamics.systems import DenjoyFlipSystem, DoubledSystem, OdometerSystem


@pytest.fixture(scope="session")
def golden():
    return GOLDEN


@pytest.fixture(scope="session")
def sqrt2_theta():
    # sqrt(2) - 1
    return Theta(p=-1, q=1, d=2, r=1)


@pytest.fixture(scope="session")
def denjoy(golden):
    return DenjoyFlipSystem(golden)


@pytest.fixture(scope="session")
def doubled(golden):
    return DoubledSystem(golden)


@pytest.fixture(scope="session")
def odometer3():
    return OdometerSystem([3 ** i for i in range(1, 8)])


@pytest.fixture(scope="session")
def odometer2():
    return OdometerSystem([2 ** i for i in range(1, 10)])
