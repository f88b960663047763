import pytest

from qostf.partition import DistanceSets, design_lifts


@pytest.fixture(scope="session")
def lifts():
    return design_lifts(2)


@pytest.fixture(scope="session")
def distances(lifts):
    return DistanceSets(lifts)
