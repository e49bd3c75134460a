import pytest

from acktrack.models import VehicleParams


@pytest.fixture(scope="session")
def params():
    return VehicleParams()
