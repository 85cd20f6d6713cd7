import pytest

from thermofuzz.starters import starter_graphs
from thermofuzz.thermal import GpuProfile, default_profile


@pytest.fixture
def profile() -> GpuProfile:
    return default_profile()


@pytest.fixture
def starters():
    return starter_graphs()
