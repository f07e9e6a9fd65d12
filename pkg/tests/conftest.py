import numpy as np
import pytest

from syncprob.dynamics import VanDerPol, detect_period
from syncprob.msf import msf_curve


@pytest.fixture(scope="session")
def vdp():
    return VanDerPol()


@pytest.fixture(scope="session")
def cycle(vdp):
    return detect_period(vdp, np.array([1.0]), np.array([1.0, 0.0]))


@pytest.fixture(scope="session")
def curve(vdp, cycle):
    # Coarse but covers every spectrum used in the tests.
    grid = np.concatenate([np.arange(0.0, 15.0, 0.25), np.arange(15.0, 41.0, 2.5)])
    return msf_curve(vdp, cycle, grid, steps_per_period=100)
