"""Shared fixtures: a desk-size scenario and deterministic randomness.

The tiny scenario keeps solver-backed tests fast (M = 4 surface
elements, 4 transmit antennas) while exercising the same code paths as
the full-size presets.
"""

import numpy as np
import pytest

from risac.channels import realize
from risac.scenario import build_scenario

TINY_OVERRIDES = {
    "M_a": 2,
    "M_b": 2,
    "J_T": 4,
    "K": 2,
    "L": 2,
    "G_it": 4,
    "N_it": 25,
}


@pytest.fixture
def rng():
    return np.random.default_rng(271828)


@pytest.fixture(scope="session")
def tiny_scenario():
    return build_scenario(TINY_OVERRIDES)


@pytest.fixture(scope="session")
def tiny_channels(tiny_scenario):
    return realize(tiny_scenario, np.random.default_rng([7, 0]))
