import numpy as np
import pytest

from polaritonkit.dispersion import BicDispersionParams
from polaritonkit.polariton import CouplingParams, EmitterParams


@pytest.fixture
def supp():
    """Cavity, emitter and coupling used throughout the strong-coupling analysis."""
    return BicDispersionParams(), EmitterParams(), CouplingParams(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
