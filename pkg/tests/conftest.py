import pytest
from hypothesis import settings

from scbell.bcs import MATERIALS, SUPERCONDUCTORS

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def mat():
    return MATERIALS["InGaAs-QW"]


@pytest.fixture(scope="session")
def nb():
    return SUPERCONDUCTORS["Nb"]


@pytest.fixture(scope="session")
def dyadic():
    """Material and gap with exactly representable resonance positions.

    m_HH/m_n = 8 and mu_n = 8 put the HH bracket zero at w_sum = 1618 meV, so
    with Delta = 2 meV the HH pole sits at detuning exactly 4 meV.
    """
    from scbell.bcs import MaterialParams, SuperconductorParams

    mat = MaterialParams(800.0, 0.125, 0.25, 1.0, 10.0, 8.0, -1000.0, 1e-8, 1e10)
    return mat, SuperconductorParams(2.0, 10.0)
