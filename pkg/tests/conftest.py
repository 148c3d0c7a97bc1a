import pytest

from coulombhole import BeamParameters, EmissionModel, Quantity, Unit, critical_scale
from coulombhole.units import cm, ev, kev, ns


@pytest.fixture
def beam_1kev():
    """1 keV / 1 eV / 1 cm reference beam used across the suite."""
    return BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(1), t_bar=ns(0.2))


@pytest.fixture
def tau_c_1kev(beam_1kev):
    return critical_scale(beam_1kev).tau_c_ns


@pytest.fixture
def model_200tau(tau_c_1kev):
    """Emission model with t_bar = 200 tau_c for the reference beam."""
    return EmissionModel(Quantity(200.0 * tau_c_1kev, Unit.NS))
