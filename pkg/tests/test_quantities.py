import math

import pytest
from hypothesis import given, strategies as st

from mcfqkd.quantities import (
    OpticalPower,
    db_to_linear,
    dbm_to_watts,
    linear_to_db,
    loss_to_distance,
    power_to_mean_photon_number,
    power_to_photon_flux,
    watts_to_dbm,
)

CLOCK = 595e6


def test_db_to_linear_identity_and_decade():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(10.0) == pytest.approx(0.1, rel=1e-15)


def test_db_to_linear_link_budget():
    # mpmath: 10**-0.375 = 0.42169650342858...
    assert db_to_linear(3.75) == pytest.approx(0.4216965034285822, rel=1e-14)
    assert round(db_to_linear(3.75), 4) == 0.4217


@pytest.mark.parametrize("bad", [-0.1, math.inf, math.nan])
def test_db_to_linear_rejects_bad_loss(bad):
    with pytest.raises(ValueError):
        db_to_linear(bad)


def test_loss_to_distance_examples():
    assert loss_to_distance(47.0, 1.6, 0.27) == pytest.approx(168.148148148, abs=1e-6)
    assert loss_to_distance(1.6, 1.6, 0.27) == 0.0
    assert loss_to_distance(3.75, 1.6, 0.27) == pytest.approx(7.962962963, abs=1e-8)


def test_loss_below_fan_io_rejected():
    with pytest.raises(ValueError):
        loss_to_distance(1.0, 1.6, 0.27)


def test_mean_photon_number():
    # mpmath with exact SI constants at 1550 nm
    mu1 = power_to_mean_photon_number(OpticalPower(-81.0), CLOCK)
    mu2 = power_to_mean_photon_number(OpticalPower(-84.0), CLOCK)
    assert mu1 == pytest.approx(0.104168881278375, rel=1e-12)
    assert mu2 == pytest.approx(0.0522081134379565, rel=1e-12)
    assert power_to_mean_photon_number(OpticalPower(-math.inf), CLOCK) == 0.0


def test_photon_flux_of_leaked_light():
    assert power_to_photon_flux(OpticalPower(-114.0)) == pytest.approx(31063.8274955841, rel=1e-12)


def test_optical_power_validation():
    with pytest.raises(ValueError):
        OpticalPower(math.nan)
    with pytest.raises(ValueError):
        OpticalPower(0.0, wavelength_nm=0.0)
    assert OpticalPower(0.0).watts == pytest.approx(1e-3)


@given(st.floats(min_value=0.0, max_value=100.0))
def test_db_round_trip(db):
    assert abs(linear_to_db(db_to_linear(db)) - db) <= 1e-12


@given(st.floats(min_value=0.0, max_value=100.0), st.floats(min_value=0.0, max_value=100.0))
def test_losses_compose_multiplicatively(a, b):
    assert abs(db_to_linear(a + b) - db_to_linear(a) * db_to_linear(b)) <= 1e-12


@given(st.floats(min_value=-150.0, max_value=30.0))
def test_dbm_watts_round_trip(dbm):
    assert watts_to_dbm(dbm_to_watts(dbm)) == pytest.approx(dbm, abs=1e-9)


@given(st.floats(min_value=-120.0, max_value=0.0))
def test_photon_number_linear_in_power(dbm):
    a = power_to_mean_photon_number(OpticalPower(dbm), CLOCK)
    b = power_to_mean_photon_number(OpticalPower(dbm + 10.0), CLOCK)
    assert b == pytest.approx(10.0 * a, rel=1e-9)
