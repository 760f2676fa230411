import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from mcfqkd.coexistence import (
    DEFAULT_WDM_INSERTION_DB,
    ClassicalChannelSpec,
    classical_ber,
    coexistence_run,
    core_classical_power,
    leakage_background,
)
from mcfqkd.finitekey import finite_key
from mcfqkd.quantities import OpticalPower
from mcfqkd.simulator import Analytic, SaturationWarning, simulate_sdm

SPEC = ClassicalChannelSpec()


def ber(dbm):
    return classical_ber(OpticalPower(dbm, SPEC.wavelength_nm), SPEC)


def test_ber_calibration_point():
    assert ber(-34.0) == 1e-9


def test_ber_three_db_up():
    # mpmath: 0.5 erfc(Q sqrt(2) / sqrt(2)), Q = 5.9978 -> 1.2e-17
    assert ber(-31.0) < 1e-13
    assert ber(-31.0) == pytest.approx(1.20475496735625e-17, rel=1e-6)


def test_ber_without_light():
    assert ber(-math.inf) == 0.5


@given(st.floats(-80.0, 0.0), st.floats(0.01, 10.0))
def test_ber_decreasing(dbm, step):
    a, b = ber(dbm), ber(dbm + step)
    assert b < a or (a == 0.0 and b == 0.0)


def test_leakage_flux():
    # mpmath photon flux of -114 dBm at 1550 nm
    assert leakage_background(OpticalPower(-34.0), 80.0) == pytest.approx(31063.8274955841, rel=1e-12)
    assert leakage_background(OpticalPower(-34.0), math.inf) == 0.0
    hi = leakage_background(OpticalPower(0.0), 80.0)
    lo = leakage_background(OpticalPower(-20.0), 80.0)
    assert hi / lo == pytest.approx(100.0, rel=1e-12)
    assert leakage_background(OpticalPower(-34.0), 80.0, eta_det=0.6) == pytest.approx(0.6 * 31063.8274955841)


def test_crosstalk_adds_neighbour_power(preset):
    own = SPEC.rx_power(0).watts
    total = core_classical_power(0, preset.channel, SPEC).watts
    assert total == pytest.approx(own * (1 + 36 * 1e-6), rel=1e-12)


@pytest.fixture(scope="module")
def quantum_only(preset):
    rx = replace(preset.receiver, wdm_insertion_db=DEFAULT_WDM_INSERTION_DB)
    tagged = simulate_sdm(preset.protocol, preset.channel, rx, Analytic(30.0))
    return [finite_key(t.stats, preset.protocol) for t in tagged]


def run(preset, **classical):
    rx = replace(preset.receiver, wdm_insertion_db=DEFAULT_WDM_INSERTION_DB)
    return coexistence_run(preset.protocol, preset.channel, rx, replace(preset.classical, **classical))


@pytest.fixture(scope="module")
def coexist(preset):
    return run(preset)


def test_coexistence_rates(coexist):
    total = sum(c.key.rate_bps for c in coexist)
    assert total == pytest.approx(62.8e6, rel=0.15)
    assert total / len(coexist) == pytest.approx(1.7e6, rel=0.15)
    assert all(c.ber <= 1e-9 for c in coexist)


def test_qber_shift_small(coexist, quantum_only):
    for c, q in zip(coexist, quantum_only):
        assert 0.0 < c.key.qber_z - q.qber_z <= 0.0025


def test_weaker_filter_degrades(preset, coexist):
    with pytest.warns(SaturationWarning):
        weak = run(preset, wdm_extinction_db=40.0)
    for w, c in zip(weak, coexist):
        assert w.key.qber_z > c.key.qber_z
        assert w.key.rate_bps < c.key.rate_bps


def test_no_classical_light_matches_quantum_only(preset):
    res = coexistence_run(preset.protocol, preset.channel, preset.receiver,
                          replace(preset.classical, rx_power_dbm=-math.inf))
    ref = simulate_sdm(preset.protocol, preset.channel, preset.receiver, Analytic(30.0))
    assert [r.stats for r in res] == ref
    assert [r.key for r in res] == [finite_key(t.stats, preset.protocol) for t in ref]


def test_per_core_powers():
    spec = ClassicalChannelSpec(rx_power_dbm=(-34.0, -math.inf))
    assert spec.rx_power(1).watts == 0.0
    assert spec.violations() == []
    assert ClassicalChannelSpec(bitrate_bps=0).violations()
