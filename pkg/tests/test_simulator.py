import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcfqkd.model import BlockStats, ChannelSpec, ProtocolParams, ReceiverSpec
from mcfqkd.simulator import (
    Analytic,
    InfeasibleError,
    MonteCarlo,
    SaturationWarning,
    calibrate_to_target,
    dead_slots,
    simulate_core,
    simulate_sdm,
    z_detection_rate,
)

P = ProtocolParams()
# receiver scaled like the calibrated preset so a lone core is not saturated
RX = ReceiverSpec(calibration_scale=0.577)
COUNTS = ["n_z_mu1", "m_z_mu1", "n_x_mu1", "m_x_mu1", "n_z_mu2", "m_z_mu2", "n_x_mu2", "m_x_mu2"]


def one_core(**kw):
    return ChannelSpec.with_cores(1, **kw) if kw else ChannelSpec.with_cores(1)


def test_dead_slots_at_595_mhz():
    assert dead_slots(50e-9, 1 / 595e6) == 29
    assert dead_slots(0.0, 1 / 595e6) == 0


def test_dark_channel_gives_nothing():
    chan = replace(one_core(), extra_attenuation_db=2000.0)
    rx = ReceiverSpec(dark_rate_hz=0.0)
    mc = simulate_core(0, P, chan, rx, MonteCarlo(1, 200_000))
    assert all(getattr(mc.stats, c) == 0 for c in COUNTS)
    an = simulate_core(0, P, chan, rx, Analytic(1.0))
    assert all(getattr(an.stats, c) < 1e-100 for c in COUNTS)


def test_preset_block_size(analytic_cores):
    for t in analytic_cores:
        assert 4e6 * 30 <= t.stats.n_z <= 7e6 * 30
    total = sum(t.stats.n_z for t in analytic_cores)
    assert total == pytest.approx(5.11e6 * 37 * 30, rel=1e-9)
    assert total == pytest.approx(5.67e9, rel=1e-3)


def test_core_spread_follows_excess_loss(preset, analytic_cores):
    excess = np.array(preset.channel.per_core_excess_db)
    n_z = np.array([t.stats.n_z for t in analytic_cores])
    assert np.all(np.argsort(excess, kind="stable") == np.argsort(-n_z, kind="stable"))


def test_single_core_sdm_equals_core(preset):
    chan = preset.channel.subset([0])
    mode = MonteCarlo(5, 300_000)
    assert simulate_sdm(preset.protocol, chan, preset.receiver, mode) == [
        simulate_core(0, preset.protocol, chan, preset.receiver, mode)
    ]


def test_core_order_does_not_matter(preset):
    mode = MonteCarlo(11, 200_000)
    a = simulate_sdm(preset.protocol, preset.channel, preset.receiver, mode, cores=[0, 1, 2])
    b = simulate_sdm(preset.protocol, preset.channel, preset.receiver, mode, cores=[2, 0, 1])
    assert b == [a[2], a[0], a[1]]


def test_monte_carlo_reproducible(preset):
    mode = MonteCarlo(3, 300_000)
    a = simulate_core(4, preset.protocol, preset.channel, preset.receiver, mode)
    assert a == simulate_core(4, preset.protocol, preset.channel, preset.receiver, mode)
    assert a != simulate_core(4, preset.protocol, preset.channel, preset.receiver, MonteCarlo(4, 300_000))


def test_workers_do_not_change_results(preset):
    mode = MonteCarlo(8, 200_000)
    chan = preset.channel.subset(range(3))
    serial = simulate_sdm(preset.protocol, chan, preset.receiver, mode, workers=1)
    assert simulate_sdm(preset.protocol, chan, preset.receiver, mode, workers=2) == serial


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=1, max_value=400_000))
def test_conservation(seed, pulses):
    t = simulate_core(0, P, one_core(), replace(RX, dark_rate_hz=5e4), MonteCarlo(seed, pulses))
    assert t.outcomes.sum() == pulses
    truth = t.truth
    for k, name in enumerate(("mu1", "mu2")):
        for b, basis in enumerate(("z", "x")):
            assert truth[b, k, ..., 0].sum() == getattr(t.stats, f"n_{basis}_{name}")
            assert truth[b, k, ..., 1].sum() == getattr(t.stats, f"m_{basis}_{name}")
    # sifted events are a subset of registered clicks
    assert t.stats.n_z + t.stats.n_x <= t.outcomes[:, 0].sum()


def test_chunk_boundary_keeps_dead_time():
    # Runs spanning several chunks conserve pulses just like single-chunk runs.
    t = simulate_core(0, P, one_core(), RX, MonteCarlo(2, (1 << 21) * 2 + 17))
    assert t.outcomes.sum() == (1 << 21) * 2 + 17


def test_error_floor():
    rx = replace(RX, visibility=1.0, z_error=0.0, dark_rate_hz=0.0)
    t = simulate_core(0, P, one_core(), rx, MonteCarlo(9, 2_000_000))
    assert t.stats.n_z > 0 and t.stats.n_x > 0
    assert t.stats.m_z == 0 and t.stats.m_x == 0
    a = simulate_core(0, P, one_core(), rx, Analytic(1.0))
    assert a.stats.m_z == 0 and a.stats.m_x == 0


@given(st.floats(min_value=0.0, max_value=1e5), st.floats(min_value=1.0, max_value=1e5))
def test_qber_increases_with_dark_rate(dark, bump):
    q = lambda d: simulate_core(0, P, one_core(), replace(RX, dark_rate_hz=d), Analytic(1.0)).stats.qber_z
    assert q(dark + bump) > q(dark)


def test_calibration(preset):
    rx1 = replace(preset.receiver, calibration_scale=1.0)
    here = z_detection_rate(preset.protocol, preset.channel, rx1)
    assert calibrate_to_target(here, preset.protocol, preset.channel, rx1).calibration_scale == 1.0
    rx = calibrate_to_target(5.11e6, preset.protocol, preset.channel, rx1)
    assert 0.0 < rx.calibration_scale <= 1.0
    assert z_detection_rate(preset.protocol, preset.channel, rx) == pytest.approx(5.11e6, rel=1e-9)
    assert rx.calibration_scale == pytest.approx(preset.receiver.calibration_scale, rel=1e-9)
    with pytest.raises(InfeasibleError):
        calibrate_to_target(1e12, preset.protocol, preset.channel, rx1)


def test_saturation_warns():
    rx = replace(RX, dark_rate_hz=5e6)
    with pytest.warns(SaturationWarning):
        t = simulate_core(0, P, one_core(), rx, Analytic(1.0))
    assert t.saturated


def test_noise_above_clock_is_infeasible():
    with pytest.raises(InfeasibleError):
        simulate_core(0, P, one_core(), RX, Analytic(1.0), background_rate_hz=1e10)


def test_analytic_has_no_truth(analytic_cores):
    assert not analytic_cores[0].tagged
