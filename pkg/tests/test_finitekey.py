import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from mcfqkd.finitekey import (
    EPS_SPLIT,
    PA_SEC_TERMS,
    binary_entropy,
    decoy_bounds,
    finite_key,
    gamma_correction,
    hoeffding_delta,
    rate_vs_loss_curve,
    secret_key_length,
)
from mcfqkd.model import BlockStats, ProtocolParams
from mcfqkd.simulator import Analytic, simulate_core

P = ProtocolParams()
BLOCK_N_Z = 5.67e9 / 37


@pytest.fixture(scope="module")
def ref_core(preset):
    """Expected statistics of a mid-loss core rescaled to the per-core preset block."""
    t = simulate_core(18, preset.protocol, preset.channel, preset.receiver, Analytic(30.0))
    return replace(t.stats.scaled(BLOCK_N_Z / t.stats.n_z), t_acq_s=30.0)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    # mpmath: 0.05801847828921847...
    assert binary_entropy(0.0067) == pytest.approx(0.0580184782892185, rel=1e-13)


def test_hoeffding_values():
    assert hoeffding_delta(0, 1e-9) == 0.0
    # mpmath: sqrt(1e8 * ln(1e9)) = 45522.81388155439...
    assert hoeffding_delta(2e8, 1e-9) == pytest.approx(45522.8138815544, rel=1e-12)
    assert float(f"{hoeffding_delta(2e8, 1e-9):.4g}") == 4.552e4


@given(st.floats(min_value=0.0, max_value=1e15), st.floats(min_value=1e-30, max_value=0.5))
def test_hoeffding_sqrt_scaling(n, eps):
    assert hoeffding_delta(4 * n, eps) == pytest.approx(2 * hoeffding_delta(n, eps), rel=1e-12)


def test_security_budget_constants_exposed():
    assert EPS_SPLIT == 19 and PA_SEC_TERMS == 6


def test_gamma_vanishes_for_huge_samples():
    assert gamma_correction(1e-9, 0.03, 1e30, 1e30) < 1e-10
    assert gamma_correction(1e-9, 0.03, 0.0, 1e6) == math.inf


def test_no_decoy_information_clamps():
    s = BlockStats(1e6, 0, 0, 0, 0, 0, 0, 0, 1.0, 10**9)
    b = decoy_bounds(s, P)
    assert b.s_z0_lower == 0.0 and b.s_z1_lower == 0.0
    assert b.phi_z_upper == 0.5
    assert finite_key(s, P).secret_bits == 0.0


def test_phase_error_bound_at_block_scale(ref_core):
    b = decoy_bounds(ref_core, P)
    assert 0.025 <= b.phi_z_upper <= 0.045


def test_secret_fraction_at_reference_statistics(ref_core):
    assert ref_core.qber_z == pytest.approx(0.0067, abs=5e-5)
    b = replace(decoy_bounds(ref_core, P), phi_z_upper=0.0318)
    r = secret_key_length(b, ref_core, P)
    assert r.rate_bps == pytest.approx(2.86e6, rel=0.15)
    assert 0.50 <= r.secret_bits / r.n_z <= 0.62


def test_qber_half_gives_no_key(ref_core):
    s = replace(ref_core, m_z_mu1=ref_core.n_z_mu1 / 2, m_z_mu2=ref_core.n_z_mu2 / 2)
    assert finite_key(s, P).secret_bits == 0.0


def test_doubling_block_more_than_doubles_key(ref_core):
    l1 = finite_key(ref_core, P).secret_bits
    l2 = finite_key(ref_core.scaled(2.0), P).secret_bits
    assert l1 > 0 and l2 > 2 * l1


def test_asymptotic_limit(ref_core):
    big = ref_core.scaled(1e12 / ref_core.n_z)
    fin = finite_key(big, P).secret_bits / big.n_z
    asym = finite_key(big, P, asymptotic=True).secret_bits / big.n_z
    assert fin == pytest.approx(asym, rel=0.01)


def test_result_invariants(ref_core):
    r = finite_key(ref_core, P)
    assert r.s_z0_lower + r.s_z1_lower <= r.n_z
    assert r.secret_bits <= r.n_z
    assert r.rate_bps == r.secret_bits / ref_core.t_acq_s


@given(st.floats(min_value=0.0, max_value=0.5), st.floats(min_value=0.0, max_value=0.5))
def test_length_non_increasing_in_phi(ref_core, a, b):
    lo, hi = sorted((a, b))
    bounds = decoy_bounds(ref_core, P)
    l_lo = secret_key_length(replace(bounds, phi_z_upper=lo), ref_core, P).secret_bits
    l_hi = secret_key_length(replace(bounds, phi_z_upper=hi), ref_core, P).secret_bits
    assert l_hi <= l_lo


@given(st.floats(min_value=0.0, max_value=0.5), st.floats(min_value=0.0, max_value=0.5))
def test_length_non_increasing_in_qber(ref_core, a, b):
    bounds = decoy_bounds(ref_core, P)

    def with_q(q):
        s = replace(ref_core, m_z_mu1=q * ref_core.n_z_mu1, m_z_mu2=q * ref_core.n_z_mu2)
        return secret_key_length(bounds, s, P).secret_bits

    lo, hi = sorted((a, b))
    assert with_q(hi) <= with_q(lo)


@given(st.floats(min_value=1e-3, max_value=1e3), st.floats(min_value=1.0, max_value=10.0))
def test_length_non_decreasing_in_block(ref_core, f, g):
    small = finite_key(ref_core.scaled(f), P).secret_bits
    large = finite_key(ref_core.scaled(f * g), P).secret_bits
    assert large >= small


counts = st.floats(min_value=0.0, max_value=1e10)


@settings(max_examples=300)
@given(counts, counts, counts, counts, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_clamps_hold_for_any_statistics(nz1, nz2, nx1, nx2, ez1, ez2, ex1, ex2):
    s = BlockStats(nz1, ez1 * nz1, nx1, ex1 * nx1, nz2, ez2 * nz2, nx2, ex2 * nx2, 1.0, 10**9)
    b = decoy_bounds(s, P)
    assert 0.0 <= b.phi_z_upper <= 0.5
    assert b.s_z0_lower >= 0 and b.s_z1_lower >= 0
    assert b.s_z0_lower + b.s_z1_lower <= s.n_z * (1 + 1e-12)
    r = secret_key_length(b, s, P)
    assert 0.0 <= r.secret_bits <= s.n_z


def test_rate_vs_loss_curve(preset):
    losses = [3.75, 10.0, 20.0, 30.0, 40.0, 46.0, 49.0]
    blocks = [5.67e9] * 5 + [1e9] * 2
    curve = rate_vs_loss_curve(preset.protocol, preset.channel, preset.receiver, losses, blocks)
    assert curve[0].aggregate_bps == pytest.approx(105.7e6, rel=0.15)
    rates = [c.aggregate_bps for c in curve]
    assert all(b <= a for a, b in zip(rates, rates[1:]))
    assert rates[-1] == 0.0
