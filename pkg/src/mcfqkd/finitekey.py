"""Finite-key secret key length for the 1-decoy (two-intensity) protocol.

Notation: ``n_{B,k}`` / ``m_{B,k}`` are the sifted detections / errors in
basis ``B`` for intensity ``mu_k`` (``k = 1`` signal, ``k = 2`` decoy), ``p_k``
the intensity probabilities, ``tau_j = sum_k p_k exp(-mu_k) mu_k**j / j!``.

Every statistical deviation is a Hoeffding term
``delta(x) = sqrt(x/2 * ln(EPS_SPLIT / eps_sec))`` on the total count ``x``
of the relevant basis, applied per intensity as

    n±_{B,k} = exp(mu_k) / p_k * (n_{B,k} ± delta(n_B))
    m±_{B,k} = exp(mu_k) / p_k * (m_{B,k} ± delta(m_B))

Bounds (``B`` is Z or X):

    s_{B,0}^u = 2 * (tau_0 * exp(mu_2) / p_2 * (m_{B,2} + delta(m_B)) + delta(n_B))
    s_{B,0}^l = tau_0 / (mu_1 - mu_2) * (mu_1 n-_{B,2} - mu_2 n+_{B,1})
    s_{B,1}^l = tau_1 mu_1 / (mu_2 (mu_1 - mu_2))
                * (n-_{B,2} - (mu_2/mu_1)^2 n+_{B,1} - (mu_1^2 - mu_2^2)/mu_1^2 * s_{B,0}^u / tau_0)
    v_{X,1}^u = tau_1 / (mu_1 - mu_2) * (m+_{X,1} - m-_{X,2})
    phi_Z^u   = v_{X,1}^u / s_{X,1}^l + gamma(eps_sec, v/s, s_{X,1}^l, s_{Z,1}^l)
    gamma(a, b, c, d) = sqrt((c+d)(1-b)b / (c d ln 2)
                             * log2((c+d) / (c d (1-b) b) * EPS_SPLIT^2 / a^2))

Secret key length:

    l = floor(s_{Z,0}^l + s_{Z,1}^l (1 - h(phi_Z^u)) - lambda_EC
              - PA_SEC_TERMS * log2(EPS_SPLIT / eps_sec) - log2(2 / eps_corr))
    lambda_EC = f_ec * n_Z * h(Q_Z)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .model import BlockStats, ChannelSpec, ProtocolParams, ReceiverSpec, validate
from .simulator import Analytic, simulate_sdm

__all__ = [
    "EPS_SPLIT",
    "PA_SEC_TERMS",
    "DecoyBounds",
    "FiniteKeyResult",
    "CurvePoint",
    "binary_entropy",
    "hoeffding_delta",
    "gamma_correction",
    "decoy_bounds",
    "secret_key_length",
    "finite_key",
    "rate_vs_loss_curve",
    "aggregate_stats_rate",
]

# eps_sec is shared among this many failure events (concentration bounds
# plus privacy amplification); each Hoeffding term uses eps_sec / EPS_SPLIT.
EPS_SPLIT = 19
# Multiplier of log2(EPS_SPLIT / eps_sec) in the privacy-amplification cost.
PA_SEC_TERMS = 6


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def hoeffding_delta(n: float, eps: float) -> float:
    """Half-width ``sqrt(n/2 ln(1/eps))`` of a Hoeffding interval on ``n`` trials."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    return math.sqrt(n / 2.0 * math.log(1.0 / eps))


def gamma_correction(eps: float, b: float, c: float, d: float) -> float:
    """Random-sampling correction between the X and Z single-photon phase errors.

    ``b`` is the observed X phase error rate, ``c``/``d`` the X/Z single-photon
    counts. Returns ``inf`` when ``c`` or ``d`` is not positive.
    """
    if c <= 0 or d <= 0:
        return math.inf
    if b <= 0.0 or b >= 1.0:
        return 0.0
    var = (c + d) * (1.0 - b) * b / (c * d * math.log(2.0))
    arg = (c + d) / (c * d * (1.0 - b) * b) * EPS_SPLIT**2 / eps**2
    if arg <= 1.0:
        return 0.0
    return math.sqrt(var * math.log2(arg))


@dataclass(frozen=True)
class DecoyBounds:
    s_z0_lower: float
    s_z1_lower: float
    s_x1_lower: float
    v_x1_upper: float
    phi_z_upper: float


@dataclass(frozen=True)
class FiniteKeyResult:
    s_z0_lower: float
    s_z1_lower: float
    phi_z_upper: float
    lambda_ec: float
    secret_bits: float
    rate_bps: float
    qber_z: float
    n_z: float = 0.0


def _taus(p: ProtocolParams) -> tuple[float, float]:
    t0 = sum(pk * math.exp(-mu) for mu, pk in zip(p.intensities, p.intensity_probs))
    t1 = sum(pk * math.exp(-mu) * mu for mu, pk in zip(p.intensities, p.intensity_probs))
    return t0, t1


def _basis_bounds(stats: BlockStats, p: ProtocolParams, basis: str, dev) -> tuple[float, float]:
    """(s_{B,0}^l, s_{B,1}^l) for basis ``basis``."""
    mu1, mu2 = p.intensities
    p1, p2 = p.intensity_probs
    t0, t1 = _taus(p)
    n_tot = stats.count("n", basis, 0) + stats.count("n", basis, 1)
    m_tot = stats.count("m", basis, 0) + stats.count("m", basis, 1)
    dn, dm = dev(n_tot), dev(m_tot)
    n1_plus = math.exp(mu1) / p1 * (stats.count("n", basis, 0) + dn)
    n2_minus = math.exp(mu2) / p2 * (stats.count("n", basis, 1) - dn)
    s0_upper = 2.0 * (t0 * math.exp(mu2) / p2 * (stats.count("m", basis, 1) + dm) + dn)
    s0_lower = t0 / (mu1 - mu2) * (mu1 * n2_minus - mu2 * n1_plus)
    s1_lower = (
        t1 * mu1 / (mu2 * (mu1 - mu2))
        * (n2_minus - (mu2 / mu1) ** 2 * n1_plus - (mu1**2 - mu2**2) / mu1**2 * s0_upper / t0)
    )
    return s0_lower, s1_lower


def decoy_bounds(stats: BlockStats, p: ProtocolParams, asymptotic: bool = False) -> DecoyBounds:
    """Vacuum and single-photon bounds and the phase-error upper bound.

    With ``asymptotic=True`` every statistical deviation (including the
    cross-basis correction) is set to zero.
    """
    validate(p)
    validate(stats)
    if asymptotic:
        dev = lambda x: 0.0
    else:
        eps_each = p.eps_sec / EPS_SPLIT
        dev = lambda x: hoeffding_delta(x, eps_each)
    mu1, mu2 = p.intensities
    p1, p2 = p.intensity_probs
    _, t1 = _taus(p)

    n_z = stats.n_z
    s_z0, s_z1 = _basis_bounds(stats, p, "z", dev)
    s_z0 = min(max(s_z0, 0.0), n_z)
    s_z1 = min(max(s_z1, 0.0), n_z - s_z0)
    _, s_x1 = _basis_bounds(stats, p, "x", dev)
    s_x1 = min(max(s_x1, 0.0), stats.n_x)

    dm = dev(stats.m_x)
    m1_plus = math.exp(mu1) / p1 * (stats.m_x_mu1 + dm)
    m2_minus = math.exp(mu2) / p2 * (stats.m_x_mu2 - dm)
    v_x1 = t1 / (mu1 - mu2) * (m1_plus - m2_minus)
    v_x1 = max(v_x1, 0.0)

    if s_x1 <= 0.0 or s_z1 <= 0.0:
        phi = 0.5
    else:
        ratio = v_x1 / s_x1
        if ratio >= 0.5:
            phi = 0.5
        else:
            g = 0.0 if asymptotic else gamma_correction(p.eps_sec, ratio, s_x1, s_z1)
            phi = min(ratio + g, 0.5)
    return DecoyBounds(s_z0, s_z1, s_x1, v_x1, phi)


def secret_key_length(
    bounds: DecoyBounds, stats: BlockStats, p: ProtocolParams, asymptotic: bool = False
) -> FiniteKeyResult:
    """Secret key length and rate from the decoy bounds.

    ``asymptotic=True`` drops the constant security overheads and keeps
    fractional bits; use it together with ``decoy_bounds(..., asymptotic=True)``.
    """
    n_z = stats.n_z
    q_z = stats.qber_z
    lam = p.f_ec * n_z * binary_entropy(min(q_z, 0.5))
    raw = bounds.s_z0_lower + bounds.s_z1_lower * (1.0 - binary_entropy(bounds.phi_z_upper)) - lam
    if not asymptotic:
        raw -= PA_SEC_TERMS * math.log2(EPS_SPLIT / p.eps_sec) + math.log2(2.0 / p.eps_corr)
        raw = math.floor(raw) if raw > 0 else 0.0
    bits = min(max(raw, 0.0), n_z)
    return FiniteKeyResult(
        s_z0_lower=bounds.s_z0_lower,
        s_z1_lower=bounds.s_z1_lower,
        phi_z_upper=bounds.phi_z_upper,
        lambda_ec=lam,
        secret_bits=float(bits),
        rate_bps=bits / stats.t_acq_s,
        qber_z=q_z,
        n_z=n_z,
    )


def finite_key(stats: BlockStats, p: ProtocolParams, asymptotic: bool = False) -> FiniteKeyResult:
    """Full pipeline: decoy bounds then secret key length."""
    return secret_key_length(decoy_bounds(stats, p, asymptotic), stats, p, asymptotic)


@dataclass(frozen=True)
class CurvePoint:
    loss_db: float
    aggregate_bps: float
    per_core_mean_bps: float
    block_bits: float
    t_acq_s: float
    qber_z: float
    phi_z_upper: float


def aggregate_stats_rate(stats: Sequence[BlockStats]) -> float:
    """Aggregate sifted Z detections per second over a set of cores."""
    return sum(s.n_z / s.t_acq_s for s in stats)


def rate_vs_loss_curve(
    p: ProtocolParams,
    chan: ChannelSpec,
    rx: ReceiverSpec,
    losses: Sequence[float],
    block_bits: Union[float, Sequence[float]],
) -> list[CurvePoint]:
    """Aggregate finite-key rate as a function of channel loss.

    ``losses`` are channel losses of a core without excess loss (fibre plus
    fan-in/fan-out plus variable attenuator); the attenuator takes up the
    difference to ``chan.base_loss_db``. ``block_bits`` is the aggregate
    number of sifted Z detections over all cores per block, either one value
    or one per loss point. The acquisition time is whatever it takes the
    whole fibre to collect a block.
    """
    losses = list(losses)
    if not losses:
        raise ValueError("loss grid is empty")
    if any(b < a for a, b in zip(losses, losses[1:])):
        raise ValueError("loss grid must be non-decreasing")
    if isinstance(block_bits, (int, float)):
        blocks = [float(block_bits)] * len(losses)
    else:
        blocks = [float(b) for b in block_bits]
        if len(blocks) != len(losses):
            raise ValueError(f"got {len(blocks)} block sizes for {len(losses)} loss points")
    validate(p, chan, rx)

    out = []
    for loss, block in zip(losses, blocks):
        extra = loss - chan.base_loss_db
        if extra < -1e-9:
            raise ValueError(
                f"loss {loss} dB is below the fibre's own {chan.base_loss_db:.4g} dB"
            )
        c = replace(chan, extra_attenuation_db=max(extra, 0.0))
        per_second = [t.stats for t in simulate_sdm(p, c, rx, Analytic(1.0))]
        rate = aggregate_stats_rate(per_second)
        t_acq = block / rate if rate > 0 else math.inf
        if not math.isfinite(t_acq):
            out.append(CurvePoint(loss, 0.0, 0.0, block, t_acq, 0.0, 0.5))
            continue
        results = [finite_key(s.scaled(t_acq), p) for s in per_second]
        agg = sum(r.rate_bps for r in results)
        n_tot = sum(r.n_z for r in results)
        qber = sum(r.qber_z * r.n_z for r in results) / n_tot if n_tot else 0.0
        phi = sum(r.phi_z_upper for r in results) / len(results)
        out.append(CurvePoint(loss, agg, agg / len(results), block, t_acq, qber, phi))
    return out
