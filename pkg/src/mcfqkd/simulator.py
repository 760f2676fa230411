"""Per-core detection statistics: event-level Monte Carlo and analytic expectations.

Generative model (shared by both modes)
---------------------------------------
Each clock slot Alice picks intensity ``mu1`` with probability ``p_mu1`` and
the Z basis with probability ``p_z_alice``, then emits a phase-randomised
weak coherent pulse, i.e. a Poisson photon number. Every photon independently
survives the link, the receiver and the detector efficiency with probability
``eta``, and is routed to detector ``j`` with probability ``rx.routing()[j]``.
Detectors ``0 .. n_z-1`` form the Z arm, the last one the X arm.

Noise (dark counts plus background/leakage) arrives at detector ``j`` with
rate ``r_j``. Inside the temporal gate (``gate_width_s`` per slot) it produces
a registered click with a random bit; outside it the detector still fires
(and goes dead) but the click is filtered out.

A detector that fires is blind for the next ``D = ceil(dead_time / T) - 1``
slots (non-paralysable). Within an arm the bit is read from the lowest-index
live detector that registered a click. A photon in the Z arm gives the wrong
time bin with probability ``rx.z_error``; a photon in the X arm gives the
wrong interferometer output with probability ``(1 - V) / 2``. Only events
where Alice's basis matches the arm are kept (sifting).

Because photon counts at different detectors are independent Poisson
variables for a coherent state, and a detector's live/dead state depends only
on earlier slots, the analytic mode is exact up to the weak correlation that
the random choice of intensity introduces between detectors.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .model import (
    BlockStats,
    ChannelSpec,
    ProtocolParams,
    ReceiverSpec,
    effective_core_loss,
)
from .quantities import db_to_linear

__all__ = [
    "MonteCarlo",
    "Analytic",
    "SimulationMode",
    "TaggedBlockStats",
    "InfeasibleError",
    "SaturationWarning",
    "CorePhysics",
    "core_physics",
    "dead_slots",
    "simulate_core",
    "simulate_sdm",
    "calibrate_to_target",
    "z_detection_rate",
    "MAX_TAGGED_PHOTONS",
    "ORIGINS",
    "OUTCOMES",
]

# Photon numbers >= this are lumped into the last tag bin.
MAX_TAGGED_PHOTONS = 8
ORIGINS = ("signal", "dark", "leakage")
OUTCOMES = ("detected", "dead_time", "out_of_gate", "lost")
SATURATION_DEAD_FRACTION = 0.1
CHUNK_PULSES = 1 << 21


class InfeasibleError(RuntimeError):
    """A requested operating point cannot be reached by the model."""


class SaturationWarning(UserWarning):
    """Detectors spend a large fraction of the time dead."""


@dataclass(frozen=True)
class MonteCarlo:
    seed: int
    pulses: int

    def __post_init__(self) -> None:
        if self.pulses < 1:
            raise ValueError(f"pulses must be >= 1, got {self.pulses}")


@dataclass(frozen=True)
class Analytic:
    t_acq_s: float

    def __post_init__(self) -> None:
        if not self.t_acq_s > 0:
            raise ValueError(f"t_acq_s must be > 0, got {self.t_acq_s}")


SimulationMode = Union[MonteCarlo, Analytic]


@dataclass(frozen=True)
class TaggedBlockStats:
    """Block statistics plus Monte Carlo ground truth.

    ``truth[b, k, n, o, e]``: basis ``b`` (0 = Z, 1 = X), intensity ``k``,
    emitted photon number ``n`` (last bin is ``>= MAX_TAGGED_PHOTONS``),
    origin ``o`` (index into :data:`ORIGINS`), and ``e`` = 0 for sifted
    detections, 1 for errors among them.

    ``outcomes[n, c]``: pulses with photon number ``n`` whose fate was
    :data:`OUTCOMES` ``[c]``. Analytic runs carry no truth (both ``None``).
    """

    core: int
    stats: BlockStats
    truth: Optional[np.ndarray] = None
    outcomes: Optional[np.ndarray] = None
    saturated: bool = False

    @property
    def tagged(self) -> bool:
        return self.truth is not None

    def true_events(self, basis: str, photons: int, errors: bool = False) -> int:
        """Sifted detections (or errors) from pulses with ``photons`` emitted photons."""
        b = 0 if basis == "z" else 1
        return int(self.truth[b, :, photons, :, int(errors)].sum())

    def true_phase_error_rate(self) -> float:
        """Error rate of single-photon events in the X basis."""
        n = self.true_events("x", 1)
        return self.true_events("x", 1, errors=True) / n if n else 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaggedBlockStats):
            return NotImplemented
        same = lambda a, b: (a is None and b is None) or (
            a is not None and b is not None and np.array_equal(a, b)
        )
        return (
            self.core == other.core
            and self.stats == other.stats
            and same(self.truth, other.truth)
            and same(self.outcomes, other.outcomes)
            and self.saturated == other.saturated
        )

    __hash__ = None


@dataclass(frozen=True)
class CorePhysics:
    """Per-slot parameters of one core, derived from the configuration."""

    eta: float  # photon survival probability from Alice's output to a click
    routing: np.ndarray  # (n_det,) split of arriving light over detectors
    dark_hz: np.ndarray  # (n_det,) dark-count rate per detector
    leak_hz: np.ndarray  # (n_det,) background + cross-talk click rate per detector
    p_in_gate: np.ndarray  # (n_det,) noise arrival inside the gate, per slot
    p_out_gate: np.ndarray  # (n_det,) noise arrival outside the gate, per slot
    dead_slots: int
    n_z: int
    z_error: float
    x_error: float


def dead_slots(dead_time_s: float, period_s: float) -> int:
    """Slots blocked after a click: those starting less than ``dead_time_s`` later."""
    if dead_time_s <= 0:
        return 0
    return max(0, math.ceil(dead_time_s / period_s - 1e-9) - 1)


def _crosstalk_photon_rate(core: int, p: ProtocolParams, chan: ChannelSpec) -> float:
    mean_mu = p.p_mu1 * p.mu1 + p.p_mu2 * p.mu2
    coupled = sum(
        10.0 ** (-xt / 10.0) for j, xt in enumerate(chan.crosstalk_db[core]) if j != core
    )
    return mean_mu * p.clock_hz * coupled


def core_physics(
    core: int,
    p: ProtocolParams,
    chan: ChannelSpec,
    rx: ReceiverSpec,
    background_rate_hz: float = 0.0,
) -> CorePhysics:
    """Reduce the configuration of one core to per-slot probabilities.

    ``background_rate_hz`` is the total extra click rate (already including
    detector efficiency) arriving at Bob's detectors; it is split over the
    detectors like the signal. Cross-talk from the other cores' quantum
    signals is added on top.
    """
    if background_rate_hz < 0:
        raise ValueError(f"background_rate_hz must be >= 0, got {background_rate_hz}")
    link = db_to_linear(effective_core_loss(chan, core, rx))
    eta = link * rx.eta_receiver * rx.eta_det
    routing = rx.routing()
    xt_clicks = _crosstalk_photon_rate(core, p, chan) * eta
    leak = (background_rate_hz + xt_clicks) * routing
    dark = np.full_like(routing, rx.dark_rate_hz)
    period = p.period_s
    gate = min(rx.gate_width_s, period)
    rate = dark + leak
    if np.any(rate * period > 1.0):
        raise InfeasibleError(
            f"noise rate {rate.max():.3g} Hz exceeds one arrival per slot on core {core}"
        )
    return CorePhysics(
        eta=eta,
        routing=routing,
        dark_hz=dark,
        leak_hz=leak,
        p_in_gate=rate * gate,
        p_out_gate=rate * (period - gate),
        dead_slots=dead_slots(rx.dead_time_s, period),
        n_z=rx.n_z_detectors,
        z_error=rx.z_error,
        x_error=(1.0 - rx.visibility) / 2.0,
    )


# -- analytic mode ---------------------------------------------------------


def _live_fraction(ph: CorePhysics, p: ProtocolParams) -> np.ndarray:
    fire = np.zeros_like(ph.routing)
    for mu, pk in zip(p.intensities, p.intensity_probs):
        photon = -np.expm1(-mu * ph.eta * ph.routing)
        fire += pk * (photon + (1.0 - photon) * (ph.p_in_gate + ph.p_out_gate))
    return 1.0 / (1.0 + fire * ph.dead_slots), fire


def _arm_probabilities(ph: CorePhysics, mu: float, live: np.ndarray) -> tuple[float, float, float, float]:
    """(P_event_Z, P_error_Z, P_event_X, P_error_X) per pulse of intensity ``mu``.

    Error probabilities assume Alice used the arm's basis.
    """
    photon = -np.expm1(-mu * ph.eta * ph.routing)
    click = live * (photon + (1.0 - photon) * ph.p_in_gate)
    sig_err = np.full_like(photon, ph.z_error)
    sig_err[ph.n_z:] = ph.x_error
    err = live * (photon * sig_err + (1.0 - photon) * ph.p_in_gate * 0.5)
    none_before = 1.0
    p_err_z = 0.0
    for j in range(ph.n_z):
        p_err_z += none_before * err[j]
        none_before *= 1.0 - click[j]
    p_evt_z = 1.0 - none_before
    return p_evt_z, p_err_z, float(click[ph.n_z]), float(err[ph.n_z])


def _analytic(core: int, ph: CorePhysics, p: ProtocolParams, t_acq_s: float) -> TaggedBlockStats:
    pulses = p.clock_hz * t_acq_s
    live, fire = _live_fraction(ph, p)
    kw = {}
    for k, (mu, pk) in enumerate(zip(p.intensities, p.intensity_probs)):
        ez, erz, ex, erx = _arm_probabilities(ph, mu, live)
        name = ("mu1", "mu2")[k]
        kw[f"n_z_{name}"] = float(pulses * pk * p.p_z_alice * ez)
        kw[f"m_z_{name}"] = float(pulses * pk * p.p_z_alice * erz)
        kw[f"n_x_{name}"] = float(pulses * pk * (1.0 - p.p_z_alice) * ex)
        kw[f"m_x_{name}"] = float(pulses * pk * (1.0 - p.p_z_alice) * erx)
    stats = BlockStats(**kw, t_acq_s=t_acq_s, pulses_sent=int(round(pulses)))
    return TaggedBlockStats(core=core, stats=stats, saturated=_saturated(fire, ph))


def _saturated(fire: np.ndarray, ph: CorePhysics) -> bool:
    frac = fire * ph.dead_slots
    return bool(np.any(frac / (1.0 + frac) > SATURATION_DEAD_FRACTION))


# -- Monte Carlo mode ------------------------------------------------------


def _bernoulli_slots(rng: np.random.Generator, prob: float, n: int) -> np.ndarray:
    """Sorted indices in ``[0, n)`` of successes of ``n`` Bernoulli(prob) trials."""
    if prob <= 0.0 or n == 0:
        return np.empty(0, dtype=np.int64)
    if prob >= 1.0:
        return np.arange(n, dtype=np.int64)
    parts = []
    pos = -1
    batch = max(16, int(n * prob * 1.2) + 16)
    while True:
        gaps = rng.geometric(prob, size=batch)
        slots = pos + np.cumsum(gaps)
        parts.append(slots[slots < n])
        if slots[-1] >= n:
            break
        pos = int(slots[-1])
    return np.concatenate(parts)


def _dead_time_keep(slots: Sequence[int], dead: int, next_free: int) -> tuple[np.ndarray, int]:
    keep = np.zeros(len(slots), dtype=bool)
    step = dead + 1
    for i, s in enumerate(slots):
        if s >= next_free:
            keep[i] = True
            next_free = s + step
    return keep, next_free


class _Accumulator:
    def __init__(self) -> None:
        nb = MAX_TAGGED_PHOTONS + 1
        self.truth = np.zeros((2, 2, nb, len(ORIGINS), 2), dtype=np.int64)
        self.outcomes = np.zeros((nb, len(OUTCOMES)), dtype=np.int64)


def _mc_chunk(
    rng: np.random.Generator,
    ph: CorePhysics,
    p: ProtocolParams,
    n: int,
    offset: int,
    next_free: list[int],
    acc: _Accumulator,
) -> None:
    nb = MAX_TAGGED_PHOTONS + 1
    n_det = len(ph.routing)
    signal = rng.random(n) < p.p_mu1
    z_basis = rng.random(n) < p.p_z_alice
    photons = np.empty(n, dtype=np.int64)
    n_sig = int(signal.sum())
    photons[signal] = rng.poisson(p.mu1, n_sig)
    photons[~signal] = rng.poisson(p.mu2, n - n_sig)
    tag = np.minimum(photons, MAX_TAGGED_PHOTONS)
    intensity = (~signal).astype(np.int64)

    emitted = np.flatnonzero(photons)
    survived = rng.binomial(photons[emitted], ph.eta)
    hit = emitted[survived > 0]
    per_det = rng.multinomial(survived[survived > 0], ph.routing) if len(hit) else np.zeros((0, n_det), np.int64)

    # Per detector: sorted slots where it fires, with in-gate flag, photon flag, noise origin.
    registered_slots = []  # per detector: slots of live, in-gate clicks
    registered_origin = []
    blocked_slots = []
    out_gate_slots = []
    for j in range(n_det):
        ph_slots = hit[per_det[:, j] > 0]
        p_noise = ph.p_in_gate[j] + ph.p_out_gate[j]
        noise = _bernoulli_slots(rng, p_noise, n)
        in_gate = rng.random(len(noise)) < (ph.p_in_gate[j] / p_noise if p_noise > 0 else 0.0)
        rate = ph.dark_hz[j] + ph.leak_hz[j]
        is_dark = rng.random(len(noise)) < (ph.dark_hz[j] / rate if rate > 0 else 1.0)
        # Photon presence dominates a coincident noise arrival.
        noise_only = ~np.isin(noise, ph_slots, assume_unique=True)
        noise, in_gate, is_dark = noise[noise_only], in_gate[noise_only], is_dark[noise_only]

        slots = np.concatenate([ph_slots, noise])
        gate = np.concatenate([np.ones(len(ph_slots), bool), in_gate])
        origin = np.concatenate(
            [np.zeros(len(ph_slots), np.int64), np.where(is_dark, 1, 2)]
        )
        order = np.argsort(slots, kind="stable")
        slots, gate, origin = slots[order], gate[order], origin[order]
        keep, next_free[j] = _dead_time_keep((slots + offset).tolist(), ph.dead_slots, next_free[j])
        registered_slots.append(slots[keep & gate])
        registered_origin.append(origin[keep & gate])
        blocked_slots.append(slots[~keep & gate])
        out_gate_slots.append(slots[~gate])

    # Arm read-out: lowest-index registered detector wins.
    def arm(dets: range, basis_idx: int, sig_err: float) -> np.ndarray:
        slots = np.concatenate([registered_slots[j] for j in dets])
        origin = np.concatenate([registered_origin[j] for j in dets])
        det = np.concatenate([np.full(len(registered_slots[j]), j) for j in dets])
        order = np.lexsort((det, slots))
        slots, origin = slots[order], origin[order]
        first = np.ones(len(slots), dtype=bool)
        first[1:] = slots[1:] != slots[:-1]
        slots, origin = slots[first], origin[first]
        p_err = np.where(origin == 0, sig_err, 0.5)
        errors = rng.random(len(slots)) < p_err
        sifted = z_basis[slots] if basis_idx == 0 else ~z_basis[slots]
        s, o, e = slots[sifted], origin[sifted], errors[sifted]
        np.add.at(acc.truth, (basis_idx, intensity[s], tag[s], o, 0), 1)
        np.add.at(acc.truth, (basis_idx, intensity[s[e]], tag[s[e]], o[e], 1), 1)
        return slots

    z_events = arm(range(ph.n_z), 0, ph.z_error)
    x_events = arm(range(ph.n_z, n_det), 1, ph.x_error)

    outcome = np.full(n, 3, dtype=np.int64)
    outcome[np.concatenate(out_gate_slots)] = 2
    outcome[np.concatenate(blocked_slots)] = 1
    outcome[np.concatenate([z_events, x_events])] = 0
    np.add.at(acc.outcomes, (tag, outcome), 1)


def _monte_carlo(
    core: int, ph: CorePhysics, p: ProtocolParams, seed: int, pulses: int
) -> TaggedBlockStats:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(core,)))
    acc = _Accumulator()
    next_free = [0] * len(ph.routing)
    done = 0
    while done < pulses:
        n = min(CHUNK_PULSES, pulses - done)
        _mc_chunk(rng, ph, p, n, done, next_free, acc)
        done += n
    t = acc.truth
    kw = {}
    for k, name in enumerate(("mu1", "mu2")):
        for b, basis in enumerate(("z", "x")):
            kw[f"n_{basis}_{name}"] = int(t[b, k, :, :, 0].sum())
            kw[f"m_{basis}_{name}"] = int(t[b, k, :, :, 1].sum())
    stats = BlockStats(**kw, t_acq_s=pulses / p.clock_hz, pulses_sent=pulses)
    _, fire = _live_fraction(ph, p)
    return TaggedBlockStats(
        core=core, stats=stats, truth=acc.truth, outcomes=acc.outcomes, saturated=_saturated(fire, ph)
    )


# -- public entry points ---------------------------------------------------


def simulate_core(
    core: int,
    p: ProtocolParams,
    chan: ChannelSpec,
    rx: ReceiverSpec,
    mode: SimulationMode,
    background_rate_hz: float = 0.0,
) -> TaggedBlockStats:
    """Detection statistics of one core for one block.

    Monte Carlo runs draw every pulse from a generator seeded by
    ``(mode.seed, core)`` and return ground-truth tags; analytic runs
    return expected counts.
    """
    ph = core_physics(core, p, chan, rx, background_rate_hz)
    if isinstance(mode, Analytic):
        out = _analytic(core, ph, p, mode.t_acq_s)
    elif isinstance(mode, MonteCarlo):
        out = _monte_carlo(core, ph, p, mode.seed, mode.pulses)
    else:
        raise TypeError(f"unknown simulation mode {mode!r}")
    if out.saturated:
        warnings.warn(
            f"core {core}: detectors dead more than {SATURATION_DEAD_FRACTION:.0%} of the time",
            SaturationWarning,
            stacklevel=2,
        )
    return out


def _simulate_job(args) -> TaggedBlockStats:
    return simulate_core(*args)


def simulate_sdm(
    p: ProtocolParams,
    chan: ChannelSpec,
    rx: ReceiverSpec,
    mode: SimulationMode,
    background_rate_hz: Union[float, Sequence[float]] = 0.0,
    cores: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> list[TaggedBlockStats]:
    """Simulate every core (or ``cores``, in that order) independently.

    Results depend only on the configuration, the seed and the core index,
    never on ordering or on ``workers``.
    """
    cores = list(range(chan.n_cores)) if cores is None else list(cores)
    if isinstance(background_rate_hz, (int, float)):
        bg = [float(background_rate_hz)] * chan.n_cores
    else:
        bg = list(background_rate_hz)
        if len(bg) != chan.n_cores:
            raise ValueError(f"expected {chan.n_cores} background rates, got {len(bg)}")
    jobs = [(c, p, chan, rx, mode, bg[c]) for c in cores]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_simulate_job, jobs))
    return [_simulate_job(j) for j in jobs]


def z_detection_rate(p: ProtocolParams, chan: ChannelSpec, rx: ReceiverSpec) -> float:
    """Mean over cores of the expected sifted Z detections per second."""
    total = 0.0
    for core in range(chan.n_cores):
        ph = core_physics(core, p, chan, rx)
        total += _analytic(core, ph, p, 1.0).stats.n_z
    return total / chan.n_cores


def calibrate_to_target(
    target_detections_per_s: float,
    p: ProtocolParams,
    chan: ChannelSpec,
    rx: ReceiverSpec,
) -> ReceiverSpec:
    """Receiver whose ``calibration_scale`` makes the mean Z rate hit the target.

    The scale multiplies ``eta_bob`` and must lie in ``(0, 1]``.
    """
    if not target_detections_per_s > 0:
        raise ValueError(f"target must be > 0, got {target_detections_per_s}")

    def rate(scale: float) -> float:
        return z_detection_rate(p, chan, replace(rx, calibration_scale=scale))

    hi = rate(1.0)
    if target_detections_per_s > hi:
        raise InfeasibleError(
            f"target {target_detections_per_s:.4g}/s exceeds the {hi:.4g}/s reachable "
            "with an unscaled receiver"
        )
    lo_scale = 1e-12
    if target_detections_per_s <= rate(lo_scale):
        raise InfeasibleError(
            f"target {target_detections_per_s:.4g}/s is below the noise-only detection rate"
        )
    if math.isclose(hi, target_detections_per_s, rel_tol=1e-12):
        return replace(rx, calibration_scale=1.0)
    scale = brentq(lambda s: rate(s) - target_detections_per_s, lo_scale, 1.0, xtol=1e-15, rtol=1e-12)
    return replace(rx, calibration_scale=float(scale))
