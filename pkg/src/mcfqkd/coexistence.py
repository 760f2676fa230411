"""Classical on-off-keying channel sharing each core with the quantum channel.

The classical receiver is described by a single calibrated Gaussian-Q model,
``BER = erfc(a0 * sqrt(P / P_sens)) / 2`` with ``a0`` chosen so that the
sensitivity power gives exactly the reference BER. Leakage into the quantum
band is the classical power seen by the core, reduced by the WDM filter
extinction, counted as photons at the quantum wavelength.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from scipy.special import erfc, erfcinv

from .finitekey import FiniteKeyResult, finite_key
from .model import ChannelSpec, ProtocolParams, ReceiverSpec, validate
from .quantities import OpticalPower, dbm_to_watts, power_to_photon_flux, watts_to_dbm
from .simulator import Analytic, SimulationMode, TaggedBlockStats, simulate_sdm

__all__ = [
    "ClassicalChannelSpec",
    "CoexistenceCore",
    "classical_ber",
    "leakage_background",
    "core_classical_power",
    "coexistence_run",
    "QUANTUM_WAVELENGTH_NM",
    "DEFAULT_WDM_INSERTION_DB",
]

QUANTUM_WAVELENGTH_NM = 1550.0
DEFAULT_WDM_INSERTION_DB = 3.0


@dataclass(frozen=True)
class ClassicalChannelSpec:
    """Per-core 10 Gbit/s OOK channel.

    ``rx_power_dbm`` is the classical power received per core (one value for
    all cores, or one per core); it is the primary knob, launch powers are
    not modelled.
    """

    bitrate_bps: float = 10e9
    wavelength_nm: float = 1558.0
    rx_power_dbm: Union[float, tuple[float, ...]] = -34.0
    wdm_extinction_db: float = 80.0
    sensitivity_dbm: float = -34.0
    sensitivity_ber: float = 1e-9

    def rx_power(self, core: int) -> OpticalPower:
        dbm = self.rx_power_dbm if isinstance(self.rx_power_dbm, (int, float)) else self.rx_power_dbm[core]
        return OpticalPower(float(dbm), self.wavelength_nm)

    def violations(self) -> list[str]:
        out = []
        if not self.bitrate_bps > 0:
            out.append(f"bitrate_bps must be > 0 (got {self.bitrate_bps})")
        if not self.wavelength_nm > 0:
            out.append(f"wavelength_nm must be > 0 (got {self.wavelength_nm})")
        if math.isnan(self.wdm_extinction_db) or self.wdm_extinction_db < 0:
            out.append(f"wdm_extinction_db must be >= 0 (got {self.wdm_extinction_db})")
        if not math.isfinite(self.sensitivity_dbm):
            out.append(f"sensitivity_dbm must be finite (got {self.sensitivity_dbm})")
        if not 0.0 < self.sensitivity_ber < 0.5:
            out.append(f"sensitivity_ber must be in (0, 0.5) (got {self.sensitivity_ber})")
        powers = [self.rx_power_dbm] if isinstance(self.rx_power_dbm, (int, float)) else self.rx_power_dbm
        for v in powers:
            if math.isnan(v) or v == math.inf:
                out.append(f"rx_power_dbm must be finite or -inf (got {v})")
        return out


def classical_ber(rx_power: OpticalPower, spec: ClassicalChannelSpec) -> float:
    """Bit error rate of the OOK receiver at ``rx_power``."""
    if rx_power.dbm == spec.sensitivity_dbm:
        return spec.sensitivity_ber
    a0 = erfcinv(2.0 * spec.sensitivity_ber)
    ratio = 10.0 ** ((rx_power.dbm - spec.sensitivity_dbm) / 10.0) if rx_power.dbm > -math.inf else 0.0
    return float(0.5 * erfc(a0 * math.sqrt(ratio)))


def leakage_background(
    rx_classical: OpticalPower,
    extinction_db: float,
    eta_det: float = 1.0,
    wavelength_nm: float = QUANTUM_WAVELENGTH_NM,
) -> float:
    """Click rate (1/s) at the quantum detectors caused by classical leakage.

    With ``eta_det = 1`` this is the leaked photon flux itself.
    """
    if math.isnan(extinction_db) or extinction_db < 0:
        raise ValueError(f"extinction must be >= 0 dB, got {extinction_db}")
    if extinction_db == math.inf or rx_classical.dbm == -math.inf:
        return 0.0
    leaked = OpticalPower(rx_classical.dbm - extinction_db, wavelength_nm)
    return power_to_photon_flux(leaked) * eta_det


def core_classical_power(core: int, chan: ChannelSpec, cspec: ClassicalChannelSpec) -> OpticalPower:
    """Classical power reaching core ``core``'s WDM filter, own plus cross-talk."""
    watts = 0.0
    for j in range(chan.n_cores):
        pw = dbm_to_watts(cspec.rx_power(j).dbm)
        if j == core:
            watts += pw
        else:
            watts += pw * 10.0 ** (-chan.crosstalk_db[core][j] / 10.0)
    return OpticalPower(watts_to_dbm(watts), cspec.wavelength_nm)


@dataclass(frozen=True)
class CoexistenceCore:
    core: int
    key: FiniteKeyResult
    ber: float
    background_hz: float
    stats: TaggedBlockStats


def coexistence_run(
    p: ProtocolParams,
    chan: ChannelSpec,
    rx: ReceiverSpec,
    cspec: ClassicalChannelSpec,
    mode: Optional[SimulationMode] = None,
    workers: int = 1,
) -> list[CoexistenceCore]:
    """Quantum key and classical BER of every core with co-propagating classical light.

    ``rx`` should already include the WDM filter insertion loss
    (``wdm_insertion_db``). ``mode`` defaults to a 30 s analytic block.
    """
    validate(p, chan, rx, cspec)
    mode = mode or Analytic(30.0)
    powers = [core_classical_power(c, chan, cspec) for c in range(chan.n_cores)]
    background = [leakage_background(pw, cspec.wdm_extinction_db, rx.eta_det) for pw in powers]
    tagged = simulate_sdm(p, chan, rx, mode, background_rate_hz=background, workers=workers)
    return [
        CoexistenceCore(
            core=t.core,
            key=finite_key(t.stats, p),
            ber=classical_ber(cspec.rx_power(t.core), cspec),
            background_hz=background[t.core],
            stats=t,
        )
        for t in tagged
    ]
