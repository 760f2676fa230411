"""Link-budget arithmetic: decibels, optical power and photon flux.

Public functions take losses in dB and powers in dBm; linear values only
appear as return values or internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import Planck as PLANCK_J_S
from scipy.constants import speed_of_light as SPEED_OF_LIGHT_M_S

__all__ = [
    "OpticalPower",
    "PLANCK_J_S",
    "SPEED_OF_LIGHT_M_S",
    "db_to_linear",
    "linear_to_db",
    "loss_to_distance",
    "dbm_to_watts",
    "watts_to_dbm",
    "photon_energy_j",
    "power_to_photon_flux",
    "power_to_mean_photon_number",
]


@dataclass(frozen=True)
class OpticalPower:
    """Optical power in dBm at a given vacuum wavelength.

    ``dbm = -inf`` is the no-light case and is allowed.
    """

    dbm: float
    wavelength_nm: float = 1550.0

    def __post_init__(self) -> None:
        if math.isnan(self.dbm) or self.dbm == math.inf:
            raise ValueError(f"power must be finite or -inf dBm, got {self.dbm}")
        if not self.wavelength_nm > 0:
            raise ValueError(f"wavelength_nm must be > 0, got {self.wavelength_nm}")

    @property
    def watts(self) -> float:
        return dbm_to_watts(self.dbm)


def _check_loss(db: float, name: str = "loss") -> None:
    if not math.isfinite(db):
        raise ValueError(f"{name} must be finite, got {db}")
    if db < 0:
        raise ValueError(f"{name} must be >= 0 dB, got {db}")


def db_to_linear(loss_db: float) -> float:
    """Transmissivity of an attenuation given in dB."""
    _check_loss(loss_db)
    return 10.0 ** (-loss_db / 10.0)


def linear_to_db(eta: float) -> float:
    """Attenuation in dB of a transmissivity in (0, 1]."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmissivity must be in (0, 1], got {eta}")
    return -10.0 * math.log10(eta)


def loss_to_distance(channel_loss_db: float, fan_io_db: float, coeff_db_per_km: float) -> float:
    """Fibre length reachable with a given total channel loss.

    The fixed fan-in/fan-out loss is removed first and the remainder is
    divided by the per-km attenuation coefficient.
    """
    _check_loss(channel_loss_db, "channel loss")
    _check_loss(fan_io_db, "fan-in/fan-out loss")
    if not coeff_db_per_km > 0:
        raise ValueError(f"attenuation coefficient must be > 0, got {coeff_db_per_km}")
    if channel_loss_db < fan_io_db:
        raise ValueError(
            f"channel loss {channel_loss_db} dB is below the fixed fan-in/fan-out "
            f"loss {fan_io_db} dB; no fibre length reaches it"
        )
    return (channel_loss_db - fan_io_db) / coeff_db_per_km


def dbm_to_watts(dbm: float) -> float:
    if dbm == -math.inf:
        return 0.0
    return 1e-3 * 10.0 ** (dbm / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts < 0:
        raise ValueError(f"power must be >= 0 W, got {watts}")
    if watts == 0:
        return -math.inf
    return 10.0 * math.log10(watts / 1e-3)


def photon_energy_j(wavelength_nm: float) -> float:
    return PLANCK_J_S * SPEED_OF_LIGHT_M_S / (wavelength_nm * 1e-9)


def power_to_photon_flux(p: OpticalPower) -> float:
    """Photons per second carried by ``p``."""
    return p.watts / photon_energy_j(p.wavelength_nm)


def power_to_mean_photon_number(p: OpticalPower, clock_hz: float) -> float:
    """Mean photons per pulse for a pulse train of average power ``p``."""
    if not clock_hz > 0:
        raise ValueError(f"clock_hz must be > 0, got {clock_hz}")
    return power_to_photon_flux(p) / clock_hz
