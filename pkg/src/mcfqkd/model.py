"""Configuration types for the protocol, the multicore channel and the receiver.

All types are frozen dataclasses. Construction does not check invariants;
:func:`validate` does, and reports every violation at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence, Union

import numpy as np

__all__ = [
    "ConfigError",
    "ProtocolParams",
    "ChannelSpec",
    "ReceiverSpec",
    "BlockStats",
    "INTENSITIES",
    "validate",
    "effective_core_loss",
    "default_excess_db",
    "uniform_crosstalk",
]

INTENSITIES = ("mu1", "mu2")
DEFAULT_EXCESS_SEED = 20200201


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


def _in_open_unit(x: float) -> bool:
    return 0.0 < x < 1.0


def _in_half_open_unit(x: float) -> bool:
    return 0.0 < x <= 1.0


@dataclass(frozen=True)
class ProtocolParams:
    """Source and post-processing constants.

    ``mu1``/``mu2`` are the signal and decoy mean photon numbers per pulse,
    ``p_mu1`` the probability of sending the signal intensity and
    ``p_z_alice`` the probability of encoding in the computational basis.
    """

    clock_hz: float = 595e6
    mu1: float = 0.11
    mu2: float = 0.07
    p_mu1: float = 0.7
    p_z_alice: float = 0.9
    eps_sec: float = 1e-9
    eps_corr: float = 1e-15
    f_ec: float = 1.16

    @property
    def p_mu2(self) -> float:
        return 1.0 - self.p_mu1

    @property
    def intensities(self) -> tuple[float, float]:
        return (self.mu1, self.mu2)

    @property
    def intensity_probs(self) -> tuple[float, float]:
        return (self.p_mu1, self.p_mu2)

    @property
    def period_s(self) -> float:
        return 1.0 / self.clock_hz

    def violations(self) -> list[str]:
        out = []
        if not self.clock_hz > 0:
            out.append(f"clock_hz must be > 0 (got {self.clock_hz})")
        if not 0.0 < self.mu1 < 1.0:
            out.append(f"mu1 must be in (0, 1) (got {self.mu1})")
        if not 0.0 < self.mu2:
            out.append(f"mu2 must be > 0 (got {self.mu2})")
        if not self.mu2 < self.mu1:
            out.append(
                f"decoy intensity mu2={self.mu2} must be strictly below signal mu1={self.mu1}; "
                "the decoy method is degenerate otherwise"
            )
        for name in ("p_mu1", "p_z_alice", "eps_sec", "eps_corr"):
            v = getattr(self, name)
            if not _in_open_unit(v):
                out.append(f"{name} must be in (0, 1) (got {v})")
        if not self.f_ec >= 1.0:
            out.append(f"f_ec must be >= 1 (got {self.f_ec})")
        return out


def default_excess_db(
    n_cores: int, low: float = 0.0, high: float = 0.5, seed: int = DEFAULT_EXCESS_SEED
) -> tuple[float, ...]:
    """Per-core excess losses drawn uniformly in ``[low, high]`` dB with a fixed seed."""
    rng = np.random.default_rng(seed)
    return tuple(round(float(x), 6) for x in rng.uniform(low, high, size=n_cores))


def uniform_crosstalk(n_cores: int, isolation_db: float = 60.0) -> tuple[tuple[float, ...], ...]:
    """Cross-talk matrix with the same isolation between every pair of cores.

    The diagonal holds ``inf`` (no self-coupling).
    """
    return tuple(
        tuple(math.inf if i == j else float(isolation_db) for j in range(n_cores))
        for i in range(n_cores)
    )


@dataclass(frozen=True)
class ChannelSpec:
    """Multicore fibre link.

    Core ``i`` sees ``length_km * atten_db_per_km + fan_io_db +
    per_core_excess_db[i] + extra_attenuation_db``. ``crosstalk_db[i][j]`` is
    the isolation in dB of light leaking from core ``j`` into core ``i``.
    """

    n_cores: int = 37
    length_km: float = 7.9
    atten_db_per_km: float = 0.27
    fan_io_db: float = 1.6
    per_core_excess_db: tuple[float, ...] = field(default_factory=lambda: default_excess_db(37))
    extra_attenuation_db: float = 0.0
    crosstalk_db: tuple[tuple[float, ...], ...] = field(default_factory=lambda: uniform_crosstalk(37))

    @classmethod
    def with_cores(cls, n_cores: int, **kw) -> "ChannelSpec":
        kw.setdefault("per_core_excess_db", default_excess_db(n_cores))
        kw.setdefault("crosstalk_db", uniform_crosstalk(n_cores))
        return cls(n_cores=n_cores, **kw)

    @property
    def base_loss_db(self) -> float:
        """Fibre plus fan-in/fan-out loss, common to every core."""
        return self.length_km * self.atten_db_per_km + self.fan_io_db

    def subset(self, cores: Sequence[int]) -> "ChannelSpec":
        """Channel restricted to ``cores`` (in the given order)."""
        cores = list(cores)
        return replace(
            self,
            n_cores=len(cores),
            per_core_excess_db=tuple(self.per_core_excess_db[c] for c in cores),
            crosstalk_db=tuple(tuple(self.crosstalk_db[i][j] for j in cores) for i in cores),
        )

    def violations(self) -> list[str]:
        out = []
        if not (isinstance(self.n_cores, int) and self.n_cores >= 1):
            out.append(f"n_cores must be an integer >= 1 (got {self.n_cores})")
            return out
        if not self.length_km >= 0:
            out.append(f"length_km must be >= 0 (got {self.length_km})")
        for name in ("atten_db_per_km", "fan_io_db", "extra_attenuation_db"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{name} must be a finite loss >= 0 dB (got {v})")
        if len(self.per_core_excess_db) != self.n_cores:
            out.append(
                f"per_core_excess_db has {len(self.per_core_excess_db)} entries, expected {self.n_cores}"
            )
        for i, v in enumerate(self.per_core_excess_db):
            if not (math.isfinite(v) and v >= 0):
                out.append(f"per_core_excess_db[{i}] must be a finite loss >= 0 dB (got {v})")
        xt = self.crosstalk_db
        if len(xt) != self.n_cores or any(len(row) != self.n_cores for row in xt):
            out.append(f"crosstalk_db must be a {self.n_cores}x{self.n_cores} matrix")
        else:
            for i, row in enumerate(xt):
                for j, v in enumerate(row):
                    if i == j:
                        if v != math.inf:
                            out.append(f"crosstalk_db[{i}][{i}] must be the no-self-coupling sentinel (inf/null)")
                    elif math.isnan(v) or v < 0:
                        out.append(f"crosstalk_db[{i}][{j}] must be >= 0 dB (got {v})")
        return out


@dataclass(frozen=True)
class ReceiverSpec:
    """Bob's receiver.

    The computational (Z) arm takes ``basis_split_z`` of the light and feeds
    ``n_z_detectors`` detectors through a balanced splitter; the Fourier (X)
    arm feeds a single detector behind a delay-line interferometer of
    visibility ``visibility``. ``z_error`` is the intrinsic time-bin error
    probability of a photon detected in the Z arm. ``calibration_scale``
    multiplies ``eta_bob`` and absorbs unmodelled receiver losses (see
    :func:`mcfqkd.simulator.calibrate_to_target`).
    """

    eta_bob: float = 0.85
    eta_det: float = 0.6
    basis_split_z: float = 0.9
    n_z_detectors: int = 4
    dark_rate_hz: float = 100.0
    dead_time_s: float = 50e-9
    gate_width_s: float = 300e-12
    visibility: float = 0.958
    z_error: float = 0.0067
    wdm_insertion_db: float = 0.0
    calibration_scale: float = 1.0

    @property
    def eta_receiver(self) -> float:
        """Receiver transmissivity after calibration, excluding the detectors."""
        return self.eta_bob * self.calibration_scale

    @property
    def n_detectors(self) -> int:
        return self.n_z_detectors + 1

    def routing(self) -> np.ndarray:
        """Fraction of arriving light reaching each detector (Z detectors first, X last)."""
        z = self.basis_split_z / self.n_z_detectors
        return np.array([z] * self.n_z_detectors + [1.0 - self.basis_split_z])

    def violations(self) -> list[str]:
        out = []
        for name in ("eta_bob", "eta_det", "basis_split_z", "visibility", "calibration_scale"):
            v = getattr(self, name)
            if not _in_half_open_unit(v):
                out.append(f"{name} must be in (0, 1] (got {v})")
        if not (isinstance(self.n_z_detectors, int) and self.n_z_detectors >= 1):
            out.append(f"n_z_detectors must be an integer >= 1 (got {self.n_z_detectors})")
        for name in ("dark_rate_hz", "dead_time_s", "gate_width_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{name} must be finite and >= 0 (got {v})")
        if not 0.0 <= self.z_error <= 0.5:
            out.append(f"z_error must be in [0, 0.5] (got {self.z_error})")
        if not (math.isfinite(self.wdm_insertion_db) and self.wdm_insertion_db >= 0):
            out.append(f"wdm_insertion_db must be a finite loss >= 0 dB (got {self.wdm_insertion_db})")
        return out


@dataclass(frozen=True)
class BlockStats:
    """Sifted detections and errors for one acquisition block of one core.

    Counts may be fractional when they are expectations rather than
    observations.
    """

    n_z_mu1: float
    m_z_mu1: float
    n_x_mu1: float
    m_x_mu1: float
    n_z_mu2: float
    m_z_mu2: float
    n_x_mu2: float
    m_x_mu2: float
    t_acq_s: float
    pulses_sent: int

    @property
    def n_z(self) -> float:
        return self.n_z_mu1 + self.n_z_mu2

    @property
    def m_z(self) -> float:
        return self.m_z_mu1 + self.m_z_mu2

    @property
    def n_x(self) -> float:
        return self.n_x_mu1 + self.n_x_mu2

    @property
    def m_x(self) -> float:
        return self.m_x_mu1 + self.m_x_mu2

    @property
    def qber_z(self) -> float:
        return self.m_z / self.n_z if self.n_z > 0 else 0.0

    @property
    def qber_x(self) -> float:
        return self.m_x / self.n_x if self.n_x > 0 else 0.0

    def count(self, quantity: str, basis: str, k: int) -> float:
        """``count("n", "z", 0)`` is ``n_z_mu1``."""
        return getattr(self, f"{quantity}_{basis}_{INTENSITIES[k]}")

    def scaled(self, factor: float) -> "BlockStats":
        """Expected statistics of a block ``factor`` times longer."""
        kw = {f.name: getattr(self, f.name) * factor for f in fields(self)}
        kw["pulses_sent"] = int(round(self.pulses_sent * factor))
        return BlockStats(**kw)

    def violations(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{f.name} must be finite and >= 0 (got {v})")
        if out:
            return out
        for basis in ("z", "x"):
            for k in range(2):
                n, m = self.count("n", basis, k), self.count("m", basis, k)
                if m > n:
                    out.append(f"m_{basis}_{INTENSITIES[k]}={m} exceeds n_{basis}_{INTENSITIES[k]}={n}")
        if not self.t_acq_s > 0:
            out.append(f"t_acq_s must be > 0 (got {self.t_acq_s})")
        return out


Validatable = Union[ProtocolParams, ChannelSpec, ReceiverSpec, BlockStats]


def validate(*configs: Validatable):
    """Check every invariant of the given configuration objects.

    Returns the single object (or the tuple of objects) unchanged; raises
    :class:`ConfigError` listing all violations otherwise.
    """
    problems = []
    for cfg in configs:
        label = type(cfg).__name__
        problems.extend(f"{label}: {p}" for p in cfg.violations())
    if problems:
        raise ConfigError(problems)
    return configs[0] if len(configs) == 1 else configs


def effective_core_loss(chan: ChannelSpec, core: int, rx: ReceiverSpec) -> float:
    """Total loss in dB from Alice's core input to Bob's receiver input."""
    if not 0 <= core < chan.n_cores:
        raise IndexError(f"core {core} out of range for a {chan.n_cores}-core fibre")
    return (
        chan.length_km * chan.atten_db_per_km
        + chan.fan_io_db
        + chan.per_core_excess_db[core]
        + chan.extra_attenuation_db
        + rx.wdm_insertion_db
    )
