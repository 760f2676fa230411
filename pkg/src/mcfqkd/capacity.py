"""Repeaterless capacity bounds and the parallel vs high-dimensional encoding comparison.

Rates here are asymptotic and normalised per pulse (bits per clock cycle).
Both encodings use the same lumped detection efficiency
``eta_tot = 10^(-link_db/10) * eta_bob * eta_det`` and the same infinite-decoy
single-photon estimate: single-photon gain ``Q1 = mu exp(-mu) eta_tot`` and
overall gain ``Q = 1 - exp(-mu eta_tot)``.

* parallel, ``N`` cores: ``N * sift * max(0, Q1 (1 - h(q)) - f_ec Q h(q))``
* high-dimensional, dimension ``d``:
  ``sift * Q1 * max(0, log2 d - 2 H_d(q))`` with
  ``H_d(q) = -q log2(q / (d - 1)) - (1 - q) log2(1 - q)``.

The high-dimensional photon is charged no extra interferometric loss, which
favours it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .finitekey import binary_entropy
from .quantities import db_to_linear

__all__ = [
    "EncodingParams",
    "EncodingComparison",
    "plob_single",
    "plob_mcf",
    "dary_entropy",
    "parallel_rate",
    "hid_rate",
    "crossover_error",
    "compare_encodings",
]


@dataclass(frozen=True)
class EncodingParams:
    link_db: float = 3.75
    eta_bob: float = 0.85
    eta_det: float = 0.6
    mu: float = 0.5
    f_ec: float = 1.16
    sift: float = 0.5

    @property
    def eta_tot(self) -> float:
        return db_to_linear(self.link_db) * self.eta_bob * self.eta_det

    @property
    def single_photon_gain(self) -> float:
        return self.mu * math.exp(-self.mu) * self.eta_tot

    @property
    def gain(self) -> float:
        return -math.expm1(-self.mu * self.eta_tot)


def plob_single(eta: float) -> float:
    """Repeaterless secret-key capacity ``-log2(1 - eta)`` of a pure-loss channel."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"transmissivity must be in [0, 1), got {eta}")
    # log1p keeps the bound strictly increasing for tiny eta
    return -math.log1p(-eta) / math.log(2.0)


def plob_mcf(n_cores: int, eta: float) -> float:
    if n_cores < 1:
        raise ValueError(f"n_cores must be >= 1, got {n_cores}")
    return n_cores * plob_single(eta)


def dary_entropy(q: float, d: int) -> float:
    """Entropy of a d-ary symmetric error channel with total error ``q``."""
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return math.log2(d - 1)
    return -q * (math.log2(q) - math.log2(d - 1)) - (1.0 - q) * math.log2(1.0 - q)


def parallel_rate(n_modes: int, q: float, params: EncodingParams = EncodingParams()) -> float:
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q must be in [0, 0.5], got {q}")
    h = binary_entropy(q)
    single = params.sift * (params.single_photon_gain * (1.0 - h) - params.f_ec * params.gain * h)
    return n_modes * max(single, 0.0)


def hid_rate(dimension: int, q: float, params: EncodingParams = EncodingParams()) -> float:
    if dimension < 2:
        raise ValueError(f"dimension must be >= 2, got {dimension}")
    if not 0.0 <= q <= 1.0 - 1.0 / dimension:
        raise ValueError(f"q must be in [0, {1 - 1 / dimension:g}], got {q}")
    frac = math.log2(dimension) - 2.0 * dary_entropy(q, dimension)
    return params.sift * params.single_photon_gain * max(frac, 0.0)


def crossover_error(n_modes: int, params: EncodingParams = EncodingParams()) -> Optional[float]:
    """Smallest error rate at which high-dimensional encoding beats parallel encoding."""
    diff = lambda q: hid_rate(n_modes, q, params) - parallel_rate(n_modes, q, params)
    q_hi = min(0.5, 1.0 - 1.0 / n_modes)
    grid = np.linspace(0.0, q_hi, 2001)
    vals = [diff(q) for q in grid]
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa <= 0.0 < fb:
            return float(brentq(diff, a, b, xtol=1e-14)) if fa < 0 else float(a)
    return None


@dataclass(frozen=True)
class EncodingComparison:
    q_grid: tuple[float, ...]
    n_modes: int
    parallel_rate: tuple[float, ...]
    hid_rate: tuple[float, ...]
    plob: float
    q_cross: Optional[float]


def compare_encodings(
    n_modes: Sequence[int] = (2, 4, 8, 16, 32),
    q_grid: Optional[Sequence[float]] = None,
    params: EncodingParams = EncodingParams(),
) -> list[EncodingComparison]:
    """Parallel and high-dimensional rate curves for each mode count."""
    q_grid = tuple(float(q) for q in (np.linspace(0.0, 0.5, 101) if q_grid is None else q_grid))
    eta = params.eta_tot
    out = []
    for n in n_modes:
        hid_q = [min(q, 1.0 - 1.0 / n) for q in q_grid]
        out.append(
            EncodingComparison(
                q_grid=q_grid,
                n_modes=n,
                parallel_rate=tuple(parallel_rate(n, min(q, 0.5), params) for q in q_grid),
                hid_rate=tuple(hid_rate(n, q, params) for q in hid_q),
                plob=plob_mcf(n, eta),
                q_cross=crossover_error(n, params),
            )
        )
    return out
