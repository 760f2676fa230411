"""Per-core key extraction and concatenation of the parallel keys.

The keys produced here are simulation artifacts: uniformly random bits of the
length the finite-key analysis allows. No error correction or privacy
amplification is run, so they are NOT secure key material.

Key file format
---------------
``<name>.key`` is binary:

* bytes 0-7: bit length ``L`` as an unsigned 64-bit big-endian integer;
* then ``ceil(L / 8)`` bytes of key, most significant bit first, the unused
  low bits of the last byte set to zero.

``<name>.key.manifest.txt`` is UTF-8 text: one comment line starting with
``#`` followed by one ``core_id offset length`` line per core, space
separated, in key order.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .finitekey import FiniteKeyResult
from .simulator import TaggedBlockStats

__all__ = [
    "CoreKey",
    "MultiplexedKey",
    "extract_core_key",
    "multiplex",
    "projected_key_bits",
    "write_key",
    "read_key",
]

KEY_STREAM = 0x6B6579  # separates key draws from detection draws for the same seed


def _nbytes(nbits: int) -> int:
    return (nbits + 7) // 8


def _mask_tail(packed: np.ndarray, nbits: int) -> np.ndarray:
    r = nbits % 8
    if r and len(packed):
        packed[-1] &= (0xFF << (8 - r)) & 0xFF
    return packed


@dataclass(frozen=True, eq=False)
class CoreKey:
    """Key of one core, stored packed (MSB first)."""

    core_id: int
    packed: np.ndarray
    declared_length: int

    def __post_init__(self) -> None:
        if self.declared_length < 0:
            raise ValueError("declared_length must be >= 0")
        if len(self.packed) != _nbytes(self.declared_length):
            raise ValueError(
                f"{len(self.packed)} bytes cannot hold exactly {self.declared_length} bits"
            )

    def __len__(self) -> int:
        return self.declared_length

    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.declared_length)


@dataclass(frozen=True, eq=False)
class MultiplexedKey:
    packed: np.ndarray
    length: int
    manifest: list[tuple[int, int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return self.length

    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.length)


def extract_core_key(stats: TaggedBlockStats, fk: FiniteKeyResult, seed: int) -> CoreKey:
    """Sifted Z bits of one core, truncated to the finite-key length.

    The sifted bits are drawn from a generator seeded by ``(seed, core)``;
    only the first ``floor(secret_bits)`` of them are materialised.
    """
    length = int(math.floor(fk.secret_bits))
    n_z = stats.stats.n_z
    if length > 0 and length >= n_z:
        raise ValueError(
            f"secret length {length} is not below the {n_z:g} sifted bits of core {stats.core}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(KEY_STREAM, stats.core)))
    packed = np.frombuffer(rng.bytes(_nbytes(length)), dtype=np.uint8).copy()
    return CoreKey(stats.core, _mask_tail(packed, length), length)


def multiplex(keys: Sequence[CoreKey], order: Optional[Sequence[int]] = None) -> MultiplexedKey:
    """Concatenate core keys in ``order`` (core ids; default: as given)."""
    by_id = {}
    for k in keys:
        if k.core_id in by_id:
            raise ValueError(f"duplicate core_id {k.core_id}")
        by_id[k.core_id] = k
    if order is None:
        ordered = list(keys)
    else:
        if sorted(order) != sorted(by_id):
            raise ValueError("order must list every core_id exactly once")
        ordered = [by_id[c] for c in order]

    total = sum(k.declared_length for k in ordered)
    out = np.zeros(_nbytes(total), dtype=np.uint8)
    manifest = []
    offset = 0
    for k in ordered:
        n = k.declared_length
        manifest.append((k.core_id, offset, n))
        if n:
            byte, r = divmod(offset, 8)
            src = k.packed
            if r == 0:
                out[byte:byte + len(src)] |= src
            else:
                out[byte:byte + len(src)] |= src >> r
                spill = (src << (8 - r)).astype(np.uint8)
                room = len(out) - (byte + 1)
                out[byte + 1:byte + 1 + min(len(src), room)] |= spill[:room]
        offset += n
    return MultiplexedKey(out, total, manifest)


def projected_key_bits(rate_bps: float, n_cores: int, duration_s: float) -> float:
    """Key expected from ``n_cores`` cores each running at ``rate_bps`` for ``duration_s``."""
    return rate_bps * n_cores * duration_s


def write_key(key: MultiplexedKey, path: Path) -> Path:
    """Write ``path`` and its manifest sidecar; returns the sidecar path."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">Q", key.length))
        fh.write(key.packed.tobytes())
    sidecar = path.with_name(path.name + ".manifest.txt")
    lines = ["# core_id offset length"]
    lines += [f"{c} {o} {n}" for c, o, n in key.manifest]
    sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return sidecar


def read_key(path: Path) -> MultiplexedKey:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated header")
    (length,) = struct.unpack(">Q", raw[:8])
    body = np.frombuffer(raw[8:], dtype=np.uint8).copy()
    if len(body) != _nbytes(length):
        raise ValueError(f"{path}: {len(body)} bytes of key for a {length}-bit header")
    manifest = []
    sidecar = path.with_name(path.name + ".manifest.txt")
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            if line.strip() and not line.startswith("#"):
                c, o, n = (int(x) for x in line.split())
                manifest.append((c, o, n))
    return MultiplexedKey(body, length, manifest)
