"""JSON configuration files.

A configuration file holds four sections, ``protocol``, ``channel``,
``receiver`` and ``classical``, whose keys are the field names of
:class:`~mcfqkd.model.ProtocolParams`, :class:`~mcfqkd.model.ChannelSpec`,
:class:`~mcfqkd.model.ReceiverSpec` and
:class:`~mcfqkd.coexistence.ClassicalChannelSpec`. Missing keys take the
dataclass defaults. The structure is described by ``config.schema.json``
shipped with the package.

Non-finite values are encoded as ``null``: on the cross-talk diagonal (no
self-coupling) and for ``classical.rx_power_dbm`` (no classical light).
``crosstalk_db`` is either a full matrix or ``{"uniform_db": x}``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Union

import jsonschema

from .coexistence import ClassicalChannelSpec
from .model import ChannelSpec, ConfigError, ProtocolParams, ReceiverSpec, validate

__all__ = [
    "Config",
    "SCHEMA_ID",
    "load_config",
    "load_preset",
    "dump_config",
    "save_config",
    "config_from_dict",
    "config_digest",
    "schema",
    "PRESETS",
]

SCHEMA_ID = "mcfqkd-config/1"
PRESETS = ("paper-defaults",)


@dataclass(frozen=True)
class Config:
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    receiver: ReceiverSpec = field(default_factory=ReceiverSpec)
    classical: ClassicalChannelSpec = field(default_factory=ClassicalChannelSpec)

    def validated(self) -> "Config":
        validate(self.protocol, self.channel, self.receiver, self.classical)
        return self


def schema() -> dict:
    text = resources.files("mcfqkd").joinpath("data/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _crosstalk_to_json(xt) -> Any:
    n = len(xt)
    off = {xt[i][j] for i in range(n) for j in range(n) if i != j}
    diag_ok = all(xt[i][i] == math.inf for i in range(n))
    if diag_ok and len(off) == 1 and n > 1:
        return {"uniform_db": off.pop()}
    return [[None if v == math.inf else v for v in row] for row in xt]


def _crosstalk_from_json(raw, n_cores: int):
    if isinstance(raw, dict):
        iso = float(raw["uniform_db"])
        return tuple(
            tuple(math.inf if i == j else iso for j in range(n_cores)) for i in range(n_cores)
        )
    return tuple(tuple(math.inf if v is None else float(v) for v in row) for row in raw)


def dump_config(cfg: Config) -> dict:
    """Plain JSON-ready dictionary for ``cfg``."""
    ch = asdict(cfg.channel)
    ch["per_core_excess_db"] = list(cfg.channel.per_core_excess_db)
    ch["crosstalk_db"] = _crosstalk_to_json(cfg.channel.crosstalk_db)
    cl = asdict(cfg.classical)
    rx_dbm = cfg.classical.rx_power_dbm
    if isinstance(rx_dbm, (int, float)):
        cl["rx_power_dbm"] = None if rx_dbm == -math.inf else rx_dbm
    else:
        cl["rx_power_dbm"] = [None if v == -math.inf else v for v in rx_dbm]
    return {
        "schema": SCHEMA_ID,
        "protocol": asdict(cfg.protocol),
        "channel": ch,
        "receiver": asdict(cfg.receiver),
        "classical": cl,
    }


def _section(cls, raw: dict, path: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError([f"{path}: unknown key(s) {', '.join(unknown)}"])
    return dict(raw)


def config_from_dict(raw: dict) -> Config:
    """Build and validate a :class:`Config` from parsed JSON."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(
            [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errors]
        )
    proto = ProtocolParams(**_section(ProtocolParams, raw.get("protocol", {}), "protocol"))

    ch_raw = _section(ChannelSpec, raw.get("channel", {}), "channel")
    n = ch_raw.get("n_cores", ChannelSpec.n_cores)
    base = ChannelSpec.with_cores(n)
    if "per_core_excess_db" in ch_raw:
        ch_raw["per_core_excess_db"] = tuple(float(v) for v in ch_raw["per_core_excess_db"])
    if "crosstalk_db" in ch_raw:
        ch_raw["crosstalk_db"] = _crosstalk_from_json(ch_raw["crosstalk_db"], n)
    ch_raw.setdefault("per_core_excess_db", base.per_core_excess_db)
    ch_raw.setdefault("crosstalk_db", base.crosstalk_db)
    chan = ChannelSpec(**ch_raw)

    rx = ReceiverSpec(**_section(ReceiverSpec, raw.get("receiver", {}), "receiver"))

    cl_raw = _section(ClassicalChannelSpec, raw.get("classical", {}), "classical")
    if "rx_power_dbm" in cl_raw:
        v = cl_raw["rx_power_dbm"]
        if isinstance(v, list):
            cl_raw["rx_power_dbm"] = tuple(-math.inf if x is None else float(x) for x in v)
        else:
            cl_raw["rx_power_dbm"] = -math.inf if v is None else float(v)
    classical = ClassicalChannelSpec(**cl_raw)
    return Config(proto, chan, rx, classical).validated()


def load_config(path: Union[str, Path]) -> Config:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
    return config_from_dict(raw)


def load_preset(name: str) -> Config:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; available: {', '.join(PRESETS)}"])
    text = resources.files("mcfqkd").joinpath(f"data/{name}.json").read_text(encoding="utf-8")
    return config_from_dict(json.loads(text))


def _canonical(cfg: Config) -> str:
    return json.dumps(dump_config(cfg), sort_keys=True, separators=(",", ":"))


def save_config(cfg: Config, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(dump_config(cfg), indent=2) + "\n", encoding="utf-8")


def config_digest(cfg: Config) -> str:
    """SHA-256 of the canonical JSON form; equal for semantically identical configs."""
    return hashlib.sha256(_canonical(cfg).encode("utf-8")).hexdigest()
