"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 infeasible operating point.
The output directory is ``--out``, else ``$MCFQKD_OUTPUT_DIR``, else
``./mcfqkd-out``. Every command writes ``<command>.manifest.json`` next to
its tables.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .capacity import EncodingParams, compare_encodings
from .coexistence import DEFAULT_WDM_INSERTION_DB, coexistence_run
from .config import Config, config_digest, load_config, load_preset
from .finitekey import finite_key, rate_vs_loss_curve
from .model import ConfigError
from .records import (
    COEXIST_COLUMNS,
    ENCODING_COLUMNS,
    FINITEKEY_COLUMNS,
    SWEEP_COLUMNS,
    read_stats,
    write_stats,
    write_table,
)
from .sdm import extract_core_key, multiplex, write_key
from .simulator import Analytic, InfeasibleError, MonteCarlo, calibrate_to_target, simulate_sdm

OUTPUT_ENV = "MCFQKD_OUTPUT_DIR"
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config_digest: Optional[str]
    seed: Optional[int]
    started_utc: str
    finished_utc: str = ""
    outputs: list[str] = field(default_factory=list)
    calibration_scale: Optional[float] = None
    version: str = __version__

    def write(self, out_dir: Path) -> Path:
        self.finished_utc = _now()
        path = out_dir / f"{self.command}.manifest.json"
        path.write_text(json.dumps(self.__dict__, indent=2) + "\n", encoding="utf-8")
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "mcfqkd-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> Config:
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    if getattr(args, "calibrate", None):
        rx = calibrate_to_target(args.calibrate, cfg.protocol, cfg.channel, cfg.receiver)
        cfg = replace(cfg, receiver=rx)
    return cfg


def _mode(args, cfg: Config):
    if args.mode == "analytic":
        if args.seed is not None:
            warnings.warn("--seed is ignored in analytic mode", stacklevel=2)
        return Analytic(args.t_acq)
    seed = 0 if args.seed is None else args.seed
    pulses = args.pulses if args.pulses else int(round(args.t_acq * cfg.protocol.clock_hz))
    return MonteCarlo(seed, pulses)


def _restrict(cfg: Config, n: Optional[int]) -> Config:
    if n is None:
        return cfg
    if not 1 <= n <= cfg.channel.n_cores:
        raise ConfigError([f"--cores must be in [1, {cfg.channel.n_cores}], got {n}"])
    return replace(cfg, channel=cfg.channel.subset(range(n)))


def _manifest(args, cfg: Optional[Config], seed=None) -> RunManifest:
    return RunManifest(
        command=args.command,
        argv=list(args.argv),
        config_digest=config_digest(cfg) if cfg is not None else None,
        seed=seed,
        started_utc=_now(),
        calibration_scale=cfg.receiver.calibration_scale if cfg is not None else None,
    )


def cmd_simulate(args) -> int:
    cfg = _restrict(_load(args), args.cores)
    mode = _mode(args, cfg)
    out = _out_dir(args)
    man = _manifest(args, cfg, getattr(mode, "seed", None))
    tagged = simulate_sdm(cfg.protocol, cfg.channel, cfg.receiver, mode, workers=args.workers)
    results = [finite_key(t.stats, cfg.protocol) for t in tagged]
    stats_path = write_stats(out / "stats.csv", [(t.core, t.stats) for t in tagged])
    fk_path = write_table(
        out / "finitekey.csv",
        "mcfqkd finite-key result per core",
        FINITEKEY_COLUMNS,
        [
            (t.core, r.n_z, r.qber_z, r.phi_z_upper, r.secret_bits, r.rate_bps)
            for t, r in zip(tagged, results)
        ],
    )
    man.outputs += [str(stats_path), str(fk_path)]
    if args.keys:
        seed = getattr(mode, "seed", 0)
        keys = [extract_core_key(t, r, seed) for t, r in zip(tagged, results)]
        sidecar = write_key(multiplex(keys), out / "key.bin")
        man.outputs += [str(out / "key.bin"), str(sidecar)]
    man.write(out)
    total = sum(r.rate_bps for r in results)
    print(f"{len(results)} cores, aggregate {total / 1e6:.3f} Mbit/s, mean {total / len(results) / 1e6:.3f} Mbit/s per core")
    return 0


def cmd_sweep_loss(args) -> int:
    if args.steps < 1:
        raise ConfigError([f"--steps must be >= 1, got {args.steps}"])
    if args.to_db < args.from_db or (args.steps > 1 and args.to_db == args.from_db):
        raise ConfigError([f"empty or inverted loss range {args.from_db} -> {args.to_db} dB"])
    cfg = _load(args)
    out = _out_dir(args)
    man = _manifest(args, cfg)
    grid = [float(x) for x in np.linspace(args.from_db, args.to_db, args.steps)]
    blocks = [args.block_bits] * len(grid)
    if args.tail_block_bits is not None:
        start = args.tail_from_db if args.tail_from_db is not None else grid[-1]
        blocks = [args.tail_block_bits if x >= start else b for x, b in zip(grid, blocks)]
    curve = rate_vs_loss_curve(cfg.protocol, cfg.channel, cfg.receiver, grid, blocks)
    path = write_table(
        out / "sweep_loss.csv",
        "mcfqkd aggregate secret key rate versus channel loss",
        SWEEP_COLUMNS,
        [(pt.loss_db, pt.aggregate_bps, pt.per_core_mean_bps, pt.block_bits, pt.t_acq_s) for pt in curve],
    )
    man.outputs.append(str(path))
    man.write(out)
    return 0


def _parse_q_grid(text: str) -> list[float]:
    if ":" in text:
        a, b, n = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_compare_encodings(args) -> int:
    if args.max_modes < 2:
        raise ConfigError([f"--max-modes must be >= 2, got {args.max_modes}"])
    try:
        q_grid = _parse_q_grid(args.q_grid)
    except ValueError as exc:
        raise ConfigError([f"--q-grid: {exc}"]) from None
    modes = [2**k for k in range(1, int(math.log2(args.max_modes)) + 1)]
    out = _out_dir(args)
    man = _manifest(args, None)
    rows = []
    for cmp in compare_encodings(modes, q_grid, EncodingParams()):
        qc = cmp.q_cross if cmp.q_cross is not None else math.nan
        for q, par, hid in zip(cmp.q_grid, cmp.parallel_rate, cmp.hid_rate):
            rows.append((q, cmp.n_modes, par, hid, cmp.plob, qc))
    path = write_table(
        out / "compare_encodings.csv",
        "mcfqkd parallel vs high-dimensional encoding, rates per pulse",
        ENCODING_COLUMNS,
        rows,
    )
    man.outputs.append(str(path))
    man.write(out)
    return 0


def cmd_coexist(args) -> int:
    cfg = _restrict(_load(args), args.cores)
    classical = replace(cfg.classical, rx_power_dbm=args.rx_dbm, wdm_extinction_db=args.extinction_db)
    rx = replace(cfg.receiver, wdm_insertion_db=args.wdm_insertion_db)
    cfg = replace(cfg, receiver=rx, classical=classical)
    mode = _mode(args, cfg)
    out = _out_dir(args)
    man = _manifest(args, cfg, getattr(mode, "seed", None))
    res = coexistence_run(cfg.protocol, cfg.channel, rx, classical, mode, workers=args.workers)
    rows = [(r.core, r.key.rate_bps, r.key.qber_z, r.key.phi_z_upper, r.ber) for r in res]
    n = len(res)
    rows.append(
        (
            "total",
            sum(r.key.rate_bps for r in res),
            sum(r.key.qber_z for r in res) / n,
            sum(r.key.phi_z_upper for r in res) / n,
            max(r.ber for r in res),
        )
    )
    path = write_table(
        out / "coexist.csv",
        "mcfqkd quantum key and classical BER per core with co-propagating classical light",
        COEXIST_COLUMNS,
        rows,
    )
    man.outputs.append(str(path))
    man.write(out)
    return 0


def cmd_finitekey(args) -> int:
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    records = read_stats(args.stats_file)
    out = _out_dir(args)
    man = _manifest(args, cfg)
    rows = []
    for core, stats in records:
        r = finite_key(stats, cfg.protocol)
        rows.append((core, r.n_z, r.qber_z, r.phi_z_upper, r.secret_bits, r.rate_bps))
    path = write_table(out / "finitekey.csv", "mcfqkd finite-key result per core", FINITEKEY_COLUMNS, rows)
    man.outputs.append(str(path))
    man.write(out)
    return 0


def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--config", type=Path, help="JSON configuration file")
        g.add_argument("--preset", default="paper-defaults", help="built-in configuration (default: %(default)s)")
        p.add_argument(
            "--calibrate",
            type=float,
            metavar="Z_PER_S",
            help="rescale the receiver so the mean core yields this many sifted Z detections/s",
        )
    p.add_argument("--out", type=Path, help=f"output directory (default: ${OUTPUT_ENV} or ./mcfqkd-out)")


def _add_mode(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("analytic", "monte-carlo"), default="analytic")
    p.add_argument("--seed", type=int, help="master seed (Monte Carlo only)")
    p.add_argument("--pulses", type=int, help="pulses per core (Monte Carlo; default: clock x --t-acq)")
    p.add_argument("--t-acq", type=float, default=30.0, help="block acquisition time in s (default: %(default)s)")
    p.add_argument("--cores", type=int, help="simulate only the first N cores")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcfqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="per-core statistics and finite-key rates")
    _add_common(s)
    _add_mode(s)
    s.add_argument("--keys", action="store_true", help="also write the multiplexed key and its manifest")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep-loss", help="aggregate rate versus channel loss")
    _add_common(s)
    s.add_argument("--from-db", type=float, default=3.75)
    s.add_argument("--to-db", type=float, default=47.0)
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--block-bits", type=float, default=5.67e9, help="aggregate Z detections per block")
    s.add_argument("--tail-block-bits", type=float, help="block size for the last point (or from --tail-from-db on)")
    s.add_argument("--tail-from-db", type=float)
    s.set_defaults(func=cmd_sweep_loss)

    s = sub.add_parser("compare-encodings", help="parallel vs high-dimensional rate curves")
    _add_common(s, config=False)
    s.add_argument("--max-modes", type=int, default=32)
    s.add_argument("--q-grid", default="0:0.5:101", help="start:stop:num or comma-separated list")
    s.set_defaults(func=cmd_compare_encodings)

    s = sub.add_parser("coexist", help="quantum key with co-propagating classical channels")
    _add_common(s)
    _add_mode(s)
    s.add_argument("--rx-dbm", type=float, default=-34.0, help="classical power received per core")
    s.add_argument("--extinction-db", type=float, default=80.0, help="WDM filter extinction")
    s.add_argument("--wdm-insertion-db", type=float, default=DEFAULT_WDM_INSERTION_DB)
    s.set_defaults(func=cmd_coexist)

    s = sub.add_parser("finitekey", help="finite-key analysis of recorded statistics")
    _add_common(s)
    s.add_argument("--stats-file", type=Path, required=True)
    s.set_defaults(func=cmd_finitekey)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = lambda msg, cat, *a, **k: print(f"warning: {msg}", file=sys.stderr)
        try:
            return args.func(args)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except InfeasibleError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
