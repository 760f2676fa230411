"""CSV record files.

Every file starts with ``#`` comment lines: a title line, then one
``# column: unit, meaning`` line per column. A plain CSV header row and the
records follow. Floats are written with ``repr`` so files round-trip exactly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import fields
from pathlib import Path
from typing import Iterable, Sequence, Union

from .model import BlockStats, ConfigError

__all__ = [
    "STATS_COLUMNS",
    "FINITEKEY_COLUMNS",
    "SWEEP_COLUMNS",
    "ENCODING_COLUMNS",
    "COEXIST_COLUMNS",
    "format_table",
    "write_table",
    "write_stats",
    "read_stats",
]

STATS_COLUMNS = {
    "core_id": "index, core of the multicore fibre",
    "n_z_mu1": "count, sifted Z detections for the signal intensity",
    "m_z_mu1": "count, Z errors for the signal intensity",
    "n_x_mu1": "count, sifted X detections for the signal intensity",
    "m_x_mu1": "count, X errors for the signal intensity",
    "n_z_mu2": "count, sifted Z detections for the decoy intensity",
    "m_z_mu2": "count, Z errors for the decoy intensity",
    "n_x_mu2": "count, sifted X detections for the decoy intensity",
    "m_x_mu2": "count, X errors for the decoy intensity",
    "t_acq_s": "s, acquisition time of the block",
    "pulses_sent": "count, pulses sent in the block",
}
FINITEKEY_COLUMNS = {
    "core_id": "index, core of the multicore fibre",
    "n_z": "count, sifted Z detections",
    "q_z": "probability, Z-basis QBER",
    "phi_z_u": "probability, upper bound on the single-photon phase error",
    "secret_bits": "bits, secret key length of the block",
    "skr_bps": "bit/s, secret key rate",
}
SWEEP_COLUMNS = {
    "loss_db": "dB, channel loss",
    "aggregate_skr_bps": "bit/s, secret key rate summed over cores",
    "per_core_mean_bps": "bit/s, mean secret key rate per core",
    "block_bits": "bits, aggregate sifted Z detections per block",
    "t_acq_s": "s, acquisition time of the block",
}
ENCODING_COLUMNS = {
    "q": "probability, intrinsic error rate",
    "n_modes": "count, cores (parallel) or dimension (high-dimensional)",
    "parallel": "bit/pulse, normalised secret key rate of parallel encoding",
    "hid": "bit/pulse, normalised secret key rate of high-dimensional encoding",
    "plob": "bit/use, repeaterless bound of the multicore fibre",
    "q_cross": "probability, error rate above which high-dimensional encoding wins",
}
COEXIST_COLUMNS = {
    "core_id": "index, core of the multicore fibre (total: aggregate line)",
    "skr_bps": "bit/s, secret key rate",
    "qber": "probability, Z-basis QBER",
    "phi_z_u": "probability, upper bound on the single-photon phase error",
    "ber": "probability, classical bit error rate (total: worst core)",
}


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def format_table(title: str, columns: dict, rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# {title}\n")
    for name, desc in columns.items():
        buf.write(f"# {name}: {desc}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(columns))
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_table(path: Union[str, Path], title: str, columns: dict, rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.write_text(format_table(title, columns, rows), encoding="utf-8")
    return path


def write_stats(path: Union[str, Path], stats: Sequence[tuple[int, BlockStats]]) -> Path:
    """Write ``(core_id, BlockStats)`` pairs in the stats schema."""
    names = [f.name for f in fields(BlockStats)]
    rows = [[core] + [getattr(s, n) for n in names] for core, s in stats]
    return write_table(path, "mcfqkd block statistics, one record per core per block", STATS_COLUMNS, rows)


def read_stats(path: Union[str, Path]) -> list[tuple[int, BlockStats]]:
    """Parse a stats file; errors carry file line numbers."""
    path = Path(path)
    problems = []
    out = []
    header = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            row = next(csv.reader([line]))
            if header is None:
                header = [c.strip() for c in row]
                missing = [c for c in STATS_COLUMNS if c not in header]
                extra = [c for c in header if c not in STATS_COLUMNS]
                if missing or extra:
                    msg = f"{path}:{lineno}: bad header"
                    if missing:
                        msg += f"; missing {', '.join(missing)}"
                    if extra:
                        msg += f"; unexpected {', '.join(extra)}"
                    raise ConfigError([msg])
                continue
            if len(row) != len(header):
                problems.append(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                continue
            rec = dict(zip(header, row))
            try:
                core = int(rec.pop("core_id"))
                pulses = int(float(rec.pop("pulses_sent")))
                vals = {k: float(v) for k, v in rec.items()}
            except ValueError as exc:
                problems.append(f"{path}:{lineno}: {exc}")
                continue
            s = BlockStats(**vals, pulses_sent=pulses)
            bad = s.violations()
            if bad:
                problems.extend(f"{path}:{lineno}: {b}" for b in bad)
                continue
            out.append((core, s))
    if header is None:
        problems.append(f"{path}: no header row")
    if problems:
        raise ConfigError(problems)
    return out
