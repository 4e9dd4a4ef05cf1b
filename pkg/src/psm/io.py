"""Observation and support files, and tabular result output.

Observation text format::

    PSM1 <n>
    <n lines of n space-separated floats>

Binary format: ``b"PSMB1"``, little-endian ``u32`` n, then n*n little-endian
float64 values in row-major order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import Observation

TEXT_MAGIC = "PSM1"
BINARY_MAGIC = b"PSMB1"

CSV_COLUMNS = (
    "n", "k", "m", "lambda", "alpha", "beta", "gamma_m", "variant", "task", "trials",
    "type1", "type2", "risk", "exact_rate", "overlap_frac", "ci", "regime", "seed",
)


def write_observation(obs: Observation, path, binary: bool = False) -> None:
    path = Path(path)
    try:
        if binary:
            with path.open("wb") as fh:
                fh.write(BINARY_MAGIC)
                fh.write(struct.pack("<I", obs.n))
                fh.write(obs.data.astype("<f8").tobytes(order="C"))
        else:
            with path.open("w") as fh:
                fh.write(f"{TEXT_MAGIC} {obs.n}\n")
                for row in obs.data.tolist():
                    fh.write(" ".join(repr(v) for v in row))
                    fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write observation to {path}: {exc}") from exc


def read_observation(path) -> Observation:
    """Read either format; the magic bytes decide which."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read observation from {path}: {exc}") from exc
    if raw.startswith(BINARY_MAGIC):
        (n,) = struct.unpack_from("<I", raw, len(BINARY_MAGIC))
        offset = len(BINARY_MAGIC) + 4
        if len(raw) - offset != 8 * n * n:
            raise ConfigError(f"{path}: expected {n * n} float64 values")
        data = np.frombuffer(raw, dtype="<f8", count=n * n, offset=offset).reshape(n, n)
        return Observation(data.astype(np.float64))
    lines = raw.decode("ascii").splitlines()
    header = lines[0].split() if lines else []
    if len(header) != 2 or header[0] != TEXT_MAGIC:
        raise ConfigError(f"{path}: missing '{TEXT_MAGIC} <n>' header")
    n = int(header[1])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise ConfigError(f"{path}: expected {n} data rows, found {len(body)}")
    data = np.array([[float(v) for v in ln.split()] for ln in body], dtype=np.float64)
    if data.shape != (n, n):
        raise ConfigError(f"{path}: malformed rows, parsed shape {data.shape}")
    return Observation(data)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            return str(value)
        return repr(value)
    return str(value)


def _json_safe(value):
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return _json_safe(float(value))
    return value


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps([{k: _json_safe(v) for k, v in row.items()} for row in rows], indent=2) + "\n"


def emit(rows, fmt: str = "csv", path=None, columns=CSV_COLUMNS) -> None:
    """Write rows as CSV (fixed column order) or a JSON array of flat records.

    ``path`` of ``None`` or ``"-"`` writes to stdout.
    """
    rows = list(rows)
    fmt = fmt.lower()
    if fmt == "csv":
        text = rows_to_csv(rows, columns)
    elif fmt == "json":
        text = rows_to_json(rows)
    else:
        raise ConfigError(f"unknown output format {fmt!r} (expected csv or json)")
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
