"""Gridded emission fields and their portable on-disk formats.

An :class:`EmissionGrid` is one compound's global emission field for one
date, in kg m^-2 s^-1.  Two formats are supported:

* ``csv`` -- five header lines (``compound=``, ``date=``, ``rows=``,
  ``cols=``, ``lat_res=...,lon_res=...``) followed by comma-separated rows,
  values written with 17 significant digits so float64 round-trips.
* ``bgrid`` -- deterministic little-endian binary: magic ``BGRD``, a version
  byte, length-prefixed UTF-8 compound tag and ISO-8601 date, two uint32
  dims, two float64 resolutions, then rows*cols float64 values row-major
  (north to south).  Bit-exact across save/load.

Ocean / no-emission cells are stored as 0.0, never as a sentinel.
"""

from __future__ import annotations

import datetime as _dt
import struct
from dataclasses import dataclass, field

import numpy as np

BGRID_MAGIC = b"BGRD"
BGRID_VERSION = 1


class GridFormatError(ValueError):
    """A grid file does not conform to the declared format."""


class GridValidationError(ValueError):
    """Grid payload violates the emission-field invariants."""


@dataclass(frozen=True)
class EmissionGrid:
    compound: str
    date: _dt.date
    lat_res: float
    lon_res: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise GridValidationError(f"grid must be 2-D and nonempty, got shape {values.shape}")
        if not (self.lat_res > 0 and self.lon_res > 0):
            raise GridValidationError(f"resolutions must be positive, got ({self.lat_res}, {self.lon_res})")
        if not isinstance(self.date, _dt.date):
            raise GridValidationError(f"date must be a datetime.date, got {type(self.date).__name__}")
        if not self.compound:
            raise GridValidationError("compound tag must be nonempty")
        bad = ~np.isfinite(values) | (values < 0)
        if bad.any():
            r, c = map(int, np.argwhere(bad)[0])
            raise GridValidationError(
                f"invalid value {values[r, c]!r} at cell ({r}, {c}): must be finite and >= 0"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def _format_of(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "bgrid"):
            raise ValueError(f"unknown grid format {fmt!r}")
        return fmt
    suffix = str(path).rsplit(".", 1)[-1].lower()
    if suffix in ("csv", "bgrid"):
        return suffix
    raise ValueError(f"cannot infer format from path {path!r}; pass format=")


def save_grid(grid: EmissionGrid, path, format: str | None = None) -> None:
    fmt = _format_of(path, format)
    if fmt == "csv":
        _save_csv(grid, path)
    else:
        _save_bgrid(grid, path)


def load_grid(path, format: str | None = None) -> EmissionGrid:
    fmt = _format_of(path, format)
    if fmt == "csv":
        return _load_csv(path)
    return _load_bgrid(path)


def _save_csv(grid: EmissionGrid, path) -> None:
    lines = [
        f"compound={grid.compound}",
        f"date={grid.date.isoformat()}",
        f"rows={grid.rows}",
        f"cols={grid.cols}",
        f"lat_res={grid.lat_res!r},lon_res={grid.lon_res!r}",
    ]
    for row in grid.values:
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _header_value(line: str, key: str, path) -> str:
    prefix = key + "="
    if not line.startswith(prefix):
        raise GridFormatError(f"{path}: expected header line {prefix!r}..., got {line!r}")
    return line[len(prefix):]


def _load_csv(path) -> EmissionGrid:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 5:
        raise GridFormatError(f"{path}: truncated header ({len(lines)} lines)")
    compound = _header_value(lines[0], "compound", path)
    date_str = _header_value(lines[1], "date", path)
    try:
        date = _dt.date.fromisoformat(date_str)
    except ValueError as exc:
        raise GridFormatError(f"{path}: bad date {date_str!r}: {exc}") from exc
    try:
        rows = int(_header_value(lines[2], "rows", path))
        cols = int(_header_value(lines[3], "cols", path))
    except ValueError as exc:
        raise GridFormatError(f"{path}: bad dims header: {exc}") from exc
    res_parts = lines[4].split(",")
    if len(res_parts) != 2:
        raise GridFormatError(f"{path}: expected 'lat_res=...,lon_res=...', got {lines[4]!r}")
    try:
        lat_res = float(_header_value(res_parts[0], "lat_res", path))
        lon_res = float(_header_value(res_parts[1], "lon_res", path))
    except ValueError as exc:
        raise GridFormatError(f"{path}: bad resolution header: {exc}") from exc

    payload = [ln for ln in lines[5:] if ln.strip()]
    if len(payload) != rows:
        raise GridFormatError(f"{path}: header declares {rows} rows, payload has {len(payload)}")
    values = np.empty((rows, cols), dtype=np.float64)
    for r, ln in enumerate(payload):
        parts = ln.split(",")
        if len(parts) != cols:
            raise GridFormatError(f"{path}: row {r} has {len(parts)} columns, header declares {cols}")
        try:
            values[r] = [float(p) for p in parts]
        except ValueError as exc:
            raise GridFormatError(f"{path}: row {r}: {exc}") from exc
    try:
        return EmissionGrid(compound, date, lat_res, lon_res, values)
    except GridValidationError as exc:
        raise GridValidationError(f"{path}: {exc}") from exc


def _lp_bytes(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for bgrid header: {len(raw)} bytes")
    return struct.pack("<H", len(raw)) + raw


def _save_bgrid(grid: EmissionGrid, path) -> None:
    header = (
        BGRID_MAGIC
        + struct.pack("<B", BGRID_VERSION)
        + _lp_bytes(grid.compound)
        + _lp_bytes(grid.date.isoformat())
        + struct.pack("<II", grid.rows, grid.cols)
        + struct.pack("<dd", grid.lat_res, grid.lon_res)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.values.astype("<f8", copy=False).tobytes())


def _load_bgrid(path) -> EmissionGrid:
    with open(path, "rb") as fh:
        blob = fh.read()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise GridFormatError(f"{path}: truncated bgrid (need {pos + n} bytes, have {len(blob)})")
        out = blob[pos:pos + n]
        pos += n
        return out

    if take(4) != BGRID_MAGIC:
        raise GridFormatError(f"{path}: not a bgrid file (bad magic)")
    version = take(1)[0]
    if version != BGRID_VERSION:
        raise GridFormatError(f"{path}: unsupported bgrid version {version}")

    def take_str() -> str:
        (n,) = struct.unpack("<H", take(2))
        return take(n).decode("utf-8")

    compound = take_str()
    date_str = take_str()
    try:
        date = _dt.date.fromisoformat(date_str)
    except ValueError as exc:
        raise GridFormatError(f"{path}: bad date {date_str!r}: {exc}") from exc
    rows, cols = struct.unpack("<II", take(8))
    lat_res, lon_res = struct.unpack("<dd", take(16))
    payload = take(rows * cols * 8)
    if pos != len(blob):
        raise GridFormatError(f"{path}: {len(blob) - pos} trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)
    try:
        return EmissionGrid(compound, date, lat_res, lon_res, values)
    except GridValidationError as exc:
        raise GridValidationError(f"{path}: {exc}") from exc
