"""Patch slicing and bicubic degradation of emission grids.

Grids are tiled into non-overlapping 64x64 high-resolution patches (border
remainder dropped); each patch gets a 16x16 low-resolution counterpart by
Catmull-Rom bicubic resampling (a = -0.5) at output-pixel centers, with
half-sample symmetric boundary handling.  Downsampled values are clamped at
zero so the nonnegativity invariant of emission fields survives kernel
ringing.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import EmissionGrid, load_grid, save_grid


@dataclass
class PatchRecord:
    patch_id: int
    compound: str
    date: _dt.date
    origin: tuple[int, int]
    hr: np.ndarray
    lr: np.ndarray | None = None


def slice_patches(
    grid: EmissionGrid,
    patch_size: int = 64,
    min_nonzero_frac: float = 0.0,
    id_offset: int = 0,
) -> list[PatchRecord]:
    """Tile a grid into non-overlapping patches, row-major.

    Patch ids are geometric (``id_offset + tile_index``) so the same cell
    block gets the same id in every compound's archive, whether or not a
    sparsity filter drops it somewhere else.  Patches whose nonzero-cell
    fraction is below ``min_nonzero_frac`` are omitted.
    """
    rows, cols = grid.values.shape
    if rows < patch_size or cols < patch_size:
        raise ValueError(
            f"grid {rows}x{cols} is smaller than one {patch_size}x{patch_size} patch"
        )
    n_r = rows // patch_size
    n_c = cols // patch_size
    out = []
    for pr in range(n_r):
        for pc in range(n_c):
            r0, c0 = pr * patch_size, pc * patch_size
            hr = np.array(grid.values[r0:r0 + patch_size, c0:c0 + patch_size])
            if min_nonzero_frac > 0.0:
                if np.count_nonzero(hr) / hr.size < min_nonzero_frac:
                    continue
            out.append(PatchRecord(
                patch_id=id_offset + pr * n_c + pc,
                compound=grid.compound,
                date=grid.date,
                origin=(r0, c0),
                hr=hr,
            ))
    return out


def _catmull_rom(t: np.ndarray) -> np.ndarray:
    # Keys cubic kernel with a = -0.5.
    t = np.abs(t)
    out = np.zeros_like(t)
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    out[near] = (1.5 * t[near] - 2.5) * t[near] ** 2 + 1.0
    out[far] = ((-0.5 * t[far] + 2.5) * t[far] - 4.0) * t[far] + 2.0
    return out


def _reflect_index(k: np.ndarray, n: int) -> np.ndarray:
    # Half-sample symmetric extension: -1 -> 0, -2 -> 1, n -> n-1, ...
    k = np.asarray(k)
    period = 2 * n
    k = np.mod(k, period)
    k = np.where(k < 0, k + period, k)
    return np.where(k >= n, period - 1 - k, k)


def _cubic_resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic matrix evaluating the Catmull-Rom interpolant of an
    n_in-sample signal at the n_out output-pixel centers."""
    x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(x).astype(int)
    w = np.zeros((n_out, n_in))
    for tap in range(-1, 3):
        k = base + tap
        weight = _catmull_rom(x - k)
        np.add.at(w, (np.arange(n_out), _reflect_index(k, n_in)), weight)
    return w


def resample_bicubic(values: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Separable Catmull-Rom resampling to an arbitrary output shape."""
    values = np.asarray(values, dtype=np.float64)
    w_r = _cubic_resample_matrix(values.shape[0], out_shape[0])
    w_c = _cubic_resample_matrix(values.shape[1], out_shape[1])
    return w_r @ values @ w_c.T


def downsample_bicubic(hr: np.ndarray, alpha: int = 4, clamp: bool = True) -> np.ndarray:
    """Bicubic downsampling by an integer factor; negative ringing clamped to 0."""
    hr = np.asarray(hr, dtype=np.float64)
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if hr.shape[0] % alpha or hr.shape[1] % alpha:
        raise ValueError(f"shape {hr.shape} not divisible by alpha={alpha}")
    out = resample_bicubic(hr, (hr.shape[0] // alpha, hr.shape[1] // alpha))
    if clamp:
        np.maximum(out, 0.0, out=out)
    return out


def upsample_bicubic(lr: np.ndarray, alpha: int = 4) -> np.ndarray:
    """Bicubic upsampling by an integer factor (no clamping)."""
    lr = np.asarray(lr, dtype=np.float64)
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    return resample_bicubic(lr, (lr.shape[0] * alpha, lr.shape[1] * alpha))


def derive_lr(records: list[PatchRecord], alpha: int = 4) -> None:
    """Attach the degraded LR counterpart to each patch, in place."""
    for rec in records:
        rec.lr = downsample_bicubic(rec.hr, alpha=alpha)


# ---------------------------------------------------------------------------
# Archive persistence: one directory per compound, bgrid per patch plus a
# CSV manifest (patch_id, compound, date, row0, col0).

def save_patch_archive(
    records: list[PatchRecord],
    directory,
    lat_res: float,
    lon_res: float,
    alpha: int = 4,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec in sorted(records, key=lambda r: r.patch_id):
        hr_grid = EmissionGrid(rec.compound, rec.date, lat_res, lon_res, rec.hr)
        save_grid(hr_grid, directory / f"hr_{rec.patch_id:06d}.bgrid")
        if rec.lr is not None:
            lr_grid = EmissionGrid(rec.compound, rec.date, lat_res * alpha, lon_res * alpha, rec.lr)
            save_grid(lr_grid, directory / f"lr_{rec.patch_id:06d}.bgrid")
        rows.append((rec.patch_id, rec.compound, rec.date.isoformat(), rec.origin[0], rec.origin[1]))
    with open(directory / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patch_id", "compound", "date", "row0", "col0"])
        writer.writerows(rows)


def load_patch_archive(directory) -> dict[int, PatchRecord]:
    directory = Path(directory)
    manifest = directory / "manifest.csv"
    if not manifest.exists():
        raise FileNotFoundError(f"no patch manifest at {manifest}")
    records: dict[int, PatchRecord] = {}
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            pid = int(row["patch_id"])
            hr = load_grid(directory / f"hr_{pid:06d}.bgrid")
            lr_path = directory / f"lr_{pid:06d}.bgrid"
            lr = load_grid(lr_path).values if lr_path.exists() else None
            records[pid] = PatchRecord(
                patch_id=pid,
                compound=row["compound"],
                date=_dt.date.fromisoformat(row["date"]),
                origin=(int(row["row0"]), int(row["col0"])),
                hr=np.array(hr.values),
                lr=np.array(lr) if lr is not None else None,
            )
    return dict(sorted(records.items()))
