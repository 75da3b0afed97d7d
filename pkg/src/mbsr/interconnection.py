"""Spatial inter-connection between compounds: PCC, SSIM, and ranking.

Pairs of compounds are compared date by date on maps covering the same
area.  PCC runs on raw values; SSIM runs on per-map min-max normalized
values (dynamic range 1) because compounds differ by orders of magnitude
and raw-scale SSIM would measure scale, not structure.  Per-pair results
are averaged over all shared dates into a symmetric matrix with unit
diagonal, from which the most / least connected compounds relative to a
reference are ranked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .grids import EmissionGrid


def pcc(a, b) -> float:
    """Pearson correlation of two equally shaped maps, flattened.

    Returns NaN for zero-variance input (a defined-missing result that
    callers exclude from averages).
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ac = a - a.mean()
    bc = b - b.mean()
    saa = float(ac @ ac)
    sbb = float(bc @ bc)
    if saa == 0.0 or sbb == 0.0:
        return math.nan
    sab = float(ac @ bc)
    if saa == sbb:
        # Exact +/-1 for bitwise-identical or exactly negated inputs.
        if sab == saa:
            return 1.0
        if sab == -saa:
            return -1.0
    return min(1.0, max(-1.0, sab / (math.sqrt(saa) * math.sqrt(sbb))))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalized 1-D Gaussian tap vector used by the SSIM window."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def _window_mean(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # Separable weighted mean; crop to positions whose window is fully
    # inside the image, so the padding mode never matters.
    half = taps.size // 2
    y = correlate1d(x, taps, axis=0, mode="constant")
    y = correlate1d(y, taps, axis=1, mode="constant")
    return y[half:y.shape[0] - half, half:y.shape[1] - half]


def ssim(
    a,
    b,
    window: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    data_range: float = 1.0,
) -> float:
    """Mean SSIM over valid (fully interior) Gaussian window positions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"expected 2-D maps, got ndim={a.ndim}")
    if min(a.shape) < window:
        raise ValueError(f"window {window} larger than image {a.shape}")
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}")

    taps = gaussian_window(window, sigma)
    mu_a = _window_mean(a, taps)
    mu_b = _window_mean(b, taps)
    e_aa = _window_mean(a * a, taps)
    e_bb = _window_mean(b * b, taps)
    e_ab = _window_mean(a * b, taps)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b

    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Map a single map to [0, 1] by its own range; constant maps go to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min()
    span = values.max() - lo
    if span == 0.0:
        return np.zeros_like(values)
    return (values - lo) / span


@dataclass
class InterconnectionMatrix:
    compounds: list[str]
    ssim: np.ndarray = field(repr=False)
    pcc: np.ndarray = field(repr=False)
    n_pairs: np.ndarray = field(repr=False)


def build_matrix(grids, window: int = 11) -> InterconnectionMatrix:
    """Average PCC and SSIM over every (compound pair, shared date).

    A shared date contributes only when both maps are non-constant (PCC is
    undefined otherwise); skipped dates are excluded from n_pairs.  Pairs
    with no usable shared date get NaN cells with n_pairs = 0.
    """
    by_key: dict[tuple[str, str], EmissionGrid] = {}
    for g in grids:
        key = (g.compound, g.date.isoformat())
        if key in by_key:
            raise ValueError(f"duplicate map for compound={key[0]} date={key[1]}")
        by_key[key] = g
    compounds = sorted({c for c, _ in by_key})
    k = len(compounds)
    dates_of = {
        c: sorted(d for cc, d in by_key if cc == c) for c in compounds
    }

    ssim_m = np.full((k, k), np.nan)
    pcc_m = np.full((k, k), np.nan)
    n_pairs = np.zeros((k, k), dtype=np.int64)
    np.fill_diagonal(ssim_m, 1.0)
    np.fill_diagonal(pcc_m, 1.0)
    for i, c in enumerate(compounds):
        n_pairs[i, i] = len(dates_of[c])

    for i in range(k):
        for j in range(i + 1, k):
            shared = sorted(set(dates_of[compounds[i]]) & set(dates_of[compounds[j]]))
            ssim_vals, pcc_vals = [], []
            for d in shared:
                a = by_key[(compounds[i], d)].values
                b = by_key[(compounds[j], d)].values
                r = pcc(a, b)
                if math.isnan(r):
                    continue
                pcc_vals.append(r)
                ssim_vals.append(ssim(
                    minmax_normalize(a), minmax_normalize(b),
                    window=window, data_range=1.0,
                ))
            n_pairs[i, j] = n_pairs[j, i] = len(pcc_vals)
            if pcc_vals:
                ssim_m[i, j] = ssim_m[j, i] = float(np.mean(ssim_vals))
                pcc_m[i, j] = pcc_m[j, i] = float(np.mean(pcc_vals))
    return InterconnectionMatrix(compounds=compounds, ssim=ssim_m, pcc=pcc_m, n_pairs=n_pairs)


def rank_compounds(
    m: InterconnectionMatrix,
    reference: str,
    k: int,
    mode: str = "most",
) -> list[str]:
    """The k most / least connected compounds to the reference, by SSIM.

    Ties break lexicographically; compounds with no usable shared date
    (NaN cell) sort after everything else in both modes.
    """
    if mode not in ("most", "least"):
        raise ValueError(f"mode must be 'most' or 'least', got {mode!r}")
    if reference not in m.compounds:
        raise ValueError(f"unknown reference compound {reference!r}")
    others = [c for c in m.compounds if c != reference]
    if k > len(others):
        raise ValueError(f"k={k} exceeds the {len(others)} non-reference compounds")
    ref_idx = m.compounds.index(reference)

    def key(c: str):
        v = m.ssim[ref_idx, m.compounds.index(c)]
        if math.isnan(v):
            return (1, 0.0, c)
        return (0, -v if mode == "most" else v, c)

    return sorted(others, key=key)[:k]


def combined_triangle(m: InterconnectionMatrix) -> np.ndarray:
    """SSIM above the diagonal, PCC below it, ones on it (heatmap layout)."""
    k = len(m.compounds)
    out = np.ones((k, k))
    iu = np.triu_indices(k, 1)
    il = np.tril_indices(k, -1)
    out[iu] = m.ssim[iu]
    out[il] = m.pcc[il]
    return out


def write_matrix_csv(m: InterconnectionMatrix, directory) -> tuple[Path, Path]:
    """Write ssim.csv and pcc.csv with compound-tagged rows and columns."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, matrix in (("ssim", m.ssim), ("pcc", m.pcc)):
        path = directory / f"{name}.csv"
        lines = ["compound," + ",".join(m.compounds)]
        for i, c in enumerate(m.compounds):
            lines.append(c + "," + ",".join(f"{v:.17g}" for v in matrix[i]))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(path)
    return tuple(paths)
