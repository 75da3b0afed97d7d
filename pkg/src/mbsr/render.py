"""Deterministic figure rendering as binary portable pixmaps (P6).

No image library: each figure is a byte-exact function of its inputs, so
golden-file tests and run-manifest hashes stay stable across platforms.
Palettes are piecewise-linear ramps over the anchor tables below; "the
brighter, the higher" for the sequential ramp.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

# anchor position (in [0, 1]) -> RGB
PALETTES = {
    "sequential": (
        (0.00, (13, 8, 135)),
        (0.25, (126, 3, 168)),
        (0.50, (204, 71, 120)),
        (0.75, (248, 149, 64)),
        (1.00, (240, 249, 33)),
    ),
    "diverging": (
        (0.00, (5, 48, 97)),
        (0.25, (106, 172, 208)),
        (0.50, (247, 247, 247)),
        (0.75, (214, 96, 77)),
        (1.00, (103, 0, 31)),
    ),
}


def palette_colors(u: np.ndarray, palette: str = "sequential") -> np.ndarray:
    """Map values in [0, 1] to uint8 RGB via the palette's anchor ramp."""
    if palette not in PALETTES:
        raise ValueError(f"unknown palette {palette!r}; choose from {sorted(PALETTES)}")
    anchors = PALETTES[palette]
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    pos = np.array([a[0] for a in anchors])
    rgb = np.array([a[1] for a in anchors], dtype=np.float64)
    out = np.empty(u.shape + (3,), dtype=np.uint8)
    for ch in range(3):
        out[..., ch] = np.floor(np.interp(u, pos, rgb[:, ch]) + 0.5).astype(np.uint8)
    return out


def write_ppm(rgb: np.ndarray, path) -> Path:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) uint8 array, got {rgb.shape}")
    h, w = rgb.shape[:2]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())
    return path


def render_heatmap(
    array,
    path,
    palette: str = "sequential",
    value_range: tuple[float, float] | None = None,
    block: int = 1,
) -> Path:
    """Render a 2-D array to a P6 pixmap; one cell per pixel (or ``block``
    pixels square).  Constant arrays with no explicit range render at the
    palette start."""
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {array.shape}")
    if not np.isfinite(array).all():
        raise ValueError("non-finite values in heatmap input")
    if value_range is None:
        lo, hi = float(array.min()), float(array.max())
    else:
        lo, hi = map(float, value_range)
    if hi > lo:
        u = (array - lo) / (hi - lo)
    else:
        u = np.zeros_like(array)
    if block > 1:
        u = np.kron(u, np.ones((block, block)))
    return write_ppm(palette_colors(u, palette), path)


def render_histogram_figure(
    hist_a,
    hist_b,
    path,
    height: int = 120,
    bar_width: int = 4,
) -> Path:
    """Two overlaid bar charts (counts, shared bins) as a P6 pixmap.

    ``hist_a`` draws in blue, ``hist_b`` in red; overlapping extent blends
    to purple.  Intended for ground-truth vs reconstruction comparisons.
    """
    counts_a = np.asarray(hist_a.counts, dtype=np.float64)
    counts_b = np.asarray(hist_b.counts, dtype=np.float64)
    if counts_a.shape != counts_b.shape:
        raise ValueError("histograms must share binning")
    bins = counts_a.size
    peak = max(counts_a.max(), counts_b.max(), 1.0)
    width = bins * bar_width + 2
    img = np.full((height, width, 3), 255, dtype=np.uint8)
    img[-1, :, :] = 0  # baseline axis
    for i in range(bins):
        x0 = 1 + i * bar_width
        for counts, color in ((counts_a, (60, 90, 200)), (counts_b, (200, 60, 60))):
            h = int(round((height - 2) * counts[i] / peak))
            if h <= 0:
                continue
            col = img[height - 1 - h:height - 1, x0:x0 + bar_width - 1, :]
            blend = (col.astype(np.uint16) + np.array(color, dtype=np.uint16)) // 2
            col[:] = blend.astype(np.uint8)
    return write_ppm(img, path)
