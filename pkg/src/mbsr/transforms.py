"""Per-compound quantile transforms onto the uniform [0, 1] domain.

Emission fields are sparse, tiny in magnitude, and spread over many orders
of magnitude, so each compound gets its own monotone empirical-CDF map
before entering the network, and the reference compound's inverse map takes
the network output back to physical units.

The fitted object stores n equally spaced empirical quantiles ("knots").
Forward mapping is piecewise-linear interpolation of the knot CDF; values
tied at a knot plateau (the zero mass, typically) map to the midpoint of
the plateau's probability interval, which keeps the inverse well defined.
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng

TRANSFORM_MAGIC = b"BQTF"
TRANSFORM_VERSION = 1


@dataclass(frozen=True)
class QuantileTransform:
    compound: str
    knots: np.ndarray = field(repr=False)
    fitted_on: str = ""

    def __post_init__(self):
        knots = np.ascontiguousarray(self.knots, dtype=np.float64)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError(f"need at least 2 knots, got shape {knots.shape}")
        if not np.isfinite(knots).all():
            raise ValueError("knots must be finite")
        if (np.diff(knots) < 0).any():
            raise ValueError("knots must be nondecreasing")
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)

    @property
    def n(self) -> int:
        return self.knots.size

    @property
    def probs(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)


def _reservoir_downsample(chunks, cap: int, seed: int):
    """Keep at most ``cap`` values from a stream of 1-D arrays.

    Classic reservoir sampling, vectorized per chunk: element number t
    (0-based over the whole stream) lands at slot splitmix64(seed, t) mod
    (t + 1) and is kept if the slot is below cap.
    """
    reservoir = np.empty(cap, dtype=np.float64)
    seen = 0
    for chunk in chunks:
        chunk = np.asarray(chunk, dtype=np.float64).ravel()
        if chunk.size == 0:
            continue
        if not np.isfinite(chunk).all():
            raise ValueError("non-finite sample in transform fit stream")
        if seen < cap:
            take = min(cap - seen, chunk.size)
            reservoir[seen:seen + take] = chunk[:take]
            seen += take
            chunk = chunk[take:]
            if chunk.size == 0:
                continue
        t = np.arange(seen, seen + chunk.size, dtype=np.uint64)
        slots = rng.splitmix64(seed, t) % (t + np.uint64(1))
        hits = np.nonzero(slots < cap)[0]
        for i in hits:
            reservoir[int(slots[i])] = chunk[i]
        seen += chunk.size
    return reservoir[:min(seen, cap)], seen


def fit_quantile_transform(
    samples,
    n_quantiles: int = 1000,
    compound: str = "",
    max_fit_samples: int = 1_000_000,
    seed: int = 0,
) -> QuantileTransform:
    """Fit the empirical-quantile knots of one compound.

    ``samples`` is an array or an iterable of arrays (streamed); at most
    ``max_fit_samples`` values are retained via reservoir subsampling.
    Knot k is the empirical quantile at probability k/(n-1), linearly
    interpolated between order statistics.
    """
    if n_quantiles < 2:
        raise ValueError(f"n_quantiles must be >= 2, got {n_quantiles}")
    if isinstance(samples, np.ndarray) or np.isscalar(samples):
        chunks = [np.asarray(samples)]
    else:
        chunks = samples
    values, seen = _reservoir_downsample(chunks, max_fit_samples, seed)
    if seen < 2:
        raise ValueError(f"need at least 2 samples to fit a transform, got {seen}")
    knots = np.quantile(values, np.linspace(0.0, 1.0, n_quantiles), method="linear")
    digest = hashlib.sha256()
    digest.update(compound.encode("utf-8") + b"\0")
    digest.update(np.sort(values).tobytes())
    return QuantileTransform(compound=compound, knots=knots, fitted_on=digest.hexdigest())


def apply_transform(t: QuantileTransform, x) -> np.ndarray:
    """Map emission values to [0, 1] through the fitted empirical CDF.

    Ascending and descending interpolation are averaged so values sitting
    on a tied knot plateau land at the midpoint of its probability
    interval; everything at or below the first knot maps to its plateau
    (0.0 when untied), symmetrically at the top.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("non-finite input to apply_transform")
    knots, p = t.knots, t.probs
    ascending = np.interp(x, knots, p)
    descending = -np.interp(-x, -knots[::-1], -p[::-1])
    return 0.5 * (ascending + descending)


def invert_transform(t: QuantileTransform, u) -> np.ndarray:
    """Piecewise-linear inverse CDF; out-of-range inputs are clamped with a warning."""
    u = np.asarray(u, dtype=np.float64)
    if not np.isfinite(u).all():
        raise ValueError("non-finite input to invert_transform")
    n_out = int(((u < 0.0) | (u > 1.0)).sum())
    if n_out:
        warnings.warn(f"invert_transform: clamped {n_out} values outside [0, 1]", stacklevel=2)
        u = np.clip(u, 0.0, 1.0)
    return np.interp(u, t.probs, t.knots)


def save_transform(t: QuantileTransform, path) -> None:
    """Binary knot table plus a JSON sidecar (same stem, .json) for inspection."""
    def lp(text: str) -> bytes:
        raw = text.encode("utf-8")
        return struct.pack("<H", len(raw)) + raw

    blob = (
        TRANSFORM_MAGIC
        + struct.pack("<B", TRANSFORM_VERSION)
        + lp(t.compound)
        + lp(t.fitted_on)
        + struct.pack("<I", t.n)
        + t.knots.astype("<f8", copy=False).tobytes()
    )
    with open(path, "wb") as fh:
        fh.write(blob)
    sidecar = {
        "compound": t.compound,
        "n": t.n,
        "fitted_on": t.fitted_on,
        "min": float(t.knots[0]),
        "max": float(t.knots[-1]),
        "knots": [float(v) for v in t.knots],
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_transform(path) -> QuantileTransform:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != TRANSFORM_MAGIC:
        raise ValueError(f"{path}: not a transform file (bad magic)")
    if blob[4] != TRANSFORM_VERSION:
        raise ValueError(f"{path}: unsupported transform version {blob[4]}")
    pos = 5

    def take_str():
        nonlocal pos
        (n,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        out = blob[pos:pos + n].decode("utf-8")
        pos += n
        return out

    compound = take_str()
    fitted_on = take_str()
    (n,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    knots = np.frombuffer(blob, dtype="<f8", count=n, offset=pos)
    return QuantileTransform(compound=compound, knots=knots, fitted_on=fitted_on)
