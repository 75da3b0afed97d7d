"""Synthetic multi-compound emission archives with controllable structure.

Each compound's latent field mixes a shared component with its own smooth
Gaussian random field; an exponential link plus quantile thresholding then
reproduces the awkward statistics of real emission maps: heavy sparsity,
values spread over many decades, hard zeros over "ocean".

Three sharing modes:

* ``independent`` -- the shared component is its own random field; pairwise
  latent correlation of compounds i, j is rho_i * rho_j in expectation.
* ``complementary`` -- compound 0 is the reference; auxiliaries share the
  reference field's high-frequency residual (field minus its smoothed
  self), each displaced by a small per-auxiliary offset (think co-emitted
  species advected a few cells downwind).  The displacement matters:
  coarse maps are produced by point sampling, so an undisplaced copy is
  sampled at the same positions as the reference and adds nothing, while
  displaced copies interleave the sampling grid and genuinely carry
  detail the reference's coarse map lost.
* ``redundant`` -- auxiliaries share the reference field itself; with
  rho = 1 they are monotone copies of it and add no information.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from . import rng
from .grids import EmissionGrid

EMISSION_MAX = 1e-9
EMISSION_MIN_POSITIVE = 1e-30

# Default displacement (rows, cols) of the shared residual for auxiliary
# compound 1, 2, 3, ... in complementary mode; offsets interleave a x4
# coarse sampling grid.
DEFAULT_AUX_SHIFTS = ((2, 2), (2, 0), (0, 2), (1, 1), (3, 1), (1, 3))


@dataclass(frozen=True)
class CompoundSpec:
    tag: str
    rho: float = 0.0          # mixing weight of the shared component
    sparsity_q: float = 0.0   # quantile below which cells become hard zeros
    gamma: float = 2.0        # dynamic-range exponent of the exponential link

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")
        if not 0.0 <= self.sparsity_q < 1.0:
            raise ValueError(f"sparsity_q must be in [0, 1), got {self.sparsity_q}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class SynthSpec:
    rows: int
    cols: int
    compounds: tuple[CompoundSpec, ...]
    correlation_length: float = 6.0
    seed_shared: int = 0
    seed_compounds: int = 1
    mode: str = "independent"   # independent | complementary | redundant
    hf_sigma: float = 2.0       # smoothing scale defining "high frequency"
    aux_shifts: tuple = DEFAULT_AUX_SHIFTS  # residual displacement per auxiliary
    n_dates: int = 1
    start_date: _dt.date = field(default_factory=lambda: _dt.date(2000, 1, 1))
    lat_res: float = 0.25
    lon_res: float = 0.25

    def __post_init__(self):
        if self.correlation_length < 1:
            raise ValueError(f"correlation_length must be >= 1, got {self.correlation_length}")
        if self.mode not in ("independent", "complementary", "redundant"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.compounds:
            raise ValueError("need at least one compound")
        if self.n_dates < 1:
            raise ValueError(f"n_dates must be >= 1, got {self.n_dates}")
        object.__setattr__(self, "compounds", tuple(self.compounds))


def _standardize(f: np.ndarray) -> np.ndarray:
    f = f - f.mean()
    sd = f.std()
    if sd == 0.0:
        raise ValueError("degenerate field: zero variance")
    return f / sd


def gen_field(seed: int, dims: tuple[int, int], correlation_length: float) -> np.ndarray:
    """Smooth zero-mean unit-variance random field, deterministic per seed.

    White Gaussian noise convolved with a Gaussian kernel of the given
    scale (periodic boundaries), then standardized.
    """
    rows, cols = dims
    if rows < 8 or cols < 8:
        raise ValueError(f"dims must be at least 8x8, got {dims}")
    gen = np.random.Generator(np.random.PCG64(seed))
    noise = gen.standard_normal((rows, cols))
    return _standardize(gaussian_filter(noise, sigma=correlation_length, mode="wrap"))


def _latents_for_date(spec: SynthSpec, date_idx: int) -> list[np.ndarray]:
    dims = (spec.rows, spec.cols)
    own = [
        gen_field(rng.derive_seed(spec.seed_compounds, c_idx, date_idx), dims, spec.correlation_length)
        for c_idx in range(len(spec.compounds))
    ]
    if spec.mode == "independent":
        shared = gen_field(rng.derive_seed(spec.seed_shared, date_idx), dims, spec.correlation_length)
        return [c.rho * shared + np.sqrt(1.0 - c.rho ** 2) * f
                for c, f in zip(spec.compounds, own)]

    if spec.mode == "complementary":
        ref = own[0]
        shared = _standardize(ref - gaussian_filter(ref, sigma=spec.hf_sigma, mode="wrap"))
    else:  # redundant
        shared = own[0]

    latents = [own[0]]
    for aux_idx, (cspec, field) in enumerate(zip(spec.compounds[1:], own[1:])):
        if spec.mode == "complementary":
            dr, dc = spec.aux_shifts[aux_idx % len(spec.aux_shifts)]
            src = np.roll(shared, shift=(dr, dc), axis=(0, 1))
        else:
            src = shared
        latents.append(cspec.rho * src + np.sqrt(1.0 - cspec.rho ** 2) * field)
    return latents


def latent_fields(spec: SynthSpec, date_idx: int = 0) -> dict[str, np.ndarray]:
    """Latent (pre-link) fields per compound tag, for diagnostics and tests."""
    return {c.tag: f for c, f in zip(spec.compounds, _latents_for_date(spec, date_idx))}


def _emission_from_latent(latent: np.ndarray, cspec: CompoundSpec) -> np.ndarray:
    e = np.exp(cspec.gamma * latent)
    if cspec.sparsity_q > 0.0:
        e[e < np.quantile(e, cspec.sparsity_q)] = 0.0
    positive = e > 0.0
    if positive.any():
        e[positive] *= EMISSION_MAX / e[positive].max()
        np.maximum(e, EMISSION_MIN_POSITIVE, where=positive, out=e)
    return e


def gen_compound_set(spec: SynthSpec) -> list[EmissionGrid]:
    """All compounds x dates as validated emission grids.

    Dates advance in 30-day steps from ``start_date``; every (compound,
    date) pair is deterministic in the spec's seeds.
    """
    grids = []
    for d in range(spec.n_dates):
        date = spec.start_date + _dt.timedelta(days=30 * d)
        for cspec, latent in zip(spec.compounds, _latents_for_date(spec, d)):
            values = _emission_from_latent(latent, cspec)
            grids.append(EmissionGrid(cspec.tag, date, spec.lat_res, spec.lon_res, values))
    return grids
