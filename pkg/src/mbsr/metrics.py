"""Evaluation metrics and reporting: NMSE in dB, evaluation SSIM, error
maps, histograms.

Evaluation runs in physical units: network outputs are clamped to [0, 1],
inverse-transformed through the reference compound's quantile map, and
compared against the physical HR ground truth.  NMSE normalizes the MSE by
the mean squared ground truth; SSIM is computed after min-max normalizing
both maps by the ground truth's range (dynamic range 1), so estimator
errors are penalized rather than absorbed into the normalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import MisrSample, stack_batch
from .interconnection import ssim
from .network import SrModel, predict
from .transforms import QuantileTransform, invert_transform

NMSE_DB_FLOOR = -300.0


def nmse_db(hr, est) -> float:
    """10*log10( mean((hr-est)^2) / mean(hr^2) ), floored at -300 dB."""
    hr = np.asarray(hr, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if hr.shape != est.shape:
        raise ValueError(f"shape mismatch: {hr.shape} vs {est.shape}")
    denom = float(np.mean(hr * hr))
    if denom == 0.0:
        raise ValueError("all-zero reference map: NMSE normalization undefined")
    mse = float(np.mean((hr - est) ** 2))
    if mse == 0.0:
        return NMSE_DB_FLOOR
    return max(NMSE_DB_FLOOR, 10.0 * np.log10(mse / denom))


def error_map(hr, est) -> np.ndarray:
    """Elementwise absolute difference |hr - est|."""
    hr = np.asarray(hr, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if hr.shape != est.shape:
        raise ValueError(f"shape mismatch: {hr.shape} vs {est.shape}")
    return np.abs(hr - est)


@dataclass(frozen=True)
class Histogram:
    counts: np.ndarray
    lo: float
    hi: float
    below: int
    above: int


def histogram(values, bins: int, value_range: tuple[float, float]) -> Histogram:
    """Equal-width half-open bins (last bin closed); out-of-range values are
    counted in the overflow fields, never silently dropped."""
    lo, hi = value_range
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if not lo < hi:
        raise ValueError(f"invalid range ({lo}, {hi})")
    values = np.asarray(values, dtype=np.float64).ravel()
    below = int((values < lo).sum())
    above = int((values > hi).sum())
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(counts=counts.astype(np.int64), lo=lo, hi=hi, below=below, above=above)


@dataclass
class EvalRow:
    patch_id: int
    ssim: float
    nmse_db: float


@dataclass
class EvalReport:
    rows: list[EvalRow]
    mean_ssim: float
    mean_nmse_db: float
    fingerprint: dict = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)


def evaluate(
    model: SrModel,
    samples: list[MisrSample],
    transforms: dict[str, QuantileTransform],
    dataset_tag: str = "",
    estimator=None,
) -> EvalReport:
    """Score an estimator on physical-unit reconstructions.

    ``estimator`` defaults to the model's inference pass; pass a callable
    (batch_input_array -> batch output) to score baselines such as bicubic
    upsampling through the same protocol.  Samples whose physical HR map is
    constant (e.g. all ocean) carry no normalizable signal and are recorded
    in ``skipped`` instead of scored.
    """
    if not samples:
        raise ValueError("empty evaluation set")
    reference = samples[0].compounds[0]
    if reference not in transforms:
        raise KeyError(f"no transform for reference compound {reference!r}")
    if estimator is None:
        if model.config.in_channels != samples[0].input.shape[0]:
            raise ValueError(
                f"model expects {model.config.in_channels} channels, "
                f"samples have {samples[0].input.shape[0]}"
            )
        estimator = lambda x: predict(model, x)
    t_ref = transforms[reference]

    rows: list[EvalRow] = []
    skipped: list[int] = []
    ordered = sorted(samples, key=lambda s: s.patch_id)
    batch_size = 32
    for lo in range(0, len(ordered), batch_size):
        batch = ordered[lo:lo + batch_size]
        x, _ = stack_batch(batch)
        est_t = np.clip(np.asarray(estimator(x), dtype=np.float64), 0.0, 1.0)
        for k, sample in enumerate(batch):
            est_phys = invert_transform(t_ref, est_t[k, 0])
            hr_phys = sample.hr if sample.hr is not None else invert_transform(t_ref, sample.target)
            span = float(hr_phys.max() - hr_phys.min())
            if span == 0.0:
                skipped.append(sample.patch_id)
                continue
            hr_n = (hr_phys - hr_phys.min()) / span
            est_n = (est_phys - hr_phys.min()) / span
            rows.append(EvalRow(
                patch_id=sample.patch_id,
                ssim=ssim(hr_n, est_n, data_range=1.0),
                nmse_db=nmse_db(hr_phys, est_phys),
            ))
    if not rows:
        raise ValueError("no scorable samples (all reference maps constant)")
    fingerprint = {
        "channels": len(samples[0].compounds),
        "compounds": list(samples[0].compounds),
        "dataset_tag": dataset_tag,
        "n_samples": len(rows),
    }
    return EvalReport(
        rows=rows,
        mean_ssim=float(np.mean([r.ssim for r in rows])),
        mean_nmse_db=float(np.mean([r.nmse_db for r in rows])),
        fingerprint=fingerprint,
        skipped=skipped,
    )


def write_report(report: EvalReport, csv_path, json_path) -> None:
    lines = ["patch_id,ssim,nmse_db"]
    for r in report.rows:
        lines.append(f"{r.patch_id},{r.ssim:.17g},{r.nmse_db:.17g}")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    doc = {
        "mean_ssim": report.mean_ssim,
        "mean_nmse_db": report.mean_nmse_db,
        "fingerprint": report.fingerprint,
        "skipped": report.skipped,
        "n_samples": len(report.rows),
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def comparison_table(reports: dict[str, EvalReport]) -> tuple[str, str]:
    """(csv_text, aligned_text) summarizing several configurations."""
    header = ["configuration", "channels", "mean_ssim", "mean_nmse_db"]
    rows = [
        [label, str(rep.fingerprint.get("channels", "")),
         f"{rep.mean_ssim:.4f}", f"{rep.mean_nmse_db:.3f}"]
        for label, rep in sorted(reports.items())
    ]
    csv_text = "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    aligned = "\n".join([fmt.format(*header)] + [fmt.format(*r) for r in rows]) + "\n"
    return csv_text, aligned
