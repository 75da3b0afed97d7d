"""Command-line entry points wiring the pipeline end to end.

Subcommands: synth, analyze, fit-transforms, make-dataset, train,
evaluate, run, render.  Each reads a flat key-value config (--config),
honours MBSR_* environment overrides, and exits with a stage-specific
nonzero code on failure (see EXIT_CODES); partial outputs are left in
place for inspection.  `run` chains fit-transforms, make-dataset, train,
evaluate, and figure rendering, then writes a manifest of every artifact
with its SHA-256 hash; identical configs reproduce identical hashes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .dataset import (SplitSpec, assemble_misr, samples_by_id, split_patch_ids,
                      read_dataset_manifest, write_dataset_manifest)
from .grids import EmissionGrid, load_grid, save_grid
from .interconnection import build_matrix, combined_triangle, rank_compounds, write_matrix_csv
from .metrics import comparison_table, evaluate, histogram, error_map, write_report
from .network import init_model
from .patches import derive_lr, load_patch_archive, save_patch_archive, slice_patches
from .render import render_heatmap, render_histogram_figure
from .synthetic import gen_compound_set
from .training import load_checkpoint, save_checkpoint, save_history, train
from .transforms import fit_quantile_transform, load_transform, save_transform

EXIT_CODES = {
    "config": 2,
    "synth": 3,
    "analyze": 4,
    "fit-transforms": 5,
    "make-dataset": 6,
    "train": 7,
    "evaluate": 8,
    "render": 9,
}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.get("out.dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid_paths(grids_dir: Path, compound: str) -> list[Path]:
    cdir = grids_dir / compound
    if not cdir.is_dir():
        raise FileNotFoundError(f"no grid directory for compound {compound!r} under {grids_dir}")
    paths = sorted(p for p in cdir.iterdir() if p.suffix in (".bgrid", ".csv"))
    if not paths:
        raise FileNotFoundError(f"no grid files for compound {compound!r} under {cdir}")
    return paths


def _discover_compounds(grids_dir: Path) -> list[str]:
    if not grids_dir.is_dir():
        raise FileNotFoundError(f"grids directory {grids_dir} does not exist")
    return sorted(p.name for p in grids_dir.iterdir() if p.is_dir())


def _load_grids(grids_dir: Path, compounds) -> dict[str, list[EmissionGrid]]:
    out = {}
    for tag in compounds:
        grids = [load_grid(p) for p in _grid_paths(grids_dir, tag)]
        grids.sort(key=lambda g: g.date)
        out[tag] = grids
    return out


def _resolve_joined(cfg: RunConfig, reference: str) -> list[str]:
    raw = cfg.get("joined", "")
    if not raw.startswith("auto:"):
        return cfg.get_list("joined", "")
    try:
        _, mode, k = raw.split(":")
        k = int(k)
    except ValueError as exc:
        raise ConfigError(f"bad joined selector {raw!r}; expected auto:<most|least>:<k>") from exc
    grids_dir = Path(cfg.get("grids.dir"))
    grids = _load_grids(grids_dir, _discover_compounds(grids_dir))
    matrix = build_matrix(g for gs in grids.values() for g in gs)
    return rank_compounds(matrix, reference, k, mode)


def _patch_map(cfg: RunConfig, grids: list[EmissionGrid], min_nonzero_frac: float):
    patch_size = cfg.get_int("patch.size", 64)
    alpha = cfg.get_int("patch.alpha", 4)
    dims = {(g.rows, g.cols) for g in grids}
    if len(dims) != 1:
        raise ValueError(f"grids of one compound must share dims, got {sorted(dims)}")
    rows, cols = dims.pop()
    tiles = (rows // patch_size) * (cols // patch_size)
    records = {}
    for date_idx, grid in enumerate(grids):
        recs = slice_patches(grid, patch_size=patch_size,
                             min_nonzero_frac=min_nonzero_frac,
                             id_offset=date_idx * tiles)
        derive_lr(recs, alpha=alpha)
        for rec in recs:
            records[rec.patch_id] = rec
    return records


# ---------------------------------------------------------------------------
# Stages

def cmd_synth(cfg: RunConfig) -> None:
    spec = cfg.synth_spec()
    grids_dir = Path(cfg.get("grids.dir"))
    for grid in gen_compound_set(spec):
        cdir = grids_dir / grid.compound
        cdir.mkdir(parents=True, exist_ok=True)
        save_grid(grid, cdir / f"{grid.date.isoformat()}.bgrid")
    print(f"synth: wrote {len(spec.compounds)} compounds x {spec.n_dates} dates under {grids_dir}")


def cmd_analyze(cfg: RunConfig) -> None:
    grids_dir = Path(cfg.get("grids.dir"))
    compounds = cfg.get_list("compounds", "") or _discover_compounds(grids_dir)
    if len(compounds) < 2:
        raise ValueError(f"analysis needs at least 2 compounds, found {compounds}")
    grids = _load_grids(grids_dir, compounds)
    matrix = build_matrix(g for gs in grids.values() for g in gs)
    out = _out_dir(cfg) / "analysis"
    write_matrix_csv(matrix, out)
    render_heatmap(combined_triangle(matrix), out / "heatmap.ppm",
                   palette=cfg.get("render.palette", "sequential"),
                   value_range=(0.0, 1.0), block=24)
    print(f"analyze: {len(compounds)} compounds -> {out}")


def cmd_fit_transforms(cfg: RunConfig) -> None:
    grids_dir = Path(cfg.get("grids.dir"))
    reference = cfg.get("reference")
    joined = _resolve_joined(cfg, reference)
    min_frac = cfg.get_float("patch.min_nonzero_frac", 0.0)
    n_quantiles = cfg.get_int("transform.n_quantiles", 1000)
    grids = _load_grids(grids_dir, [reference] + joined)

    ref_patches = _patch_map(cfg, grids[reference], min_frac)
    train_ids, _, _ = split_patch_ids(sorted(ref_patches), cfg.split_spec())

    out = _out_dir(cfg) / "transforms"
    out.mkdir(parents=True, exist_ok=True)
    for tag in [reference] + joined:
        patches = ref_patches if tag == reference else _patch_map(cfg, grids[tag], 0.0)
        chunks = (patches[i].hr.ravel() for i in sorted(train_ids) if i in patches)
        t = fit_quantile_transform(chunks, n_quantiles=n_quantiles, compound=tag)
        save_transform(t, out / f"{tag}.bqt")
    print(f"fit-transforms: reference={reference} joined={joined} -> {out}")


def cmd_make_dataset(cfg: RunConfig) -> None:
    grids_dir = Path(cfg.get("grids.dir"))
    reference = cfg.get("reference")
    joined = _resolve_joined(cfg, reference)
    min_frac = cfg.get_float("patch.min_nonzero_frac", 0.0)
    grids = _load_grids(grids_dir, [reference] + joined)
    out = _out_dir(cfg)

    ref_patches = _patch_map(cfg, grids[reference], min_frac)
    ref_ids = sorted(ref_patches)
    spec = cfg.split_spec()
    splits = split_patch_ids(ref_ids, spec)

    alpha = cfg.get_int("patch.alpha", 4)
    for tag in [reference] + joined:
        patches = ref_patches if tag == reference else _patch_map(cfg, grids[tag], 0.0)
        keep = [patches[i] for i in ref_ids if i in patches]
        missing = [i for i in ref_ids if i not in patches]
        if missing:
            raise ValueError(f"compound {tag!r} lacks patches {missing[:5]}...")
        g0 = grids[tag][0]
        save_patch_archive(keep, out / "patches" / tag, g0.lat_res, g0.lon_res, alpha=alpha)

    transforms = {
        tag: load_transform(out / "transforms" / f"{tag}.bqt")
        for tag in [reference] + joined
    }
    write_dataset_manifest(out / "dataset.json", reference, joined, transforms, splits, spec)
    print(f"make-dataset: {len(ref_ids)} patches, splits "
          f"{tuple(len(s) for s in splits)} -> {out / 'dataset.json'}")


def _load_dataset(cfg: RunConfig):
    out = _out_dir(cfg)
    manifest = read_dataset_manifest(out / "dataset.json")
    reference = manifest["reference"]
    joined = manifest["joined"]
    archives = {
        tag: load_patch_archive(out / "patches" / tag)
        for tag in [reference] + joined
    }
    transforms = {
        tag: load_transform(out / "transforms" / f"{tag}.bqt")
        for tag in [reference] + joined
    }
    for tag, t in transforms.items():
        if t.fitted_on != manifest["transform_fingerprints"][tag]:
            raise ValueError(f"transform for {tag!r} does not match the dataset manifest")
    samples = assemble_misr(archives, reference, joined, transforms)
    return manifest, samples, transforms


def cmd_train(cfg: RunConfig) -> None:
    out = _out_dir(cfg)
    manifest, samples, _ = _load_dataset(cfg)
    by_id = samples_by_id(samples)
    train_set = [by_id[i] for i in manifest["train_ids"]]
    val_set = [by_id[i] for i in manifest["val_ids"]]
    tcfg = cfg.train_config()
    channels = 1 + len(manifest["joined"])
    model = init_model(cfg.model_config(channels), seed=tcfg.seed)
    best, history = train(model, train_set, val_set, tcfg)
    save_checkpoint(out / "checkpoint.mbck", best, iteration=history[-1].iteration if history else 0)
    save_history(history, out / "history.csv")
    print(f"train: {len(history)} validations, best val loss "
          f"{min((h.val_loss for h in history), default=float('nan')):.6f} -> {out / 'checkpoint.mbck'}")


def cmd_evaluate(cfg: RunConfig) -> None:
    out = _out_dir(cfg)
    manifest, samples, transforms = _load_dataset(cfg)
    by_id = samples_by_id(samples)
    test_set = [by_id[i] for i in manifest["test_ids"]]
    model, _, _ = load_checkpoint(out / "checkpoint.mbck")
    tag = cfg.get("dataset.tag", f"C{1 + len(manifest['joined'])}")
    report = evaluate(model, test_set, transforms, dataset_tag=tag)
    write_report(report, out / "report.csv", out / "report.json")
    csv_text, aligned = comparison_table({tag: report})
    (out / "table.csv").write_text(csv_text, encoding="utf-8")
    (out / "table.txt").write_text(aligned, encoding="utf-8")
    print(f"evaluate: {len(report.rows)} samples, mean SSIM {report.mean_ssim:.4f}, "
          f"mean NMSE {report.mean_nmse_db:.3f} dB")


def _render_examples(cfg: RunConfig) -> None:
    from .network import predict
    from .transforms import invert_transform

    out = _out_dir(cfg)
    manifest, samples, transforms = _load_dataset(cfg)
    by_id = samples_by_id(samples)
    test_set = [by_id[i] for i in manifest["test_ids"]]
    model, _, _ = load_checkpoint(out / "checkpoint.mbck")
    report = evaluate(model, test_set, transforms, dataset_tag="figures")
    n = cfg.get_int("report.examples", 2)
    ranked = sorted(report.rows, key=lambda r: r.nmse_db)
    chosen = (ranked[:n] + ranked[-n:]) if len(ranked) > 2 * n else ranked
    fig_dir = out / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    palette = cfg.get("render.palette", "sequential")
    t_ref = transforms[manifest["reference"]]
    for row in chosen:
        sample = by_id[row.patch_id]
        est_t = predict(model, sample.input[None].astype(model.config.np_dtype))[0, 0]
        est = invert_transform(t_ref, est_t)
        hr = sample.hr
        rng_pair = (float(hr.min()), float(hr.max()))
        stem = fig_dir / f"patch_{row.patch_id:06d}"
        render_heatmap(hr, f"{stem}_hr.ppm", palette=palette, value_range=rng_pair)
        render_heatmap(est, f"{stem}_sr.ppm", palette=palette, value_range=rng_pair)
        render_heatmap(error_map(hr, est), f"{stem}_err.ppm", palette=palette)
        h_hr = histogram(hr, bins=30, value_range=rng_pair)
        h_sr = histogram(est, bins=30, value_range=rng_pair)
        render_histogram_figure(h_hr, h_sr, f"{stem}_hist.ppm")
        with open(f"{stem}_hist.csv", "w", encoding="utf-8") as fh:
            fh.write("bin_lo,bin_hi,hr_count,sr_count\n")
            edges = np.linspace(h_hr.lo, h_hr.hi, 31)
            for b in range(30):
                fh.write(f"{edges[b]:.17g},{edges[b+1]:.17g},{h_hr.counts[b]},{h_sr.counts[b]}\n")


def _write_run_manifest(cfg: RunConfig) -> None:
    out = _out_dir(cfg)
    artifacts = {}
    for path in sorted(out.rglob("*")):
        if path.is_dir() or path.name == "manifest.json":
            continue
        rel = path.relative_to(out).as_posix()
        artifacts[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
    doc = {"artifacts": artifacts}
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_run(cfg: RunConfig) -> None:
    for stage, fn in (
        ("fit-transforms", cmd_fit_transforms),
        ("make-dataset", cmd_make_dataset),
        ("train", cmd_train),
        ("evaluate", cmd_evaluate),
    ):
        try:
            fn(cfg)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, f"{stage}: {exc}") from exc
    try:
        _render_examples(cfg)
        _write_run_manifest(cfg)
    except Exception as exc:
        raise StageError("render", f"render: {exc}") from exc
    print(f"run: complete -> {_out_dir(cfg) / 'manifest.json'}")


def cmd_render(cfg: RunConfig, in_path: str, out_path: str, palette: str | None) -> None:
    grid = load_grid(in_path)
    render_heatmap(grid.values, out_path,
                   palette=palette or cfg.get("render.palette", "sequential"))
    print(f"render: {in_path} -> {out_path}")


# ---------------------------------------------------------------------------

def _apply_flag_overrides(cfg: RunConfig, args) -> None:
    if getattr(args, "out", None):
        cfg.values["out.dir"] = args.out
    if getattr(args, "seed", None) is not None:
        cfg.values["split.seed"] = str(args.seed)
        cfg.values["train.seed"] = str(args.seed)
        cfg.values["synth.seed_shared"] = str(args.seed)
        cfg.values["synth.seed_compounds"] = str(args.seed + 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbsr",
        description="Multi-compound super-resolution of gridded emission maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("synth", "analyze", "fit-transforms", "make-dataset",
                 "train", "evaluate", "run"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None,
                       help="override split/train/synth seeds")
        p.add_argument("--out", default=None, help="override out.dir")
    p = sub.add_parser("render")
    p.add_argument("--config", default=None)
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", dest="out", required=True)
    p.add_argument("--palette", default=None)
    p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        if command == "render":
            cfg = load_config(args.config) if args.config else RunConfig({})
            if not Path(args.in_path).exists():
                raise ConfigError(f"input path {args.in_path} does not exist")
        else:
            cfg = load_config(args.config)
            _apply_flag_overrides(cfg, args)
            if command in ("analyze", "fit-transforms", "make-dataset", "run"):
                grids_dir = Path(cfg.get("grids.dir"))
                if not grids_dir.is_dir():
                    raise ConfigError(f"grids.dir {grids_dir} does not exist")
    except (ConfigError, OSError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]

    handlers = {
        "synth": cmd_synth,
        "analyze": cmd_analyze,
        "fit-transforms": cmd_fit_transforms,
        "make-dataset": cmd_make_dataset,
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "run": cmd_run,
    }
    try:
        if command == "render":
            cmd_render(cfg, args.in_path, args.out, args.palette)
        else:
            handlers[command](cfg)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.stage]
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except Exception as exc:
        print(f"error [{command}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(command, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
