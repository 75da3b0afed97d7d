"""Multi-compound super-resolution of gridded biogenic emission maps.

Coarse emission maps of several compounds are stacked channel-wise, mapped
per compound to uniform [0, 1] by invertible quantile transforms, passed
through a residual channel-attention network, and the reference channel's
inverse transform returns the super-resolved physical field.  Includes the
compound inter-connection analysis (PCC / SSIM) used to pick which
compounds to join, and the full evaluation protocol (SSIM, NMSE in dB).
"""

from .grids import EmissionGrid, GridFormatError, GridValidationError, load_grid, save_grid
from .patches import (PatchRecord, downsample_bicubic, upsample_bicubic,
                      slice_patches, derive_lr, save_patch_archive, load_patch_archive)
from .transforms import (QuantileTransform, fit_quantile_transform, apply_transform,
                         invert_transform, save_transform, load_transform)
from .interconnection import (InterconnectionMatrix, pcc, ssim, build_matrix,
                              rank_compounds, combined_triangle)
from .dataset import (AlignmentError, MisrSample, SplitSpec, assemble_misr,
                      split_dataset, split_patch_ids, batch_iterator)
from .network import (SrModel, SrModelConfig, init_model, parameter_count,
                      forward, predict, loss_and_gradients)
from .training import (AdamState, TrainConfig, TrainingDiverged, adam_step, cosine_lr,
                       init_adam, train, save_checkpoint, load_checkpoint)
from .metrics import EvalReport, Histogram, error_map, evaluate, histogram, nmse_db
from .synthetic import CompoundSpec, SynthSpec, gen_compound_set, gen_field, latent_fields
from .render import render_heatmap

__version__ = "0.1.0"

__all__ = [
    "EmissionGrid", "GridFormatError", "GridValidationError", "load_grid", "save_grid",
    "PatchRecord", "downsample_bicubic", "upsample_bicubic", "slice_patches",
    "derive_lr", "save_patch_archive", "load_patch_archive",
    "QuantileTransform", "fit_quantile_transform", "apply_transform",
    "invert_transform", "save_transform", "load_transform",
    "InterconnectionMatrix", "pcc", "ssim", "build_matrix", "rank_compounds",
    "combined_triangle",
    "AlignmentError", "MisrSample", "SplitSpec", "assemble_misr",
    "split_dataset", "split_patch_ids", "batch_iterator",
    "SrModel", "SrModelConfig", "init_model", "parameter_count",
    "forward", "predict", "loss_and_gradients",
    "AdamState", "TrainConfig", "TrainingDiverged", "adam_step", "cosine_lr",
    "init_adam", "train", "save_checkpoint", "load_checkpoint",
    "EvalReport", "Histogram", "error_map", "evaluate", "histogram", "nmse_db",
    "CompoundSpec", "SynthSpec", "gen_compound_set", "gen_field", "latent_fields",
    "render_heatmap",
    "__version__",
]
