"""Sample assembly, deterministic splits, and batch iteration.

A training sample stacks C transformed 16x16 LR maps (channel 0 is always
the reference compound) against the reference's transformed 64x64 HR
target.  Splitting is a seeded Fisher-Yates shuffle of the ascending patch
ids (splitmix64 counter generator, see rng.py) cut 70/20/10, so the same
seed yields the same partition on any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .patches import PatchRecord
from .transforms import QuantileTransform, apply_transform


class AlignmentError(ValueError):
    """A joined compound's archive is missing a patch the reference has."""


@dataclass
class MisrSample:
    patch_id: int
    compounds: tuple[str, ...]
    input: np.ndarray                 # (C, h, w) transformed LR stack
    target: np.ndarray                # (H, W) transformed HR reference
    hr: np.ndarray | None = None      # physical HR reference, for evaluation


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    fractions: tuple[float, float, float] = (0.70, 0.20, 0.10)

    def __post_init__(self):
        if len(self.fractions) != 3 or abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must be three values summing to 1, got {self.fractions}")
        if any(f < 0 for f in self.fractions):
            raise ValueError(f"fractions must be nonnegative, got {self.fractions}")


def assemble_misr(
    archives,
    reference: str,
    joined,
    transforms,
) -> list[MisrSample]:
    """Stack aligned per-compound LR patches into training samples.

    ``archives`` maps compound tag to {patch_id: PatchRecord}; every joined
    compound must cover every reference patch id.  Channel order is the
    reference first, then ``joined`` in the given order.
    """
    if reference not in archives:
        raise KeyError(f"no archive for reference compound {reference!r}")
    order = [reference] + list(joined)
    for tag in order:
        if tag not in transforms:
            raise KeyError(f"no fitted transform for compound {tag!r}")
        if tag not in archives:
            raise KeyError(f"no archive for compound {tag!r}")

    samples = []
    for pid in sorted(archives[reference]):
        channels = []
        for tag in order:
            rec = archives[tag].get(pid)
            if rec is None:
                raise AlignmentError(f"compound {tag!r} has no patch {pid}")
            if rec.lr is None:
                raise AlignmentError(f"compound {tag!r} patch {pid} has no LR map")
            channels.append(apply_transform(transforms[tag], rec.lr))
        ref_rec = archives[reference][pid]
        samples.append(MisrSample(
            patch_id=pid,
            compounds=tuple(order),
            input=np.stack(channels, axis=0),
            target=apply_transform(transforms[reference], ref_rec.hr),
            hr=np.array(ref_rec.hr),
        ))
    return samples


def split_patch_ids(patch_ids, spec: SplitSpec):
    """Deterministic (train, val, test) partition of patch ids.

    Ids are sorted ascending, permuted by the seeded Fisher-Yates shuffle,
    and cut at floor(0.7 N) / floor(0.2 N); the remainder is the test set.
    """
    ids = sorted(int(i) for i in patch_ids)
    n = len(ids)
    if n < 10:
        raise ValueError(f"need at least 10 samples to split, got {n}")
    perm = rng.permutation(n, spec.seed)
    shuffled = [ids[i] for i in perm]
    n_train = int(np.floor(spec.fractions[0] * n))
    n_val = int(np.floor(spec.fractions[1] * n))
    return (
        shuffled[:n_train],
        shuffled[n_train:n_train + n_val],
        shuffled[n_train + n_val:],
    )


def split_dataset(samples, spec: SplitSpec):
    """Split assembled samples by their patch ids (see split_patch_ids)."""
    return split_patch_ids((s.patch_id for s in samples), spec)


def samples_by_id(samples) -> dict[int, MisrSample]:
    return {s.patch_id: s for s in samples}


def batch_iterator(samples, indices, batch_size: int, epoch_seed: int):
    """One epoch of deterministically shuffled batches; short tail emitted.

    ``samples`` is a sequence of MisrSample or a {patch_id: sample} map;
    ``indices`` are the patch ids to draw from.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    indices = list(indices)
    if not indices:
        raise ValueError("empty index list")
    lookup = samples if isinstance(samples, dict) else samples_by_id(samples)
    order = rng.shuffled(indices, epoch_seed)
    for lo in range(0, len(order), batch_size):
        yield [lookup[i] for i in order[lo:lo + batch_size]]


def stack_batch(batch, dtype=np.float64):
    """(N, C, h, w) inputs and (N, 1, H, W) targets for the network."""
    x = np.stack([s.input for s in batch]).astype(dtype)
    y = np.stack([s.target for s in batch]).astype(dtype)[:, None, :, :]
    return x, y


def write_dataset_manifest(
    path,
    reference: str,
    joined,
    transforms,
    splits,
    split_spec: SplitSpec,
) -> None:
    """JSON manifest tying a dataset to its transforms and split."""
    train, val, test = splits
    doc = {
        "reference": reference,
        "joined": list(joined),
        "transform_fingerprints": {tag: t.fitted_on for tag, t in sorted(transforms.items())},
        "split_seed": split_spec.seed,
        "fractions": list(split_spec.fractions),
        "train_ids": list(map(int, train)),
        "val_ids": list(map(int, val)),
        "test_ids": list(map(int, test)),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_dataset_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
