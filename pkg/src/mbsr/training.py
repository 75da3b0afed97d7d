"""Training loop: Adam with single-cycle cosine annealing and early stopping.

The learning rate decays from lr_max to lr_min over max_iters (no
restarts).  Validation runs every val_every iterations; training stops
after `patience` consecutive validations without improvement and returns
the parameters of the best validation point.  Checkpoints are a custom
versioned binary so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import rng
from .dataset import batch_iterator, stack_batch, samples_by_id
from .network import SrModel, SrModelConfig, forward, loss_and_gradients, param_layout

CHECKPOINT_MAGIC = b"MBCK"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class TrainConfig:
    lr_max: float = 1e-4
    lr_min: float = 1e-7
    max_iters: int = 300_000
    val_every: int = 1000
    patience: int = 10
    batch_size: int = 16
    seed: int = 0
    loss: str = "l1"

    def __post_init__(self):
        if not self.lr_min < self.lr_max:
            raise ValueError(f"lr_min must be < lr_max, got {self.lr_min} >= {self.lr_max}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.max_iters < 1 or self.val_every < 1 or self.batch_size < 1:
            raise ValueError("max_iters, val_every, and batch_size must be positive")
        if self.loss != "l1":
            raise ValueError(f"only the 'l1' loss is supported, got {self.loss!r}")


def cosine_lr(t: int, cfg: TrainConfig) -> float:
    """Single-cycle cosine schedule: lr(0) = lr_max, lr(max_iters) = lr_min."""
    if not 0 <= t <= cfg.max_iters:
        raise ValueError(f"iteration {t} outside [0, {cfg.max_iters}]")
    if t == 0:
        return cfg.lr_max
    if t == cfg.max_iters:
        return cfg.lr_min
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + math.cos(math.pi * t / cfg.max_iters))


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(repr=False)
    v: dict[str, np.ndarray] = field(repr=False)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(model: SrModel) -> AdamState:
    zeros = lambda: {k: np.zeros_like(v, dtype=np.float64) for k, v in model.params.items()}
    return AdamState(m=zeros(), v=zeros())


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
    """One bias-corrected Adam update, in place and in a fixed key order."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name in params:
        g = np.asarray(grads[name], dtype=np.float64)
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        step = lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        params[name] -= step.astype(params[name].dtype)


@dataclass
class HistoryRow:
    iteration: int
    train_loss: float
    val_loss: float
    lr: float


def validation_loss(model: SrModel, val_samples, batch_size: int) -> float:
    """Mean L1 loss over the full validation set (unclamped outputs)."""
    total = 0.0
    count = 0
    ordered = sorted(val_samples, key=lambda s: s.patch_id)
    for lo in range(0, len(ordered), batch_size):
        batch = ordered[lo:lo + batch_size]
        x, y = stack_batch(batch, dtype=model.config.np_dtype)
        out = forward(model, x)
        total += float(np.abs(out - y).sum(dtype=np.float64))
        count += y.size
    return total / count


def train(model: SrModel, train_samples, val_samples, cfg: TrainConfig):
    """Optimize the model; returns (best_model, history).

    Batches are drawn with a fresh deterministic shuffle per epoch.  The
    model argument is updated in place up to the last executed iteration;
    the returned model holds the parameters of the best validation point.
    """
    if not train_samples or not val_samples:
        raise ValueError("train and validation sets must be nonempty")
    lookup = samples_by_id(train_samples)
    ids = sorted(lookup)
    state = init_adam(model)
    history: list[HistoryRow] = []
    best_val = math.inf
    best_params = {k: v.copy() for k, v in model.params.items()}
    bad_validations = 0
    running_train = 0.0
    running_count = 0
    t = 0
    epoch = 0
    stop = False
    while not stop and t < cfg.max_iters:
        batches = batch_iterator(lookup, ids, cfg.batch_size, rng.derive_seed(cfg.seed, epoch))
        for batch in batches:
            if t >= cfg.max_iters:
                break
            x, y = stack_batch(batch, dtype=model.config.np_dtype)
            lr = cosine_lr(t, cfg)
            try:
                loss, grads = loss_and_gradients(model, x, y)
            except FloatingPointError as exc:
                raise TrainingDiverged(str(exc), history) from exc
            adam_step(state, model.params, grads, lr)
            running_train += loss
            running_count += 1
            t += 1
            if t % cfg.val_every == 0:
                val = validation_loss(model, val_samples, cfg.batch_size)
                if not math.isfinite(val):
                    raise TrainingDiverged(f"non-finite validation loss at iteration {t}", history)
                history.append(HistoryRow(t, running_train / running_count, val, lr))
                running_train = 0.0
                running_count = 0
                if val < best_val:
                    best_val = val
                    best_params = {k: v.copy() for k, v in model.params.items()}
                    bad_validations = 0
                else:
                    bad_validations += 1
                    if bad_validations >= cfg.patience:
                        stop = True
                        break
        epoch += 1
    best_model = SrModel(model.config, best_params)
    return best_model, history


def save_history(history, path) -> None:
    lines = ["iteration,train_loss,val_loss,lr"]
    for row in history:
        lines.append(f"{row.iteration},{row.train_loss:.17g},{row.val_loss:.17g},{row.lr:.17g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Checkpoints: magic, version byte, little-endian JSON header (config,
# tensor index, iteration), then the raw tensor bytes in index order.

def save_checkpoint(path, model: SrModel, opt_state: AdamState | None = None, iteration: int = 0) -> None:
    tensors = [(name, model.params[name]) for name, _, _ in param_layout(model.config)]
    if opt_state is not None:
        for name, _, _ in param_layout(model.config):
            tensors.append((f"adam.m.{name}", opt_state.m[name]))
            tensors.append((f"adam.v.{name}", opt_state.v[name]))
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "iteration": iteration,
        "adam_t": opt_state.t if opt_state is not None else None,
        "tensors": [
            {"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)}
            for name, arr in tensors
        ],
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + struct.pack("<BI", CHECKPOINT_VERSION, len(raw)))
        fh.write(raw)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path):
    """Returns (model, opt_state or None, iteration)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, header_len = struct.unpack_from("<BI", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 9
    header = json.loads(blob[pos:pos + header_len].decode("utf-8"))
    pos += header_len
    config = SrModelConfig(**header["config"])
    arrays = {}
    for spec in header["tensors"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        dtype = np.dtype(spec["dtype"])
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=pos).reshape(spec["shape"])
        arrays[spec["name"]] = arr.copy()
        pos += count * dtype.itemsize
    params = {name: arrays[name] for name, _, _ in param_layout(config)}
    model = SrModel(config, params)
    opt_state = None
    if header["adam_t"] is not None:
        opt_state = AdamState(
            m={name: arrays[f"adam.m.{name}"] for name, _, _ in param_layout(config)},
            v={name: arrays[f"adam.v.{name}"] for name, _, _ in param_layout(config)},
            t=header["adam_t"],
        )
    return model, opt_state, header["iteration"]
