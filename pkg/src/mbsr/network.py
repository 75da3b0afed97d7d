"""Residual channel-attention super-resolution network, in plain numpy.

The operator maps a (N, C, 16, 16) stack of transformed LR maps to a
(N, 1, 64, 64) estimate of the reference compound's transformed HR map:

    head 3x3 conv (C -> F)
    B residual blocks: conv-relu-conv (F -> F) gated by channel attention
      (global average pool -> F/r -> F, sigmoid), added back to the input
    long skip: add the head output
    two upsampling stages: 3x3 conv (F -> 4F) + depth-to-space x2
    tail 3x3 conv (F -> 1)

Convolutions are stride-1, zero-padded, evaluated as im2col matrix
products; every layer carries a hand-derived backward pass, checked
against central finite differences by the test suite.  All computation is
sequential and seeded, so forward passes and training trajectories are
bit-reproducible for a fixed dtype on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from numpy.lib.stride_tricks import sliding_window_view

import numpy as np

from . import rng

_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class SrModelConfig:
    in_channels: int = 1
    features: int = 32
    blocks: int = 5
    attention_reduction: int = 8
    scale: int = 4
    dtype: str = "float32"

    def __post_init__(self):
        if self.in_channels < 1:
            raise ValueError(f"in_channels must be >= 1, got {self.in_channels}")
        if self.blocks < 1:
            raise ValueError(f"blocks must be >= 1, got {self.blocks}")
        if self.features % self.attention_reduction:
            raise ValueError(
                f"features ({self.features}) must be divisible by "
                f"attention_reduction ({self.attention_reduction})"
            )
        if self.scale != 4:
            raise ValueError("scale is fixed at 4 (two x2 sub-pixel stages)")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return _DTYPES[self.dtype]


def param_layout(config: SrModelConfig):
    """Ordered (name, shape, fan_in) of every parameter tensor.

    fan_in is None for biases (zero-initialized).  The order is the
    initialization counter order, so it must stay stable.
    """
    c, f, r = config.in_channels, config.features, config.attention_reduction
    layout = [("head.w", (f, c, 3, 3), c * 9), ("head.b", (f,), None)]
    for i in range(config.blocks):
        layout += [
            (f"block{i}.conv1.w", (f, f, 3, 3), f * 9),
            (f"block{i}.conv1.b", (f,), None),
            (f"block{i}.conv2.w", (f, f, 3, 3), f * 9),
            (f"block{i}.conv2.b", (f,), None),
            (f"block{i}.gate.w1", (f // r, f), f),
            (f"block{i}.gate.b1", (f // r,), None),
            (f"block{i}.gate.w2", (f, f // r), f // r),
            (f"block{i}.gate.b2", (f,), None),
        ]
    layout += [
        ("up1.w", (4 * f, f, 3, 3), f * 9),
        ("up1.b", (4 * f,), None),
        ("up2.w", (4 * f, f, 3, 3), f * 9),
        ("up2.b", (4 * f,), None),
        ("tail.w", (1, f, 3, 3), f * 9),
        ("tail.b", (1,), None),
    ]
    return layout


def parameter_count(config: SrModelConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape, _ in param_layout(config))


@dataclass
class SrModel:
    config: SrModelConfig
    params: dict[str, np.ndarray] = field(repr=False)

    def copy(self) -> "SrModel":
        return SrModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def astype(self, dtype: str) -> "SrModel":
        cfg = replace(self.config, dtype=dtype)
        return SrModel(cfg, {k: v.astype(cfg.np_dtype) for k, v in self.params.items()})


def init_model(config: SrModelConfig, seed: int) -> SrModel:
    """Deterministic init: conv/dense weights ~ U(+-sqrt(6/fan_in)), biases 0,
    the attention gate's output layer scaled by 0.1."""
    params = {}
    for idx, (name, shape, fan_in) in enumerate(param_layout(config)):
        size = int(np.prod(shape))
        if fan_in is None:
            params[name] = np.zeros(shape, dtype=config.np_dtype)
            continue
        bound = np.sqrt(6.0 / fan_in)
        u = rng.counter_uniform(rng.derive_seed(seed, idx), size)
        w = (2.0 * u - 1.0) * bound
        if name.endswith("gate.w2"):
            w = w * 0.1
        params[name] = w.reshape(shape).astype(config.np_dtype)
    return SrModel(config, params)


# ---------------------------------------------------------------------------
# Layer primitives.  Activations are kept in NHWC internally: the im2col
# gather then degenerates into nine contiguous slab copies and the GEMM
# outputs reshape for free, which is where essentially all the training
# time goes.  Public entry points still speak NCHW.

def _im2col3(x: np.ndarray) -> np.ndarray:
    """(n, h, w, c) -> (n*h*w, 9c) patch matrix, zero-padded, taps ordered
    (dy, dx, channel)."""
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.empty((n, h, w, 9, c), dtype=x.dtype)
    for u in range(3):
        for v in range(3):
            cols[:, :, :, u * 3 + v, :] = xp[:, u:u + h, v:v + w, :]
    return cols.reshape(n * h * w, 9 * c)


def _wmat(w: np.ndarray) -> np.ndarray:
    # (f, c, 3, 3) spec layout -> (9c, f) matching _im2col3's tap order
    return np.ascontiguousarray(w.transpose(2, 3, 1, 0).reshape(-1, w.shape[0]))


def conv3_forward(x, w, b):
    n, h, wid, c = x.shape
    f = w.shape[0]
    cols = _im2col3(x)
    y = cols @ _wmat(w)
    y += b
    return y.reshape(n, h, wid, f), (x.shape, cols, w)


def _col2im3(dcols, shape):
    """Adjoint of _im2col3: scatter-add (n*h*w, 9c) tap gradients back."""
    n, h, w, c = shape
    dcols = dcols.reshape(n, h, w, 9, c)
    dxp = np.zeros((n, h + 2, w + 2, c), dtype=dcols.dtype)
    for u in range(3):
        for v in range(3):
            dxp[:, u:u + h, v:v + w, :] += dcols[:, :, :, u * 3 + v, :]
    return dxp[:, 1:-1, 1:-1, :]


def conv3_backward(cache, dy):
    (n, h, wid, c), cols, w = cache
    f = w.shape[0]
    dy2 = dy.reshape(n * h * wid, f)
    dw = (cols.T @ dy2).reshape(3, 3, c, f).transpose(3, 2, 0, 1)
    db = dy2.sum(axis=0)
    if f > 2 * c:
        # wide output (the upsampler convs): scattering the tap gradients
        # moves f/c times less memory than im2col-ing dy
        dx = _col2im3(dy2 @ _wmat(w).T, (n, h, wid, c))
    else:
        wt = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)   # flip taps, swap channels
        dx = _im2col3(dy) @ _wmat(wt)
        dx = dx.reshape(n, h, wid, c)
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0.0), (x > 0.0)


def relu_backward(mask, dy):
    return dy * mask


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gate_forward(x, w1, b1, w2, b2):
    """Channel attention: squeeze by global average pool, two-layer gate."""
    n, h, w, c = x.shape
    z = x.mean(axis=(1, 2))
    h_pre = z @ w1.T + b1
    hid = np.maximum(h_pre, 0.0)
    a = _sigmoid(hid @ w2.T + b2)
    y = x * a[:, None, None, :]
    return y, (x, z, h_pre, hid, a, w1, w2)


def gate_backward(cache, dy):
    x, z, h_pre, hid, a, w1, w2 = cache
    n, h, w, c = x.shape
    da = (dy * x).sum(axis=(1, 2))
    dx = dy * a[:, None, None, :]
    d_apre = da * a * (1.0 - a)
    dw2 = d_apre.T @ hid
    db2 = d_apre.sum(axis=0)
    d_hpre = (d_apre @ w2) * (h_pre > 0.0)
    dw1 = d_hpre.T @ z
    db1 = d_hpre.sum(axis=0)
    dx += (d_hpre @ w1)[:, None, None, :] / (h * w)
    return dx, dw1, db1, dw2, db2


def depth_to_space(x, r: int = 2):
    """(n, c*r*r, h, w) -> (n, c, h*r, w*r); channel c*r*r + i*r + j lands at
    output offset (i, j) inside each upscaled cell."""
    n, c, h, w = x.shape
    f = c // (r * r)
    y = x.reshape(n, f, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(y.reshape(n, f, h * r, w * r))


def space_to_depth(y, r: int = 2):
    n, f, hr, wr = y.shape
    h, w = hr // r, wr // r
    x = y.reshape(n, f, h, r, w, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(x.reshape(n, f * r * r, h, w))


def _d2s_nhwc(x, r: int = 2):
    # NHWC twin of depth_to_space: channel c*r*r + i*r + j -> offset (i, j)
    n, h, w, c = x.shape
    f = c // (r * r)
    y = x.reshape(n, h, w, f, r, r).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(y.reshape(n, h * r, w * r, f))


def _s2d_nhwc(y, r: int = 2):
    n, hr, wr, f = y.shape
    h, w = hr // r, wr // r
    x = y.reshape(n, h, r, w, r, f).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(x.reshape(n, h, w, f * r * r))


# ---------------------------------------------------------------------------
# Whole-model forward / backward (activations in NHWC).

def _forward(model: SrModel, x: np.ndarray, keep: bool):
    p = model.params
    caches = {"convs": {}, "relus": {}, "gates": {}} if keep else None

    def conv(name, t):
        out, cache = conv3_forward(t, p[name + ".w"], p[name + ".b"])
        if keep:
            caches["convs"][name] = cache
        return out

    head = conv("head", x)
    z = head
    for i in range(model.config.blocks):
        t = conv(f"block{i}.conv1", z)
        t, mask = relu_forward(t)
        if keep:
            caches["relus"][i] = mask
        t = conv(f"block{i}.conv2", t)
        g = f"block{i}.gate"
        t, gcache = gate_forward(t, p[g + ".w1"], p[g + ".b1"], p[g + ".w2"], p[g + ".b2"])
        if keep:
            caches["gates"][i] = gcache
        z = z + t
    z = z + head
    u = _d2s_nhwc(conv("up1", z), 2)
    u = _d2s_nhwc(conv("up2", u), 2)
    y = conv("tail", u)
    return y, caches


def _backward(model: SrModel, caches, dy):
    grads = {}

    def conv_bwd(name, d):
        dx, dw, db = conv3_backward(caches["convs"][name], d)
        grads[name + ".w"] = dw
        grads[name + ".b"] = db
        return dx

    d = conv_bwd("tail", dy)
    d = conv_bwd("up2", _s2d_nhwc(d, 2))
    d = conv_bwd("up1", _s2d_nhwc(d, 2))
    d_head = d.copy()                      # long-skip branch
    for i in reversed(range(model.config.blocks)):
        g = f"block{i}.gate"
        dt, dw1, db1, dw2, db2 = gate_backward(caches["gates"][i], d)
        grads[g + ".w1"], grads[g + ".b1"] = dw1, db1
        grads[g + ".w2"], grads[g + ".b2"] = dw2, db2
        dt = conv_bwd(f"block{i}.conv2", dt)
        dt = relu_backward(caches["relus"][i], dt)
        dt = conv_bwd(f"block{i}.conv1", dt)
        d = d + dt                         # residual branch joins the trunk
    d_head = d_head + d
    dx = conv_bwd("head", d_head)
    return grads, dx


def _check_input(model: SrModel, x: np.ndarray) -> np.ndarray:
    """Validate an NCHW batch and hand back its NHWC working copy."""
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != model.config.in_channels:
        raise ValueError(
            f"expected input (batch, {model.config.in_channels}, h, w), got {x.shape}"
        )
    if not np.isfinite(x).all():
        raise ValueError("non-finite values in network input")
    return np.ascontiguousarray(x.transpose(0, 2, 3, 1), dtype=model.config.np_dtype)


def forward(model: SrModel, x: np.ndarray) -> np.ndarray:
    """Raw (unclamped) network output, (batch, 1, scale*h, scale*w)."""
    y, _ = _forward(model, _check_input(model, x), keep=False)
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def predict(model: SrModel, x: np.ndarray) -> np.ndarray:
    """Inference-mode output: identical to forward, clamped to [0, 1]."""
    return np.clip(forward(model, x), 0.0, 1.0)


def loss_and_gradients(model: SrModel, x: np.ndarray, targets: np.ndarray):
    """Mean absolute error against (unclamped) outputs, with its gradients.

    Returns (loss, grads) where grads has one entry per parameter tensor.
    """
    xw = _check_input(model, x)
    targets = np.asarray(targets, dtype=model.config.np_dtype)
    if targets.ndim != 4:
        raise ValueError(f"expected targets (batch, 1, H, W), got {targets.shape}")
    if xw.shape[0] == 0:
        raise ValueError("empty batch")
    tw = np.ascontiguousarray(targets.transpose(0, 2, 3, 1))
    y, caches = _forward(model, xw, keep=True)
    if y.shape != tw.shape:
        raise ValueError(
            f"output shape {y.transpose(0, 3, 1, 2).shape} does not match targets {targets.shape}"
        )
    r = y - tw
    per_sample = np.abs(r).mean(axis=(1, 2, 3), dtype=np.float64)
    loss = float(per_sample.mean())
    if not np.isfinite(loss):
        bad = [int(i) for i in np.nonzero(~np.isfinite(per_sample))[0]]
        raise FloatingPointError(f"non-finite loss for batch sample(s) {bad}")
    dy = np.sign(r) / np.asarray(r.size, dtype=model.config.np_dtype)
    grads, _ = _backward(model, caches, dy.astype(model.config.np_dtype, copy=False))
    return loss, grads
