"""Naive reference implementations the fast library code is checked against.

Everything here favors directness over speed: explicit window loops,
per-pixel kernel sums, shifted-slice convolutions.  These are the
independent side of every dual-route check, so they must not import the
corresponding fast implementations.
"""

import numpy as np


# ---------------------------------------------------------------------------
# SSIM: per-window loops with an explicitly constructed Gaussian kernel.

def naive_gaussian_kernel(size=11, sigma=1.5):
    k = np.empty((size, size))
    half = (size - 1) / 2.0
    for i in range(size):
        for j in range(size):
            k[i, j] = np.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * sigma ** 2))
    return k / k.sum()


def naive_ssim(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    kern = naive_gaussian_kernel(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    vals = []
    for i in range(a.shape[0] - window + 1):
        for j in range(a.shape[1] - window + 1):
            wa = a[i:i + window, j:j + window]
            wb = b[i:i + window, j:j + window]
            mu_a = (kern * wa).sum()
            mu_b = (kern * wb).sum()
            var_a = (kern * wa * wa).sum() - mu_a * mu_a
            var_b = (kern * wb * wb).sum() - mu_b * mu_b
            cov = (kern * wa * wb).sum() - mu_a * mu_b
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
            vals.append(num / den)
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Bicubic resampling: direct kernel sum per output pixel.

def catmull_rom_weight(t):
    t = abs(float(t))
    if t <= 1.0:
        return 1.5 * t ** 3 - 2.5 * t ** 2 + 1.0
    if t < 2.0:
        return -0.5 * t ** 3 + 2.5 * t ** 2 - 4.0 * t + 2.0
    return 0.0


def reflect(k, n):
    while k < 0 or k >= n:
        if k < 0:
            k = -1 - k
        else:
            k = 2 * n - 1 - k
    return k


def naive_bicubic_resample(values, out_shape):
    values = np.asarray(values, dtype=np.float64)
    n_r, n_c = values.shape
    o_r, o_c = out_shape
    out = np.zeros(out_shape)
    for i in range(o_r):
        x = (i + 0.5) * (n_r / o_r) - 0.5
        bx = int(np.floor(x))
        for j in range(o_c):
            y = (j + 0.5) * (n_c / o_c) - 0.5
            by = int(np.floor(y))
            acc = 0.0
            for u in range(bx - 1, bx + 3):
                wu = catmull_rom_weight(x - u)
                for v in range(by - 1, by + 3):
                    acc += wu * catmull_rom_weight(y - v) * values[reflect(u, n_r), reflect(v, n_c)]
            out[i, j] = acc
    return out


def naive_bicubic_downsample(hr, alpha=4, clamp=True):
    hr = np.asarray(hr, dtype=np.float64)
    out = naive_bicubic_resample(hr, (hr.shape[0] // alpha, hr.shape[1] // alpha))
    return np.maximum(out, 0.0) if clamp else out


# ---------------------------------------------------------------------------
# Quantile / CDF oracles.

def naive_quantile(values, p):
    """Quantile by sorted-array index arithmetic with linear interpolation."""
    s = np.sort(np.asarray(values, dtype=np.float64))
    idx = p * (s.size - 1)
    lo = int(np.floor(idx))
    hi = min(lo + 1, s.size - 1)
    frac = idx - lo
    return float(s[lo] * (1.0 - frac) + s[hi] * frac)


def midrank_cdf(values, x):
    """Average of the strict and non-strict empirical CDFs at x."""
    values = np.asarray(values, dtype=np.float64)
    less = float((values < x).sum())
    leq = float((values <= x).sum())
    return 0.5 * (less + leq) / values.size


def ks_distance_to_uniform(u):
    """Kolmogorov-Smirnov sup distance between a sample and Uniform[0,1]."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    n = u.size
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max(np.max(grid_hi - u), np.max(u - grid_lo)))


# ---------------------------------------------------------------------------
# Network forward: straight-line single-sample recomputation using
# shifted-slice convolutions (no im2col, no shared helpers).

def naive_conv3(x, w, b):
    c_in, h, wid = x.shape
    f = w.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((f, h, wid))
    for fo in range(f):
        acc = np.zeros((h, wid))
        for ci in range(c_in):
            for ky in range(3):
                for kx in range(3):
                    acc += w[fo, ci, ky, kx] * xp[ci, ky:ky + h, kx:kx + wid]
        out[fo] = acc + b[fo]
    return out


def naive_depth_to_space(x, r=2):
    c, h, w = x.shape
    f = c // (r * r)
    out = np.zeros((f, h * r, w * r))
    for fo in range(f):
        for i in range(r):
            for j in range(r):
                out[fo, i::r, j::r] = x[fo * r * r + i * r + j]
    return out


def naive_model_forward(params, blocks, x):
    """Recompute the model forward for one sample (x: (C, 16, 16))."""
    def sigmoid(v):
        return 1.0 / (1.0 + np.exp(-v))

    head = naive_conv3(x, params["head.w"], params["head.b"])
    z = head.copy()
    for i in range(blocks):
        t = naive_conv3(z, params[f"block{i}.conv1.w"], params[f"block{i}.conv1.b"])
        t = np.maximum(t, 0.0)
        t = naive_conv3(t, params[f"block{i}.conv2.w"], params[f"block{i}.conv2.b"])
        pooled = t.mean(axis=(1, 2))
        hid = np.maximum(params[f"block{i}.gate.w1"] @ pooled + params[f"block{i}.gate.b1"], 0.0)
        a = sigmoid(params[f"block{i}.gate.w2"] @ hid + params[f"block{i}.gate.b2"])
        z = z + t * a[:, None, None]
    z = z + head
    u = naive_depth_to_space(naive_conv3(z, params["up1.w"], params["up1.b"]), 2)
    u = naive_depth_to_space(naive_conv3(u, params["up2.w"], params["up2.b"]), 2)
    return naive_conv3(u, params["tail.w"], params["tail.b"])
