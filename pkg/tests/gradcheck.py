"""Central-difference gradient checking against the analytic backward pass."""

import numpy as np

from mbsr import network


def make_margin_targets(model, x, seed=0, margin=0.3):
    """Targets whose residuals are bounded away from zero with mixed signs,
    so the L1 loss is locally smooth and central differences are exact."""
    base = network.forward(model, x)
    gen = np.random.default_rng(seed)
    signs = np.where(gen.random(base.shape) < 0.5, -1.0, 1.0)
    return base - signs * (margin + 0.2 * gen.random(base.shape))


def fd_loss(model, x, targets):
    return float(np.abs(network.forward(model, x) - targets).mean(dtype=np.float64))


def fd_gradient_check(model, x, targets, param_names, n_per_tensor=50, h=1e-4, seed=1):
    """Max relative error between analytic gradients and central differences
    over up to n_per_tensor randomly sampled entries of each named tensor."""
    _, grads = network.loss_and_gradients(model, x, targets)
    gen = np.random.default_rng(seed)
    worst = 0.0
    for name in param_names:
        p = model.params[name]
        g = grads[name]
        k = min(n_per_tensor, p.size)
        flat_idx = gen.choice(p.size, size=k, replace=False)
        for flat in flat_idx:
            idx = np.unravel_index(int(flat), p.shape)
            orig = p[idx]
            p[idx] = orig + h
            lp = fd_loss(model, x, targets)
            p[idx] = orig - h
            lm = fd_loss(model, x, targets)
            p[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            rel = abs(g[idx] - fd) / max(abs(g[idx]), abs(fd), 1e-9)
            worst = max(worst, rel)
    return worst
