"""Optimizers and schedules: clipped gradients, Adam, SGD momentum, linear lr."""

from dataclasses import dataclass

import numpy as np

# idempotence slack: a clipped matrix lands within a few ulp of max_norm and
# must not trigger a second rescale
_CLIP_SLACK = 1.0 + 1e-12


def clip_gradient(g, max_norm=10.0):
    """Scale g so its row-normalized Frobenius norm stays within max_norm.

    r = ||G||_F / sqrt(rows); matrices with r <= max_norm pass through
    unchanged (same array). Whole-matrix rescaling, not per-row.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    g = np.asarray(g)
    if g.ndim < 2:
        raise ValueError(f"expected a matrix, got shape {g.shape}")
    r = np.linalg.norm(g.reshape(g.shape[0], -1)) / np.sqrt(g.shape[0])
    if r > max_norm * _CLIP_SLACK:
        return g * (max_norm / r)
    return g


class Adam:
    """Bias-corrected Adam; one shared step counter for the whole layer list."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def _init(self, weights):
        self.m = [None if w is None else np.zeros_like(w) for w in weights]
        self.v = [None if w is None else np.zeros_like(w) for w in weights]

    def step(self, weights, grads, lr):
        if self.m is None:
            self._init(weights)
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for i, (w, g) in enumerate(zip(weights, grads)):
            if w is None or g is None:
                continue
            if g.shape != w.shape:
                raise ValueError(f"grad shape {g.shape} != weight shape {w.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            w -= lr * (self.m[i] / b1t) / (np.sqrt(self.v[i] / b2t) + self.eps)


class SgdMomentum:
    """v <- momentum*v + g; w <- w - lr*v."""

    def __init__(self, momentum=0.9):
        self.momentum = momentum
        self.vel = None

    def step(self, weights, grads, lr):
        if self.vel is None:
            self.vel = [None if w is None else np.zeros_like(w) for w in weights]
        for i, (w, g) in enumerate(zip(weights, grads)):
            if w is None or g is None:
                continue
            if g.shape != w.shape:
                raise ValueError(f"grad shape {g.shape} != weight shape {w.shape}")
            self.vel[i] = self.momentum * self.vel[i] + g
            w -= lr * self.vel[i]


def make_optimizer(name):
    if name == "adam":
        return Adam()
    if name == "sgd":
        return SgdMomentum()
    raise ValueError(f"unknown optimizer {name!r}")


@dataclass(frozen=True)
class LrSchedule:
    """Linear ramp lr_start -> lr_end over total_epochs, exact at both ends."""

    lr_start: float
    lr_end: float
    total_epochs: int

    def lr_at(self, epoch):
        if self.total_epochs <= 0 or epoch >= self.total_epochs:
            return self.lr_end
        if epoch <= 0:
            return self.lr_start
        v = self.lr_start + epoch * (self.lr_end - self.lr_start) / self.total_epochs
        lo, hi = min(self.lr_start, self.lr_end), max(self.lr_start, self.lr_end)
        return min(max(v, lo), hi)
