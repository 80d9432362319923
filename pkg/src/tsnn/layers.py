"""Spiking layers: input encoding, fully-connected, convolution, max-pool.

All layers carry (z, fired) pairs. Convolution is solved as a batched
fully-connected problem over im2col patches; padded cells enter as silent
inputs, which the solver excludes from every causal set. Max-pool picks the
earliest spike (minimum z) in each window.
"""

from dataclasses import dataclass

import numpy as np

from .neuron import Z_SENTINEL, BatchSolution, backward_batch, solve_spike_batch


@dataclass
class SpikeTensor:
    """z-domain activations with their fired mask; z > 0 wherever fired."""

    z: np.ndarray
    fired: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        self.fired = np.asarray(self.fired, dtype=bool)
        if self.z.shape != self.fired.shape:
            raise ValueError(f"z shape {self.z.shape} != fired shape {self.fired.shape}")

    @property
    def shape(self):
        return self.z.shape

    def reshape(self, *shape):
        return SpikeTensor(self.z.reshape(*shape), self.fired.reshape(*shape))


def encode_image(pixels, alpha=1.0, mode="mnist", noise_sigma=0.0, rng=None):
    """Encode pixel intensities in [0,1] to first-spike times, z = e^t.

    mnist: t = alpha*(1 - p), bright pixels spike first. cifar: t = alpha*p.
    Training noise is Gaussian in the t domain, clamped to t >= 0; it needs
    an explicit rng so runs stay reproducible.
    """
    p = np.asarray(pixels, dtype=np.float64)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("pixels must lie in [0, 1]")
    if mode == "mnist":
        t = alpha * (1.0 - p)
    elif mode == "cifar":
        t = alpha * p
    else:
        raise ValueError(f"unknown encode mode {mode!r}")
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        t = t + rng.normal(0.0, noise_sigma, size=t.shape)
    t = np.maximum(t, 0.0)
    return SpikeTensor(np.exp(t), np.ones(t.shape, dtype=bool))


@dataclass
class FcCache:
    """Forward context kept for the backward pass: inputs, weights, solution."""

    x: SpikeTensor
    w: np.ndarray
    sol: BatchSolution


def forward_fc(x, w):
    """Fully-connected layer: one first-spike solve per output neuron."""
    w = np.asarray(w, dtype=np.float64)
    if x.z.ndim != 2 or w.ndim != 2 or w.shape[1] != x.z.shape[1]:
        raise ValueError(f"fc shape mismatch: input {x.z.shape}, weights {w.shape}")
    sol = solve_spike_batch(x.z, x.fired, w)
    return SpikeTensor(sol.z_out, sol.fired), FcCache(x, w, sol)


def backward_fc(cache, upstream):
    """Route upstream dL/dz through the cached causal solutions."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != cache.sol.z_out.shape:
        raise ValueError(f"upstream shape {upstream.shape} != output shape {cache.sol.z_out.shape}")
    return backward_batch(cache.x.z, cache.x.fired, cache.w, cache.sol, upstream)


def conv_output_size(size, kernel, stride, padding):
    if padding == "same":
        return -(-size // stride)
    if padding == "valid":
        return (size - kernel) // stride + 1
    raise ValueError(f"unknown padding {padding!r}")


def _same_pad(size, out_size, kernel, stride):
    total = max((out_size - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


@dataclass
class ConvCache:
    x: SpikeTensor
    w2d: np.ndarray
    sol: BatchSolution
    rows: np.ndarray
    cols: np.ndarray
    pad: tuple
    out_hw: tuple
    kshape: tuple


def forward_conv(x, kernels, stride=1, padding="same"):
    """Convolution as first-spike solves over im2col patches.

    kernels: (C_out, C_in, k, k). Same padding follows the ceil(size/stride)
    convention; padded cells are silent inputs. Patch features are laid out
    (channel, kh, kw) to match kernels reshaped to (C_out, C_in*k*k).
    """
    kernels = np.asarray(kernels, dtype=np.float64)
    if x.z.ndim != 4 or kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3]:
        raise ValueError(f"conv shape mismatch: input {x.z.shape}, kernels {kernels.shape}")
    n, c, h, w = x.z.shape
    c_out, c_in, k, _ = kernels.shape
    if c_in != c:
        raise ValueError(f"kernels expect {c_in} channels, input has {c}")
    oh = conv_output_size(h, k, stride, padding)
    ow = conv_output_size(w, k, stride, padding)
    if oh < 1 or ow < 1:
        raise ValueError(f"kernel {k} does not fit input {h}x{w}")
    if padding == "same":
        pt, pb = _same_pad(h, oh, k, stride)
        pl, pr = _same_pad(w, ow, k, stride)
    else:
        pt = pb = pl = pr = 0
    zp = np.pad(x.z, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=Z_SENTINEL)
    fp = np.pad(x.fired, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=False)

    kh = np.repeat(np.arange(k), k)
    kw = np.tile(np.arange(k), k)
    rows = stride * np.repeat(np.arange(oh), ow)[:, None] + kh[None, :]  # (oh*ow, k*k)
    cols = stride * np.tile(np.arange(ow), oh)[:, None] + kw[None, :]
    patches_z = zp[:, :, rows, cols].transpose(0, 2, 1, 3).reshape(n * oh * ow, c * k * k)
    patches_f = fp[:, :, rows, cols].transpose(0, 2, 1, 3).reshape(n * oh * ow, c * k * k)

    w2d = kernels.reshape(c_out, c * k * k)
    sol = solve_spike_batch(patches_z, patches_f, w2d)
    z_out = sol.z_out.reshape(n, oh, ow, c_out).transpose(0, 3, 1, 2)
    fired = sol.fired.reshape(n, oh, ow, c_out).transpose(0, 3, 1, 2)
    cache = ConvCache(x, w2d, sol, rows, cols, (pt, pb, pl, pr), (oh, ow), kernels.shape)
    return SpikeTensor(z_out, fired), cache


def backward_conv(cache, upstream):
    """Kernel grads summed over batch and spatial positions; padding dropped."""
    upstream = np.asarray(upstream, dtype=np.float64)
    n, c, h, w = cache.x.z.shape
    c_out, c_in, k, _ = cache.kshape
    oh, ow = cache.out_hw
    if upstream.shape != (n, c_out, oh, ow):
        raise ValueError(f"upstream shape {upstream.shape} != output shape {(n, c_out, oh, ow)}")
    up2d = upstream.transpose(0, 2, 3, 1).reshape(n * oh * ow, c_out)

    pt, pb, pl, pr = cache.pad
    zp_shape = (n, c, h + pt + pb, w + pl + pr)
    fp = np.pad(cache.x.fired, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=False)
    zp = np.pad(cache.x.z, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=Z_SENTINEL)
    patches_z = zp[:, :, cache.rows, cache.cols].transpose(0, 2, 1, 3).reshape(n * oh * ow, -1)
    patches_f = fp[:, :, cache.rows, cache.cols].transpose(0, 2, 1, 3).reshape(n * oh * ow, -1)

    d_patches, d_w2d = backward_batch(patches_z, patches_f, cache.w2d, cache.sol, up2d)
    kernel_grad = d_w2d.reshape(c_out, c_in, k, k)

    gp = np.zeros(zp_shape)
    vals = d_patches.reshape(n, oh * ow, c, k * k).transpose(0, 2, 1, 3)
    np.add.at(gp, (slice(None), slice(None), cache.rows, cache.cols), vals)
    return gp[:, :, pt : pt + h, pl : pl + w], kernel_grad


@dataclass
class PoolCache:
    in_shape: tuple
    window: int
    argmin: np.ndarray
    fired_out: np.ndarray


def forward_maxpool(x, window):
    """First-spike pooling: minimum z per non-overlapping window.

    Silent inputs lose to any fired input; an all-silent window stays silent.
    Ties break to the lowest flat window index.
    """
    if x.z.ndim != 4:
        raise ValueError(f"maxpool expects (N,C,H,W), got {x.z.shape}")
    n, c, h, w = x.z.shape
    if h % window or w % window:
        raise ValueError(f"spatial dims {h}x{w} not divisible by window {window}")
    oh, ow = h // window, w // window
    zr = x.z.reshape(n, c, oh, window, ow, window).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, -1)
    fr = x.fired.reshape(n, c, oh, window, ow, window).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, -1)
    key = np.where(fr, zr, np.inf)
    idx = np.argmin(key, axis=-1)
    fired_out = fr.any(axis=-1)
    z_out = np.where(fired_out, np.take_along_axis(zr, idx[..., None], axis=-1)[..., 0], Z_SENTINEL)
    return SpikeTensor(z_out, fired_out), PoolCache((n, c, h, w), window, idx, fired_out)


def backward_maxpool(cache, upstream):
    """Upstream routes to each window's earliest spike; silent windows get zero."""
    upstream = np.asarray(upstream, dtype=np.float64)
    n, c, h, w = cache.in_shape
    v = cache.window
    oh, ow = h // v, w // v
    if upstream.shape != (n, c, oh, ow):
        raise ValueError(f"upstream shape {upstream.shape} != output shape {(n, c, oh, ow)}")
    gr = np.zeros((n, c, oh, ow, v * v))
    routed = np.where(cache.fired_out, upstream, 0.0)
    np.put_along_axis(gr, cache.argmin[..., None], routed[..., None], axis=-1)
    return gr.reshape(n, c, oh, ow, v, v).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
