"""Deployment robustness tools: weight quantization, QAT, noise injection."""

import numpy as np

ALLOWED_BITS = (2, 4, 8, 16, 24, 32)

# staged descent used when training toward a low-bit target
_STAGES = (32, 8, 4, 2)


def quantize_weights(w, bits):
    """Uniform symmetric quantization to 2^(bits-1)-1 levels per sign.

    Delta = max|w| / (2^(bits-1) - 1); values round half away from zero.
    bits=32 and all-zero matrices pass through unchanged. Entries landing on
    the outermost level are pinned to +-max|w| exactly so requantizing is a
    bit-exact no-op.
    """
    if bits not in ALLOWED_BITS:
        raise ValueError(f"bits must be one of {ALLOWED_BITS}, got {bits}")
    w = np.asarray(w)
    if bits == 32:
        return w
    w_max = np.abs(w).max() if w.size else 0.0
    if w_max == 0.0:
        return w
    levels = 2 ** (bits - 1) - 1
    delta = w_max / levels
    q = np.sign(w) * np.floor(np.abs(w) / delta + 0.5)
    out = q * delta
    out = np.where(np.abs(q) >= levels, np.sign(w) * w_max, out)
    return out


def quantize_store(store, bits):
    """Set quantized shadows on a WeightStore; masters stay untouched."""
    store.set_shadows([None if w is None else quantize_weights(w, bits) for w in store.weights])
    return store


def quantization_schedule(epoch, total_epochs, target_bits):
    """Bit width for a training epoch: equal stages descending to the target.

    target 2 over 40 epochs runs 32/8/4/2 for ten epochs each; target 8 runs
    32 then 8 from halfway. Epochs at or past the end stay at the target.
    """
    if target_bits not in (2, 4, 8):
        raise ValueError(f"target_bits must be 2, 4 or 8, got {target_bits}")
    stages = _STAGES[: _STAGES.index(target_bits) + 1]
    if total_epochs <= 0 or epoch >= total_epochs:
        return target_bits
    idx = min(epoch * len(stages) // total_epochs, len(stages) - 1)
    return stages[max(idx, 0)]


def perturb_weights(store, snr_db, rng):
    """Add per-layer Gaussian noise at the requested signal-to-noise ratio.

    Noise std per layer is sqrt(mean(w^2) / 10^(snr_db/10)). Returns a new
    store with perturbed masters and no shadows; snr_db=inf is the identity.
    No retraining happens here.
    """
    from .network import WeightStore

    if np.isinf(snr_db):
        return WeightStore([None if w is None else w.copy() for w in store.weights])
    out = []
    for w in store.weights:
        if w is None:
            out.append(None)
            continue
        sigma = np.sqrt(np.mean(w**2) / 10.0 ** (snr_db / 10.0))
        out.append(w + rng.normal(0.0, sigma, size=w.shape))
    return WeightStore(out)


def qat_step(net, store, optimizer, x, labels, bits, k_hinge, beta, lam, clip_max_norm, lr):
    """One quantization-aware step: quantized forward, updates on masters."""
    from .train import train_step

    return train_step(net, store, optimizer, x, labels, k_hinge, beta, lam, clip_max_norm, lr, bits=bits)
