"""Training loss: first-spike cross-entropy, weight-sum hinge, L2.

The data term rewards an early spike of the labelled class relative to the
others: mean over the batch of ln z_c + ln sum_{i != c} 1/z_i. The hinge
K * max(0, beta - sum_i w_ji) per neuron keeps weight sums above threshold
so neurons keep firing; lambda * sum w^2 regularizes.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class LossBreakdown:
    total: float
    ce_term: float
    weight_sum_term: float
    l2_term: float


def _rows(store, i):
    """Layer i as per-neuron weight rows; conv kernels count once per channel."""
    w = store.effective(i)
    return w.reshape(w.shape[0], -1)


def _check(z_out, labels):
    z = z_out.z
    labels = np.asarray(labels)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError(f"need (N, classes>=2) outputs, got {z.shape}")
    if labels.shape != (z.shape[0],):
        raise ValueError(f"labels shape {labels.shape} != batch {z.shape[0]}")
    if labels.min() < 0 or labels.max() >= z.shape[1]:
        raise ValueError("label out of range")
    return z, labels.astype(np.int64)


def loss_forward(z_out, labels, store, k_hinge, beta, lam):
    """Evaluate all three terms; penalties use the forward (effective) weights."""
    z, labels = _check(z_out, labels)
    n = z.shape[0]
    zc = z[np.arange(n), labels]
    inv = 1.0 / z
    inv_sum = inv.sum(axis=1) - inv[np.arange(n), labels]
    ce = float(np.mean(np.log(zc) + np.log(inv_sum)))

    hinge = 0.0
    l2 = 0.0
    for i, w in enumerate(store.weights):
        if w is None:
            continue
        rows = _rows(store, i)
        hinge += float(np.maximum(0.0, beta - rows.sum(axis=1)).sum())
        l2 += float((rows**2).sum())
    ws_term = k_hinge * hinge
    l2_term = lam * l2
    return LossBreakdown(ce + ws_term + l2_term, ce, ws_term, l2_term)


def loss_grad(z_out, labels, store, k_hinge, beta, lam):
    """Analytic partials of loss_forward.

    Returns (dL/dz of shape (N, classes), per-layer penalty weight grads).
    Silent output neurons get exactly zero dL/dz; their sentinel z still
    appears in the other classes' inverse sum, matching loss_forward.
    """
    z, labels = _check(z_out, labels)
    n, classes = z.shape
    rows_idx = np.arange(n)
    inv = 1.0 / z
    inv_sum = inv.sum(axis=1) - inv[rows_idx, labels]

    d_z = -(inv**2) / inv_sum[:, None]
    d_z[rows_idx, labels] = 1.0 / z[rows_idx, labels]
    d_z /= n
    d_z[~z_out.fired] = 0.0

    d_w = []
    for i, w in enumerate(store.weights):
        if w is None:
            d_w.append(None)
            continue
        rows = _rows(store, i)
        active = rows.sum(axis=1) < beta
        g = np.where(active[:, None], -k_hinge, 0.0) + 2.0 * lam * rows
        d_w.append(g.reshape(store.effective(i).shape))
    return d_z, d_w
