"""Closed-form first-spike solver for non-leaky integrate-and-fire neurons.

Spike times live in the z domain (z = e^t). A neuron receiving input spikes
z_i through weights w_i fires at

    z_out = sum_{i in C} w_i z_i / (sum_{i in C} w_i - 1)

where the causal set C contains exactly the inputs that spiked before the
output. The solver scans candidate causal sets in arrival order and accepts
the first one whose solution is consistent with its own membership window.
"""

import os
from dataclasses import dataclass

import numpy as np

# Minimum accepted denominator sum(w)-1; below this a candidate set is treated
# as unable to drive the membrane across threshold.
EPS_DENOM = 1e-10

# Relative tolerance for boundary ties between a candidate solution and the
# neighbouring input spike times. Ties resolve to the smaller causal set.
TIE_TOL = 1e-12

# Numeric value carried by silent (never-firing) neurons. The fired flag is
# authoritative; this value must never enter a denominator.
Z_SENTINEL = 1e6

DEFAULT_CHUNK_ELEMS = 1 << 21


@dataclass(frozen=True)
class SpikeValue:
    """One spike in the z domain; fired=False marks a silent neuron."""

    z: float
    fired: bool = True


NOT_FIRED = SpikeValue(Z_SENTINEL, False)


@dataclass
class CausalSolution:
    """Result of a single-neuron solve.

    sorted_order is the permutation of input indices by ascending z, silent
    inputs last; the causal set is its first causal_count entries.
    """

    z_out: SpikeValue
    causal_count: int
    denom: float
    sorted_order: np.ndarray


@dataclass
class NeuronGrad:
    """Partials of z_out w.r.t. each input z and each weight; zero outside C."""

    dz_din: np.ndarray
    dz_dw: np.ndarray


@dataclass
class BatchSolution:
    """Vectorized solve over P input rows x C weight rows.

    order: (P, F) sort permutation per row, silent inputs last.
    causal_count, denom, z_out, fired: (P, C) per output neuron.
    """

    order: np.ndarray
    causal_count: np.ndarray
    denom: np.ndarray
    z_out: np.ndarray
    fired: np.ndarray


def _chunk_rows(n_rows, n_out, fan_in, chunk_elems):
    rows = max(1, int(chunk_elems // max(1, n_out * fan_in)))
    return range(0, n_rows, rows), rows


def _accel_active():
    mode = os.environ.get("TSNN_ACCEL", "auto").lower()
    if mode in ("0", "off", "false", "numpy"):
        return False
    from . import accel

    if mode in ("1", "on", "true", "numba"):
        if not accel.HAVE_NUMBA:
            raise RuntimeError("TSNN_ACCEL requests numba but it is not installed")
        return True
    return accel.HAVE_NUMBA


def solve_spike_batch(z, fired, w, chunk_elems=DEFAULT_CHUNK_ELEMS):
    """Solve every (input row, weight row) pair.

    z, fired: (P, F) arrays of input spike values and their fired flags.
    w: (C, F) weight matrix applied to every input row.
    Dispatches to the jit kernels when available (see TSNN_ACCEL); the numpy
    fallback bounds its (chunk, C, F) intermediates by chunk_elems.
    """
    z = np.asarray(z)
    fired = np.asarray(fired, dtype=bool)
    w = np.asarray(w)
    if z.shape != fired.shape or z.ndim != 2 or w.ndim != 2 or w.shape[1] != z.shape[1]:
        raise ValueError(f"shape mismatch: z {z.shape}, fired {fired.shape}, w {w.shape}")
    if _accel_active():
        from . import accel

        return accel.solve_batch(z, fired, w)
    return _solve_batch_numpy(z, fired, w, chunk_elems)


def _solve_batch_numpy(z, fired, w, chunk_elems=DEFAULT_CHUNK_ELEMS):
    P, F = z.shape
    C = w.shape[0]
    dt = np.result_type(z.dtype, w.dtype, np.float32)

    key = np.where(fired, z, np.inf)
    order = np.argsort(key, axis=1, kind="stable").astype(np.int32)

    causal_count = np.zeros((P, C), dtype=np.int32)
    denom_out = np.zeros((P, C), dtype=dt)
    z_out = np.full((P, C), Z_SENTINEL, dtype=dt)
    fired_out = np.zeros((P, C), dtype=bool)

    starts, rows = _chunk_rows(P, C, F, chunk_elems)
    pos = np.arange(F)
    for s in starts:
        e = min(P, s + rows)
        zs = np.take_along_axis(key[s:e], order[s:e], axis=1)  # (p, F), inf tail
        live = np.isfinite(zs)
        m = live.sum(axis=1)
        ws = w[:, order[s:e]].transpose(1, 0, 2)  # (p, C, F)
        ws = np.where(live[:, None, :], ws, 0.0)
        swz = np.cumsum(ws * np.where(live, zs, 0.0)[:, None, :], axis=2)
        sw = np.cumsum(ws, axis=2)
        denom = sw - 1.0
        ok = (denom > EPS_DENOM) & (pos[None, None, :] < m[:, None, None])
        zc = swz / np.where(ok, denom, 1.0)
        lo = zs[:, None, :]
        hi = np.concatenate([zs[:, 1:], np.full((e - s, 1), np.inf, dtype=zs.dtype)], axis=1)[:, None, :]
        acc = ok & (zc >= lo * (1.0 - TIE_TOL)) & (zc <= hi * (1.0 + TIE_TOL))

        hit = acc.any(axis=2)
        kk = np.argmax(acc, axis=2)
        sel = kk[:, :, None]
        fired_out[s:e] = hit
        causal_count[s:e] = np.where(hit, kk + 1, 0)
        z_out[s:e] = np.where(hit, np.take_along_axis(zc, sel, axis=2)[:, :, 0], Z_SENTINEL)
        denom_out[s:e] = np.where(hit, np.take_along_axis(denom, sel, axis=2)[:, :, 0], 0.0)

    return BatchSolution(order, causal_count, denom_out, z_out, fired_out)


def backward_batch(z, fired, w, sol, upstream, chunk_elems=DEFAULT_CHUNK_ELEMS):
    """Gradients of a solve_spike_batch call.

    upstream: (P, C) dL/dz_out. Returns (dL/dz of shape (P, F), dL/dw of
    shape (C, F)). Silent outputs and inputs outside each causal set
    contribute exactly zero.
    """
    z = np.asarray(z)
    fired = np.asarray(fired, dtype=bool)
    w = np.asarray(w)
    upstream = np.asarray(upstream)
    if _accel_active():
        from . import accel

        return accel.backward_batch(z, fired, w, sol, upstream)
    return _backward_batch_numpy(z, fired, w, sol, upstream, chunk_elems)


def _backward_batch_numpy(z, fired, w, sol, upstream, chunk_elems=DEFAULT_CHUNK_ELEMS):
    P, F = z.shape
    C = w.shape[0]
    dt = np.result_type(z.dtype, w.dtype, upstream.dtype)

    d_z = np.zeros((P, F), dtype=dt)
    d_w = np.zeros((C, F), dtype=dt)

    g = np.where(sol.fired, upstream, 0.0)
    g = g / np.where(sol.fired, sol.denom, 1.0)

    key = np.where(fired, z, np.inf)
    starts, rows = _chunk_rows(P, C, F, chunk_elems)
    pos = np.arange(F)
    for s in starts:
        e = min(P, s + rows)
        o = sol.order[s:e]
        zs = np.take_along_axis(key[s:e], o, axis=1)
        zs = np.where(np.isfinite(zs), zs, 0.0)  # masked below; keep arithmetic clean
        ws = w[:, o].transpose(1, 0, 2)
        mask = pos[None, None, :] < sol.causal_count[s:e, :, None]
        a = g[s:e, :, None] * ws * mask
        np.put_along_axis(d_z[s:e], o, a.sum(axis=1), axis=1)
        b = g[s:e, :, None] * (zs[:, None, :] - sol.z_out[s:e, :, None]) * mask
        b_orig = np.empty_like(b)
        np.put_along_axis(b_orig, np.broadcast_to(o[:, None, :], b.shape), b, axis=2)
        d_w += b_orig.sum(axis=0)

    return d_z, d_w


def _pack(z_in):
    z = np.array([sv.z for sv in z_in], dtype=np.float64)
    fired = np.array([sv.fired for sv in z_in], dtype=bool)
    return z, fired


def solve_spike(z_in, w):
    """Solve one neuron: inputs are SpikeValues, w a weight vector.

    Returns the unique earliest-valid causal solution, or a not-fired
    CausalSolution when no candidate set can reach threshold.
    """
    w = np.asarray(w, dtype=np.float64)
    if len(z_in) != w.shape[0] or w.shape[0] < 1:
        raise ValueError(f"got {len(z_in)} inputs for {w.shape[0]} weights")
    z, fired = _pack(z_in)
    if np.any(fired & (z <= 0)):
        raise ValueError("fired inputs must have positive z")
    sol = solve_spike_batch(z[None, :], fired[None, :], w[None, :])
    out = SpikeValue(float(sol.z_out[0, 0]), bool(sol.fired[0, 0])) if sol.fired[0, 0] else NOT_FIRED
    return CausalSolution(
        z_out=out,
        causal_count=int(sol.causal_count[0, 0]),
        denom=float(sol.denom[0, 0]),
        sorted_order=sol.order[0].astype(np.int64),
    )


def grad_spike(z_in, w, sol):
    """Analytic partials of a fired solution: w_i/denom and (z_i - z_out)/denom on C."""
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if len(z_in) != n or sol.sorted_order.shape[0] != n:
        raise ValueError("solution does not match inputs")
    if not sol.z_out.fired:
        raise ValueError("gradients are only defined for fired solutions")
    z, fired = _pack(z_in)
    causal = sol.sorted_order[: sol.causal_count]
    # consistency check guards against a stale solution from other inputs
    if not np.isclose(w[causal].sum() - 1.0, sol.denom, rtol=1e-9, atol=1e-12) or not np.isclose(
        (w[causal] * z[causal]).sum(), sol.z_out.z * sol.denom, rtol=1e-9, atol=1e-12
    ):
        raise ValueError("solution is stale for these inputs")
    dz_din = np.zeros(n)
    dz_dw = np.zeros(n)
    dz_din[causal] = w[causal] / sol.denom
    dz_dw[causal] = (z[causal] - sol.z_out.z) / sol.denom
    dz_din[~fired] = 0.0
    dz_dw[~fired] = 0.0
    return NeuronGrad(dz_din=dz_din, dz_dw=dz_dw)
