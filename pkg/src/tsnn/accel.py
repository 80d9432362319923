"""Optional jit-compiled solver kernels.

Same algorithm as the numpy path in neuron.py, written as explicit loops so
each (input row, neuron) pair stops at its accepted causal set instead of
materializing full prefix sums. Forward partial sums accumulate in the same
order as np.cumsum, so forward results are expected to match the numpy path
bit for bit; backward reductions sum in a different association order and
match to rounding only. Selection happens in neuron.py via TSNN_ACCEL.
"""

import numpy as np

from .neuron import EPS_DENOM, TIE_TOL, Z_SENTINEL, BatchSolution

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without the extra
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _forward_kernel(z, order, m, w):
    P, F = z.shape
    C = w.shape[0]
    z_out = np.full((P, C), Z_SENTINEL)
    denom_out = np.zeros((P, C))
    kcount = np.zeros((P, C), dtype=np.int32)
    fired = np.zeros((P, C), dtype=np.bool_)
    for p in range(P):
        mp = m[p]
        for c in range(C):
            sw = 0.0
            swz = 0.0
            for j in range(mp):
                i = order[p, j]
                zi = z[p, i]
                wi = w[c, i]
                sw += wi
                swz += wi * zi
                den = sw - 1.0
                if den > EPS_DENOM:
                    zc = swz / den
                    hi = z[p, order[p, j + 1]] if j + 1 < mp else np.inf
                    if zc >= zi * (1.0 - TIE_TOL) and zc <= hi * (1.0 + TIE_TOL):
                        z_out[p, c] = zc
                        denom_out[p, c] = den
                        kcount[p, c] = j + 1
                        fired[p, c] = True
                        break
    return z_out, denom_out, kcount, fired


@njit(cache=True)
def _backward_kernel(z, order, kcount, denom, z_out, fired, w, upstream):
    P, F = z.shape
    C = w.shape[0]
    d_z = np.zeros((P, F))
    d_w = np.zeros((C, F))
    for p in range(P):
        for c in range(C):
            if not fired[p, c]:
                continue
            g = upstream[p, c] / denom[p, c]
            zo = z_out[p, c]
            for j in range(kcount[p, c]):
                i = order[p, j]
                d_z[p, i] += g * w[c, i]
                d_w[c, i] += g * (z[p, i] - zo)
    return d_z, d_w


def solve_batch(z, fired, w):
    key = np.where(fired, z, np.inf)
    order = np.argsort(key, axis=1, kind="stable").astype(np.int32)
    m = fired.sum(axis=1).astype(np.int32)
    z_out, denom, kcount, fired_out = _forward_kernel(
        np.ascontiguousarray(z, dtype=np.float64), order, m, np.ascontiguousarray(w, dtype=np.float64)
    )
    return BatchSolution(order, kcount, denom, z_out, fired_out)


def backward_batch(z, fired, w, sol, upstream):
    return _backward_kernel(
        np.ascontiguousarray(z, dtype=np.float64),
        sol.order,
        sol.causal_count,
        sol.denom,
        sol.z_out,
        sol.fired,
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(upstream, dtype=np.float64),
    )
