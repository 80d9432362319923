"""Reference first-crossing solver by direct membrane integration.

Independent check on the z-domain algebra: integrates the synaptic kernel
k(t) = exp(-(t - t_i)) for t >= t_i term by term and finds the first
threshold crossing by scanning inter-spike intervals with bisection. Works
in the time domain throughout; only the final result is exponentiated.
"""

import numpy as np

THRESHOLD = 1.0
TAU = 1.0

# interval prescan resolution and bisection limits
PRESCAN_POINTS = 65
BISECT_ATOL = 1e-12
BISECT_MAX_ITER = 200
TAIL_HORIZON = 50.0


def membrane_voltage_at(t, spike_times, weights):
    """Membrane potential at times t for inputs (t_i, w_i); v(0) = 0.

    v(t) = sum_i w_i * tau * (1 - exp(-(t - t_i)/tau)) over inputs with
    t_i <= t. Vectorized over t.
    """
    t = np.asarray(t, dtype=np.float64)
    st = np.asarray(spike_times, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    dt = t[..., None] - st
    active = dt >= 0
    contrib = w * TAU * (1.0 - np.exp(-np.where(active, dt, 0.0) / TAU))
    return np.sum(np.where(active, contrib, 0.0), axis=-1)


def _bisect(f, lo, hi):
    flo = f(lo)
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= BISECT_ATOL:
            break
    return 0.5 * (lo + hi)


def simulate_first_crossing(spike_times, weights, threshold=THRESHOLD):
    """First t with v(t) >= threshold, or None if the neuron never fires.

    Scans each interval between consecutive input arrivals on a dense grid,
    then refines any sign change by bisection. The tail beyond the last
    input is truncated at TAIL_HORIZON time constants unless the asymptote
    tau * sum(w) still exceeds threshold, in which case the bracket doubles
    until the crossing is contained.
    """
    st = np.asarray(spike_times, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if st.size == 0:
        return None
    f = lambda t: membrane_voltage_at(t, st, w) - threshold

    edges = np.unique(st)
    bounds = list(zip(edges[:-1], edges[1:])) + [(edges[-1], edges[-1] + TAIL_HORIZON * TAU)]
    for lo, hi in bounds:
        if hi <= lo:
            continue
        grid = np.linspace(lo, hi, PRESCAN_POINTS)
        vals = f(grid)
        above = np.nonzero(vals >= 0)[0]
        if above.size == 0:
            continue
        i = above[0]
        if i == 0:
            return float(lo) if vals[0] == 0 else float(_bisect(f, max(lo - BISECT_ATOL, edges[0]), grid[0]))
        return float(_bisect(f, grid[i - 1], grid[i]))

    # tail never sampled above threshold; asymptote decides whether a
    # crossing exists further out
    if TAU * w.sum() > threshold:
        lo = edges[-1] + TAIL_HORIZON * TAU
        hi = lo + TAIL_HORIZON * TAU
        while f(hi) < 0:
            lo, hi = hi, hi + 2 * (hi - edges[-1])
        return float(_bisect(f, lo, hi))
    return None
