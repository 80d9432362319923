import numpy as np
import pytest

from tsnn import accel
from tsnn.neuron import _backward_batch_numpy, _solve_batch_numpy

pytestmark = pytest.mark.skipif(not accel.HAVE_NUMBA, reason="numba not installed")


def instances(seed, n=40):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        P = int(rng.integers(1, 20))
        F = int(rng.integers(1, 30))
        C = int(rng.integers(1, 8))
        z = rng.uniform(1.0, 6.0, (P, F))
        if rng.random() < 0.3:
            # duplicate spike times exercise the stable tie-break
            z = np.round(z, 1)
        fired = rng.random((P, F)) > 0.2
        w = rng.normal(0.3, 0.8, (C, F))
        yield z, fired, w


def test_forward_matches_numpy_bitwise():
    for z, fired, w in instances(0):
        a = _solve_batch_numpy(z, fired, w)
        b = accel.solve_batch(z, fired, w)
        np.testing.assert_array_equal(a.order, b.order)
        np.testing.assert_array_equal(a.fired, b.fired)
        np.testing.assert_array_equal(a.causal_count, b.causal_count)
        np.testing.assert_array_equal(a.z_out, b.z_out)
        np.testing.assert_array_equal(a.denom, b.denom)


def test_backward_matches_numpy():
    for z, fired, w in instances(1, n=25):
        sol = _solve_batch_numpy(z, fired, w)
        upstream = np.random.default_rng(2).normal(size=sol.z_out.shape)
        d_z_a, d_w_a = _backward_batch_numpy(z, fired, w, sol, upstream)
        d_z_b, d_w_b = accel.backward_batch(z, fired, w, sol, upstream)
        np.testing.assert_allclose(d_z_b, d_z_a, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(d_w_b, d_w_a, rtol=1e-10, atol=1e-13)


def test_dispatch_respects_env(monkeypatch):
    from tsnn import neuron

    z = np.array([[1.0, 2.0]])
    fired = np.array([[True, True]])
    w = np.array([[0.8, 0.5]])
    monkeypatch.setenv("TSNN_ACCEL", "numpy")
    assert not neuron._accel_active()
    monkeypatch.setenv("TSNN_ACCEL", "numba")
    assert neuron._accel_active()
    sol = neuron.solve_spike_batch(z, fired, w)
    assert sol.z_out[0, 0] == pytest.approx(6.0, rel=1e-12)
    monkeypatch.setenv("TSNN_ACCEL", "auto")
    assert neuron._accel_active() == accel.HAVE_NUMBA
