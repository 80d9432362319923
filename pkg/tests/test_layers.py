import math

import numpy as np
import pytest

from tsnn.layers import (
    SpikeTensor,
    backward_conv,
    backward_fc,
    backward_maxpool,
    encode_image,
    forward_conv,
    forward_fc,
    forward_maxpool,
)
from tsnn.neuron import Z_SENTINEL


def tensor(z, fired=None):
    z = np.asarray(z, dtype=np.float64)
    return SpikeTensor(z, np.ones(z.shape, dtype=bool) if fired is None else np.asarray(fired))


def test_encode_mnist_extremes():
    st = encode_image(np.array([[1.0, 0.0]]), alpha=1.0, mode="mnist")
    assert st.z[0, 0] == pytest.approx(1.0)
    assert st.z[0, 1] == pytest.approx(math.e)
    assert st.fired.all()


def test_encode_cifar_midpoint():
    st = encode_image(np.array([0.5]), alpha=2.0, mode="cifar")
    assert st.z[0] == pytest.approx(math.e)


def test_encode_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_image(np.array([1.2]))
    with pytest.raises(ValueError):
        encode_image(np.array([-0.1]))


def test_encode_noise_needs_rng_and_clamps():
    with pytest.raises(ValueError):
        encode_image(np.array([0.5]), noise_sigma=0.1)
    rng = np.random.default_rng(0)
    st = encode_image(np.full(10_000, 0.99), alpha=1.0, mode="mnist", noise_sigma=5.0, rng=rng)
    assert (st.z >= 1.0).all()  # t clamped at 0 keeps z at or above 1


def test_encode_noise_deterministic():
    a = encode_image(np.linspace(0, 1, 32), noise_sigma=0.05, rng=np.random.default_rng(9))
    b = encode_image(np.linspace(0, 1, 32), noise_sigma=0.05, rng=np.random.default_rng(9))
    np.testing.assert_array_equal(a.z, b.z)


def test_encode_unknown_mode():
    with pytest.raises(ValueError):
        encode_image(np.array([0.5]), mode="svhn")


def test_spike_tensor_shape_mismatch():
    with pytest.raises(ValueError):
        SpikeTensor(np.ones((2, 3)), np.ones((2, 2), dtype=bool))


def test_fc_single_neuron_passthrough():
    out, _ = forward_fc(tensor([[1.0]]), [[2.0]])
    assert out.z[0, 0] == pytest.approx(2.0)


def test_fc_two_input_row():
    out, _ = forward_fc(tensor([[1.0, 2.0]]), [[0.8, 0.5]])
    assert out.z[0, 0] == pytest.approx(6.0, rel=1e-12)


def test_fc_silent_second_row():
    out, _ = forward_fc(tensor([[1.0, 2.0]]), [[0.8, 0.5], [0.1, 0.2]])
    assert out.fired[0, 0] and not out.fired[0, 1]
    assert out.z[0, 0] == pytest.approx(6.0, rel=1e-12)
    assert out.z[0, 1] == Z_SENTINEL


def test_fc_dimension_mismatch():
    with pytest.raises(ValueError):
        forward_fc(tensor([[1.0, 2.0]]), [[0.8]])


def test_backward_fc_single_neuron():
    out, cache = forward_fc(tensor([[1.0]]), [[2.0]])
    d_in, d_w = backward_fc(cache, np.array([[1.0]]))
    assert d_in[0, 0] == pytest.approx(2.0)
    assert d_w[0, 0] == pytest.approx(-1.0)


def test_backward_fc_zero_upstream():
    _, cache = forward_fc(tensor([[1.0, 2.0]]), [[0.8, 0.5]])
    d_in, d_w = backward_fc(cache, np.zeros((1, 1)))
    assert not d_in.any() and not d_w.any()


def test_backward_fc_scaled_upstream():
    _, cache = forward_fc(tensor([[1.0, 2.0]]), [[0.8, 0.5]])
    d_in, d_w = backward_fc(cache, np.array([[3.0]]))
    np.testing.assert_allclose(d_in, [[8.0, 5.0]], rtol=1e-12)
    np.testing.assert_allclose(d_w, [[-50.0, -40.0]], rtol=1e-12)


def test_backward_fc_shape_check():
    _, cache = forward_fc(tensor([[1.0, 2.0]]), [[0.8, 0.5]])
    with pytest.raises(ValueError):
        backward_fc(cache, np.zeros((1, 2)))


def test_conv_1x1_reduces_to_fc():
    x = tensor(np.full((1, 1, 1, 1), 1.0))
    out, _ = forward_conv(x, np.full((1, 1, 1, 1), 2.0), stride=1, padding="valid")
    assert out.z[0, 0, 0, 0] == pytest.approx(2.0)


def test_conv_2x2_valid():
    x = tensor(np.ones((1, 1, 2, 2)))
    out, _ = forward_conv(x, np.full((1, 1, 2, 2), 0.5), stride=2, padding="valid")
    assert out.shape == (1, 1, 1, 1)
    assert out.z[0, 0, 0, 0] == pytest.approx(2.0, rel=1e-12)


def test_conv_same_padding_corner():
    x = tensor(np.ones((1, 1, 2, 2)))
    out, _ = forward_conv(x, np.ones((1, 1, 3, 3)), stride=1, padding="same")
    assert out.shape == (1, 1, 2, 2)
    np.testing.assert_allclose(out.z[0, 0], np.full((2, 2), 4.0 / 3.0), rtol=1e-12)


def test_conv_output_sizes():
    x = tensor(np.ones((1, 1, 28, 28)))
    out, _ = forward_conv(x, np.full((4, 1, 5, 5), 0.1), stride=2, padding="same")
    assert out.shape == (1, 4, 14, 14)
    out2, _ = forward_conv(out, np.full((3, 4, 5, 5), 0.05), stride=2, padding="same")
    assert out2.shape == (1, 3, 7, 7)


def test_conv_channel_mismatch():
    with pytest.raises(ValueError):
        forward_conv(tensor(np.ones((1, 2, 4, 4))), np.ones((1, 3, 3, 3)))


def test_conv_kernel_larger_than_valid_input():
    with pytest.raises(ValueError):
        forward_conv(tensor(np.ones((1, 1, 2, 2))), np.ones((1, 1, 3, 3)), padding="valid")


def test_backward_conv_2x2_kernel_grads():
    x = tensor(np.ones((1, 1, 2, 2)))
    out, cache = forward_conv(x, np.full((1, 1, 2, 2), 0.5), stride=2, padding="valid")
    d_in, d_k = backward_conv(cache, np.ones((1, 1, 1, 1)))
    np.testing.assert_allclose(d_k, np.full((1, 1, 2, 2), -1.0), rtol=1e-12)
    np.testing.assert_allclose(d_in, np.full((1, 1, 2, 2), 0.5), rtol=1e-12)


def test_backward_conv_zero_upstream():
    x = tensor(np.random.default_rng(0).uniform(1, 2, (2, 2, 6, 6)))
    _, cache = forward_conv(x, np.random.default_rng(1).normal(0.2, 0.3, (3, 2, 3, 3)))
    d_in, d_k = backward_conv(cache, np.zeros((2, 3, 6, 6)))
    assert not d_in.any() and not d_k.any()


def test_backward_conv_matches_fc_for_1x1():
    x = tensor([[1.0]])
    _, fc_cache = forward_fc(x, [[2.0]])
    d_in_fc, d_w_fc = backward_fc(fc_cache, np.array([[1.0]]))
    xc = tensor(np.full((1, 1, 1, 1), 1.0))
    _, cache = forward_conv(xc, np.full((1, 1, 1, 1), 2.0), padding="valid")
    d_in, d_k = backward_conv(cache, np.ones((1, 1, 1, 1)))
    assert d_in[0, 0, 0, 0] == d_in_fc[0, 0]
    assert d_k[0, 0, 0, 0] == d_w_fc[0, 0]


def _conv_fd_check(seed, stride, padding):
    rng = np.random.default_rng(seed)
    x = tensor(rng.uniform(1.0, 3.0, (2, 2, 5, 5)))
    k = rng.normal(0.3, 0.4, (3, 2, 3, 3))
    out, cache = forward_conv(x, k, stride=stride, padding=padding)
    upstream = rng.normal(size=out.shape)
    d_in, d_k = backward_conv(cache, upstream)

    h = 1e-6
    idx = tuple(rng.integers(0, s) for s in k.shape)
    kp, km = k.copy(), k.copy()
    kp[idx] += h
    km[idx] -= h
    op, cp = forward_conv(x, kp, stride=stride, padding=padding)
    om, cm = forward_conv(x, km, stride=stride, padding=padding)
    if np.array_equal(cp.sol.causal_count, cm.sol.causal_count):
        fd = float(((op.z - om.z) * upstream).sum() / (2 * h))
        assert d_k[idx] == pytest.approx(fd, rel=1e-4, abs=1e-7)

    idx = tuple(rng.integers(0, s) for s in x.z.shape)
    zp, zm = x.z.copy(), x.z.copy()
    zp[idx] += h
    zm[idx] -= h
    op, cp = forward_conv(tensor(zp), k, stride=stride, padding=padding)
    om, cm = forward_conv(tensor(zm), k, stride=stride, padding=padding)
    if np.array_equal(cp.sol.causal_count, cm.sol.causal_count):
        fd = float(((op.z - om.z) * upstream).sum() / (2 * h))
        assert d_in[idx] == pytest.approx(fd, rel=1e-4, abs=1e-7)


@pytest.mark.parametrize("seed", range(8))
def test_conv_finite_differences(seed):
    _conv_fd_check(seed, stride=1, padding="same")
    _conv_fd_check(seed + 100, stride=2, padding="valid")


def test_maxpool_picks_earliest():
    z = np.array([1.0, 2.0, 3.0, 1.5]).reshape(1, 1, 2, 2)
    out, cache = forward_maxpool(tensor(z), 2)
    assert out.z[0, 0, 0, 0] == 1.0
    assert cache.argmin[0, 0, 0, 0] == 0


def test_maxpool_fired_beats_silent():
    z = np.array([Z_SENTINEL, 2.0, Z_SENTINEL, Z_SENTINEL]).reshape(1, 1, 2, 2)
    fired = np.array([False, True, False, False]).reshape(1, 1, 2, 2)
    out, _ = forward_maxpool(SpikeTensor(z, fired), 2)
    assert out.z[0, 0, 0, 0] == 2.0
    assert out.fired[0, 0, 0, 0]


def test_maxpool_all_silent():
    z = np.full((1, 1, 2, 2), Z_SENTINEL)
    out, _ = forward_maxpool(SpikeTensor(z, np.zeros((1, 1, 2, 2), dtype=bool)), 2)
    assert not out.fired[0, 0, 0, 0]
    assert out.z[0, 0, 0, 0] == Z_SENTINEL


def test_maxpool_tie_breaks_to_lowest_index():
    z = np.array([2.0, 2.0, 2.0, 2.0]).reshape(1, 1, 2, 2)
    _, cache = forward_maxpool(tensor(z), 2)
    assert cache.argmin[0, 0, 0, 0] == 0


def test_maxpool_indivisible_dims():
    with pytest.raises(ValueError):
        forward_maxpool(tensor(np.ones((1, 1, 3, 3))), 2)


def test_maxpool_window_one_is_identity():
    rng = np.random.default_rng(2)
    z = rng.uniform(1, 4, (2, 3, 4, 4))
    out, _ = forward_maxpool(tensor(z), 1)
    np.testing.assert_array_equal(out.z, z)


def test_maxpool_window_permutation_invariant():
    rng = np.random.default_rng(3)
    z = rng.uniform(1, 4, 4)
    base, _ = forward_maxpool(tensor(z.reshape(1, 1, 2, 2)), 2)
    for _ in range(10):
        p = rng.permutation(4)
        out, _ = forward_maxpool(tensor(z[p].reshape(1, 1, 2, 2)), 2)
        assert out.z[0, 0, 0, 0] == base.z[0, 0, 0, 0]


def test_backward_maxpool_routes_to_argmin():
    z = np.array([1.0, 2.0, 3.0, 1.5]).reshape(1, 1, 2, 2)
    _, cache = forward_maxpool(tensor(z), 2)
    g = backward_maxpool(cache, np.full((1, 1, 1, 1), 5.0))
    np.testing.assert_array_equal(g.reshape(-1), [5.0, 0.0, 0.0, 0.0])


def test_backward_maxpool_silent_window_zero():
    z = np.full((1, 1, 2, 2), Z_SENTINEL)
    _, cache = forward_maxpool(SpikeTensor(z, np.zeros((1, 1, 2, 2), dtype=bool)), 2)
    g = backward_maxpool(cache, np.ones((1, 1, 1, 1)))
    assert not g.any()


def test_backward_maxpool_windows_independent():
    z = np.array([[1.0, 2.0, 4.0, 3.0], [5.0, 6.0, 7.0, 8.0]]).reshape(1, 1, 2, 4)
    _, cache = forward_maxpool(tensor(z), 2)
    g = backward_maxpool(cache, np.array([1.0, 2.0]).reshape(1, 1, 1, 2))
    assert g[0, 0, 0, 0] == 1.0  # left window's earliest spike
    assert g[0, 0, 0, 3] == 2.0  # right window's earliest spike
    assert g.sum() == 3.0
