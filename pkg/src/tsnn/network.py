"""Network assembly: layer descriptors, weight storage, forward/backward.

A network is an ordered stack of conv / fc / maxpool descriptors applied to
a fixed input shape. WeightStore keeps full-precision master weights and an
optional per-layer quantized shadow; forward passes read the shadow when one
is set, optimizer updates always land on the masters.
"""

from dataclasses import dataclass

import numpy as np

from .layers import (
    SpikeTensor,
    backward_conv,
    backward_fc,
    backward_maxpool,
    conv_output_size,
    forward_conv,
    forward_fc,
    forward_maxpool,
)

CONV, FC, MAXPOOL = "conv", "fc", "maxpool"


@dataclass(frozen=True)
class LayerSpec:
    """One layer descriptor; unused fields stay at their defaults."""

    kind: str
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    padding: str = "same"
    out_features: int = 0
    window: int = 0

    def validate(self):
        if self.kind == CONV:
            if self.kernel < 1 or self.stride < 1 or self.out_channels < 1:
                raise ValueError(f"bad conv spec {self}")
            if self.padding not in ("same", "valid"):
                raise ValueError(f"bad padding {self.padding!r}")
        elif self.kind == FC:
            if self.out_features < 1:
                raise ValueError(f"bad fc spec {self}")
        elif self.kind == MAXPOOL:
            if self.window < 1:
                raise ValueError(f"bad maxpool spec {self}")
        else:
            raise ValueError(f"unknown layer kind {self.kind!r}")


def conv(out_channels, kernel, stride=1, padding="same"):
    return LayerSpec(CONV, out_channels=out_channels, kernel=kernel, stride=stride, padding=padding)


def fc(out_features):
    return LayerSpec(FC, out_features=out_features)


def maxpool(window):
    return LayerSpec(MAXPOOL, window=window)


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layers plus the (C, H, W) input shape they apply to."""

    input_shape: tuple
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        if len(self.input_shape) != 3:
            raise ValueError(f"input_shape must be (C, H, W), got {self.input_shape}")
        for ls in self.layers:
            ls.validate()
        self.shapes()  # raises on geometry that does not compose

    def shapes(self):
        """Activation shape after each layer; (C,H,W) tuples or (D,) for fc."""
        out = []
        cur = self.input_shape
        for ls in self.layers:
            if ls.kind == CONV:
                if len(cur) != 3:
                    raise ValueError("conv after flatten is not supported")
                c, h, w = cur
                cur = (
                    ls.out_channels,
                    conv_output_size(h, ls.kernel, ls.stride, ls.padding),
                    conv_output_size(w, ls.kernel, ls.stride, ls.padding),
                )
                if cur[1] < 1 or cur[2] < 1:
                    raise ValueError(f"layer {ls} shrinks input below 1x1")
            elif ls.kind == MAXPOOL:
                if len(cur) != 3:
                    raise ValueError("maxpool after flatten is not supported")
                c, h, w = cur
                if h % ls.window or w % ls.window:
                    raise ValueError(f"window {ls.window} does not divide {h}x{w}")
                cur = (c, h // ls.window, w // ls.window)
            else:
                cur = (ls.out_features,)
            out.append(cur)
        return out

    def fan_in(self, i):
        cur = self.input_shape if i == 0 else self.shapes()[i - 1]
        ls = self.layers[i]
        if ls.kind == CONV:
            return cur[0] * ls.kernel * ls.kernel
        if ls.kind == FC:
            return int(np.prod(cur))
        return 0

    def weight_shape(self, i):
        """Master weight shape for layer i, or None for weightless layers."""
        ls = self.layers[i]
        if ls.kind == CONV:
            cur = self.input_shape if i == 0 else self.shapes()[i - 1]
            return (ls.out_channels, cur[0], ls.kernel, ls.kernel)
        if ls.kind == FC:
            return (ls.out_features, self.fan_in(i))
        return None

    def num_params(self):
        return sum(int(np.prod(s)) for i in range(len(self.layers)) if (s := self.weight_shape(i)) is not None)


@dataclass
class WeightStore:
    """Full-precision masters plus optional quantized shadows used in forward."""

    weights: list
    shadows: list = None

    def __post_init__(self):
        if self.shadows is None:
            self.shadows = [None] * len(self.weights)

    def effective(self, i):
        return self.weights[i] if self.shadows[i] is None else self.shadows[i]

    def set_shadows(self, shadows):
        if len(shadows) != len(self.weights):
            raise ValueError("shadow count mismatch")
        self.shadows = list(shadows)

    def clear_shadows(self):
        self.shadows = [None] * len(self.weights)

    def copy(self):
        return WeightStore(
            [None if w is None else w.copy() for w in self.weights],
            [None if s is None else s.copy() for s in self.shadows],
        )


def init_weights(net, rng, beta=1.0):
    """Draw layer weights from normal(2*beta/fan_in, 1/sqrt(fan_in)).

    Expected weight sums start near 2*beta so most neurons fire from the
    first step; the weight-sum hinge keeps them there during training.
    """
    weights = []
    for i, _ in enumerate(net.layers):
        shape = net.weight_shape(i)
        if shape is None:
            weights.append(None)
        else:
            f = net.fan_in(i)
            weights.append(rng.normal(2.0 * beta / f, 1.0 / np.sqrt(f), size=shape))
    return WeightStore(weights)


@dataclass
class SpikeStats:
    """Fired counts per layer over everything the forward pass produced."""

    fired_per_layer: list
    size_per_layer: list

    @property
    def total_fired(self):
        return int(sum(self.fired_per_layer))

    @property
    def total_size(self):
        return int(sum(self.size_per_layer))

    def sparsity(self):
        return self.total_fired / self.total_size if self.total_size else 0.0

    def merge(self, other):
        return SpikeStats(
            [a + b for a, b in zip(self.fired_per_layer, other.fired_per_layer)],
            [a + b for a, b in zip(self.size_per_layer, other.size_per_layer)],
        )


def network_forward(net, store, x):
    """Apply layers in order; returns (output, caches, SpikeStats).

    SpikeStats counts fired flags of every layer output (hidden and final),
    never the input encoders.
    """
    if len(store.weights) != len(net.layers):
        raise ValueError("weight store does not match network")
    caches = []
    fired_counts, sizes = [], []
    cur = x
    for i, ls in enumerate(net.layers):
        if ls.kind == CONV:
            cur, cache = forward_conv(cur, store.effective(i), ls.stride, ls.padding)
        elif ls.kind == MAXPOOL:
            cur, cache = forward_maxpool(cur, ls.window)
        else:
            if cur.z.ndim > 2:
                cur = cur.reshape(cur.z.shape[0], -1)
            cur, cache = forward_fc(cur, store.effective(i))
        caches.append(cache)
        fired_counts.append(int(cur.fired.sum()))
        sizes.append(int(cur.fired.size))
    return cur, caches, SpikeStats(fired_counts, sizes)


def network_backward(net, store, caches, upstream):
    """Chain upstream dL/dz_out back through the cached layers.

    Returns per-layer weight gradients (None for weightless layers), taken
    at the weights the forward pass actually used.
    """
    if len(caches) != len(net.layers):
        raise ValueError("cache list does not match network")
    grads = [None] * len(net.layers)
    g = np.asarray(upstream, dtype=np.float64)
    for i in range(len(net.layers) - 1, -1, -1):
        ls = net.layers[i]
        cache = caches[i]
        if ls.kind == CONV:
            g, grads[i] = backward_conv(cache, g)
        elif ls.kind == MAXPOOL:
            g = backward_maxpool(cache, g)
        else:
            g, grads[i] = backward_fc(cache, g)
            # fc flattened a conv activation: restore its spatial shape
            prev_shape = net.input_shape if i == 0 else net.shapes()[i - 1]
            if len(prev_shape) == 3:
                g = g.reshape((g.shape[0],) + prev_shape)
    return grads


def build_mnist_net():
    """Two stride-2 conv layers plus a 10-way readout for 28x28 inputs."""
    return NetworkSpec((1, 28, 28), (conv(32, 5, 2), conv(16, 5, 2), fc(10)))


def build_vgg16_net(input_shape=(3, 32, 32), classes=10):
    """VGG16-style stack: five conv blocks with pooling, then four fc layers."""
    widths = [(64, 2), (128, 2), (256, 3), (512, 3), (1024, 3)]
    layers = []
    for width, reps in widths:
        layers += [conv(width, 3, 1) for _ in range(reps)]
        layers.append(maxpool(2))
    layers += [fc(4096), fc(4096), fc(512), fc(classes)]
    return NetworkSpec(input_shape, tuple(layers))
