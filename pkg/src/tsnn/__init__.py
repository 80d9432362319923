"""Temporal single-spike neural networks with closed-form spike times."""

from .layers import SpikeTensor, encode_image
from .network import (
    NetworkSpec,
    WeightStore,
    build_mnist_net,
    build_vgg16_net,
    conv,
    fc,
    init_weights,
    maxpool,
    network_backward,
    network_forward,
)
from .neuron import (
    EPS_DENOM,
    NOT_FIRED,
    TIE_TOL,
    Z_SENTINEL,
    CausalSolution,
    NeuronGrad,
    SpikeValue,
    grad_spike,
    solve_spike,
    solve_spike_batch,
)

# training entry points live in tsnn.train (TrainConfig, train, evaluate);
# re-exporting the train function here would shadow the submodule attribute

__version__ = "0.1.0"
