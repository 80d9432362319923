"""Training loop, evaluation metrics, and experiment configuration."""

from dataclasses import dataclass

import numpy as np

from .layers import encode_image
from .loss import loss_forward, loss_grad
from .network import build_mnist_net, init_weights, network_backward, network_forward
from .optim import LrSchedule, clip_gradient, make_optimizer
from .robustness import quantization_schedule, quantize_weights
from . import data_io

LOG_FIELDS = ("epoch", "lr", "loss", "test_acc", "sparsity")


@dataclass
class TrainConfig:
    """Hyperparameters; defaults are the MNIST training recipe."""

    epochs: int = 50
    batch_size: int = 10
    lr_start: float = 0.001
    lr_end: float = 0.0001
    optimizer: str = "adam"
    k_hinge: float = 100.0
    beta: float = 1.0
    lam: float = 0.001
    alpha: float = 1.0
    input_noise_sigma: float = 0.05
    clip_max_norm: float = 10.0
    seed: int = 0
    quant_target_bits: int = 0  # 0 disables the quantization schedule
    data_dir: str = "."
    encode_mode: str = "mnist"
    energy_per_spike: float = 10e-12
    eval_batch_size: int = 250

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.encode_mode not in ("mnist", "cifar"):
            raise ValueError(f"unknown encode_mode {self.encode_mode!r}")
        if self.quant_target_bits not in (0, 2, 4, 8):
            raise ValueError("quant_target_bits must be 0 (off), 2, 4 or 8")
        if self.lr_start <= 0 or self.lr_end <= 0 or self.clip_max_norm <= 0:
            raise ValueError("lr and clip_max_norm must be positive")
        if self.alpha <= 0 or self.input_noise_sigma < 0:
            raise ValueError("alpha must be positive, input_noise_sigma nonnegative")
        return self


@dataclass
class EvalReport:
    """Accuracy plus the spike accounting behind sparsity/energy numbers."""

    accuracy: float
    sparsity: float
    spike_count: int
    energy_joules: float
    confusion: np.ndarray
    n_samples: int
    no_spike_count: int = 0

    @property
    def energy_per_inference(self):
        return self.energy_joules / self.n_samples if self.n_samples else 0.0


def predict(out):
    """Class of the earliest output spike; silent outputs lose to fired ones.

    Rows with no fired output fall back to class 0; the second return value
    flags them.
    """
    key = np.where(out.fired, out.z, np.inf)
    pred = np.argmin(key, axis=1)
    none_fired = ~out.fired.any(axis=1)
    pred[none_fired] = 0
    return pred, none_fired


def _grad_step(net, store, opt, x, labels, k_hinge, beta, lam, clip_max_norm, lr):
    out, caches, stats = network_forward(net, store, x)
    breakdown = loss_forward(out, labels, store, k_hinge, beta, lam)
    d_z, d_w_pen = loss_grad(out, labels, store, k_hinge, beta, lam)
    grads = network_backward(net, store, caches, d_z)
    clipped = []
    for g, gp in zip(grads, d_w_pen):
        if g is None:
            clipped.append(None)
            continue
        total = g + gp
        flat = clip_gradient(total.reshape(total.shape[0], -1), clip_max_norm)
        clipped.append(flat.reshape(total.shape))
    opt.step(store.weights, clipped, lr)
    return breakdown, stats


def train_step(net, store, opt, x, labels, k_hinge, beta, lam, clip_max_norm, lr, bits=32):
    """One mini-batch update; bits < 32 runs a quantized (straight-through) forward.

    The forward pass and the loss penalties read quantized shadow weights;
    gradients land on the full-precision masters. Shadows are cleared before
    returning.
    """
    if bits != 32:
        store.set_shadows([None if w is None else quantize_weights(w, bits) for w in store.weights])
    try:
        return _grad_step(net, store, opt, x, labels, k_hinge, beta, lam, clip_max_norm, lr)
    finally:
        store.clear_shadows()


def evaluate(net, store, dataset, alpha=1.0, mode="mnist", energy_per_spike=10e-12, batch_size=250, early_stop=False):
    """Noiseless evaluation pass over a dataset.

    early_stop is accepted for interface compatibility: with whole-layer
    batch propagation every output is already solved by the time a best
    spike exists to compare against, so the flag cannot change anything and
    results are identical either way.
    """
    del early_stop
    n = dataset.images.shape[0]
    classes = dataset.num_classes
    confusion = np.zeros((classes, classes), dtype=np.int64)
    stats = None
    no_spike = 0
    correct = 0
    for s in range(0, n, batch_size):
        imgs = dataset.images[s : s + batch_size]
        labels = dataset.labels[s : s + batch_size]
        x = encode_image(imgs, alpha=alpha, mode=mode)
        out, _, batch_stats = network_forward(net, store, x)
        pred, none_fired = predict(out)
        correct += int((pred == labels).sum())
        no_spike += int(none_fired.sum())
        np.add.at(confusion, (labels, pred), 1)
        stats = batch_stats if stats is None else stats.merge(batch_stats)
    spike_count = stats.total_fired if stats else 0
    return EvalReport(
        accuracy=correct / n if n else 0.0,
        sparsity=stats.sparsity() if stats else 0.0,
        spike_count=spike_count,
        energy_joules=spike_count * energy_per_spike,
        confusion=confusion,
        n_samples=n,
        no_spike_count=no_spike,
    )


def train(cfg, train_data=None, test_data=None, net=None, store=None, on_epoch=None):
    """Run the full training recipe; returns (net, store, epoch log rows).

    Deterministic for a fixed cfg.seed: weight init, shuffling, and input
    noise all come from one generator. Each epoch row carries the fields
    epoch, lr, loss, test_acc, sparsity. When a quantization schedule is
    active the epoch-end evaluation runs at that epoch's bit width.
    """
    cfg.validate()
    if train_data is None:
        train_data = data_io.load_mnist(cfg.data_dir, "train")
    if test_data is None:
        test_data = data_io.load_mnist(cfg.data_dir, "test")

    rng = np.random.default_rng(cfg.seed)
    if net is None:
        net = build_mnist_net()
    if store is None:
        store = init_weights(net, rng, beta=cfg.beta)
    opt = make_optimizer(cfg.optimizer)
    sched = LrSchedule(cfg.lr_start, cfg.lr_end, max(cfg.epochs - 1, 1))

    n = train_data.images.shape[0]
    logs = []
    for epoch in range(cfg.epochs):
        lr = sched.lr_at(epoch)
        bits = quantization_schedule(epoch, cfg.epochs, cfg.quant_target_bits) if cfg.quant_target_bits else 32
        order = rng.permutation(n)
        loss_sum = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            x = encode_image(
                train_data.images[idx],
                alpha=cfg.alpha,
                mode=cfg.encode_mode,
                noise_sigma=cfg.input_noise_sigma,
                rng=rng,
            )
            breakdown, _ = train_step(
                net, store, opt, x, train_data.labels[idx],
                cfg.k_hinge, cfg.beta, cfg.lam, cfg.clip_max_norm, lr, bits=bits,
            )
            loss_sum += breakdown.total * len(idx)

        if bits != 32:
            store.set_shadows([None if w is None else quantize_weights(w, bits) for w in store.weights])
        try:
            report = evaluate(
                net, store, test_data,
                alpha=cfg.alpha, mode=cfg.encode_mode,
                energy_per_spike=cfg.energy_per_spike, batch_size=cfg.eval_batch_size,
            )
        finally:
            store.clear_shadows()
        row = {
            "epoch": epoch,
            "lr": lr,
            "loss": loss_sum / n,
            "test_acc": report.accuracy,
            "sparsity": report.sparsity,
        }
        logs.append(row)
        if on_epoch is not None:
            on_epoch(row)
    return net, store, logs
