#!/usr/bin/env python3
"""Quantization and weight-noise sweep for a trained model.

Prints post-hoc accuracy at 8/4/2 bits and mean accuracy under weight
noise from 40 dB down to 10 dB SNR. Example:

    python3 scripts/robustness_sweep.py --model mnist.tsnn --data-dir data/mnist
"""

import argparse
import sys

import numpy as np

from tsnn import data_io
from tsnn.network import WeightStore
from tsnn.robustness import perturb_weights, quantize_weights
from tsnn.train import evaluate


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", required=True)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--trials", type=int, default=10, help="noise draws per SNR level")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    net, store = data_io.load_model(args.model)
    data = data_io.load_mnist(args.data_dir, "test")

    float_acc = evaluate(net, store, data).accuracy
    print(f"float32 accuracy: {float_acc:.4f}\n")

    print("bits  accuracy  drop")
    for bits in (8, 4, 2):
        q = WeightStore([None if w is None else quantize_weights(w, bits) for w in store.weights])
        acc = evaluate(net, q, data).accuracy
        print(f"{bits:4d}  {acc:.4f}    {float_acc - acc:+.4f}")

    print("\nsnr_db  mean_acc  min_acc  drop")
    for snr_db in (40.0, 30.0, 25.0, 20.0, 15.0, 10.0):
        accs = [
            evaluate(
                net, perturb_weights(store, snr_db, np.random.default_rng(args.seed + t)), data
            ).accuracy
            for t in range(args.trials)
        ]
        print(
            f"{snr_db:6.1f}  {np.mean(accs):.4f}    {np.min(accs):.4f}   "
            f"{float_acc - np.mean(accs):+.4f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
