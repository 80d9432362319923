#!/usr/bin/env python3
"""Train the small convolutional net on MNIST and report the final numbers.

Defaults reproduce the full 50-epoch recipe; --epochs 5 gives the quick
desk-scale run. Example:

    python3 scripts/train_mnist.py --data-dir data/mnist --epochs 5 --out mnist.tsnn
"""

import argparse
import sys
import time

from tsnn import data_io
from tsnn.train import TrainConfig, evaluate, train


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="save the trained model here")
    args = parser.parse_args()

    train_data = data_io.load_mnist(args.data_dir, "train")
    test_data = data_io.load_mnist(args.data_dir, "test")
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)

    t0 = time.time()

    def on_epoch(row):
        print(
            f"epoch {row['epoch']:3d}  lr {row['lr']:.6f}  loss {row['loss']:10.4f}  "
            f"test_acc {row['test_acc']:.4f}  sparsity {row['sparsity']:.3f}",
            flush=True,
        )

    net, store, logs = train(cfg, train_data, test_data, on_epoch=on_epoch)
    minutes = (time.time() - t0) / 60

    report = evaluate(net, store, test_data)
    print(
        f"\nfinished in {minutes:.1f} min: accuracy {report.accuracy:.4f}, "
        f"sparsity {report.sparsity:.3f}, "
        f"{report.energy_per_inference * 1e9:.1f} nJ/inference"
    )
    if args.out:
        data_io.save_model(net, store, args.out)
        print(f"saved model to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
