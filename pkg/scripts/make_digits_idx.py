#!/usr/bin/env python3
"""Build a small MNIST-layout dataset from the sklearn digits set.

The 8x8 digits are tiled up to 28x28 and written as IDX files named like
the MNIST originals, so every CLI command can run end-to-end on machines
without network access:

    python3 scripts/make_digits_idx.py --out data/digits
    tsnn train --data-dir data/digits --epochs 5 --out digits.tsnn
"""

import argparse
import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def write_idx(dirpath, images, labels, stem):
    n, h, w = images.shape
    img = struct.pack(">IIII", 2051, n, h, w) + images.astype(np.uint8).tobytes()
    lbl = struct.pack(">II", 2049, n) + bytes(int(v) for v in labels)
    (dirpath / f"{stem}-images-idx3-ubyte").write_bytes(img)
    (dirpath / f"{stem}-labels-idx1-ubyte").write_bytes(lbl)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/digits", help="target directory")
    parser.add_argument("--train-count", type=int, default=1500)
    args = parser.parse_args()

    digits = load_digits()
    images = digits.images / 16.0  # (1797, 8, 8) in [0, 1]
    images = np.kron(images, np.ones((1, 3, 3)))  # 8 -> 24
    images = np.pad(images, ((0, 0), (2, 2), (2, 2)))  # 24 -> 28
    pixels = np.round(images * 255).astype(np.uint8)
    labels = digits.target

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    k = args.train_count
    write_idx(out_dir, pixels[:k], labels[:k], "train")
    write_idx(out_dir, pixels[k:], labels[k:], "t10k")
    print(f"wrote {k} train / {len(labels) - k} test images to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
