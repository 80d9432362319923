import struct

import numpy as np
import pytest


def write_idx_dir(dirpath, images, labels, stem):
    """Write (N,H,W) uint8 images + labels as an IDX pair under dirpath."""
    n, h, w = images.shape
    img = struct.pack(">IIII", 2051, n, h, w) + images.astype(np.uint8).tobytes()
    lbl = struct.pack(">II", 2049, n) + bytes(int(v) for v in labels)
    (dirpath / f"{stem}-images-idx3-ubyte").write_bytes(img)
    (dirpath / f"{stem}-labels-idx1-ubyte").write_bytes(lbl)


@pytest.fixture
def mnist_like_dir(tmp_path):
    """Tiny random 28x28 dataset in MNIST file layout; 40 train / 20 test."""
    rng = np.random.default_rng(123)
    write_idx_dir(tmp_path, rng.integers(0, 256, (40, 28, 28), dtype=np.uint8), rng.integers(0, 10, 40), "train")
    write_idx_dir(tmp_path, rng.integers(0, 256, (20, 28, 28), dtype=np.uint8), rng.integers(0, 10, 20), "t10k")
    return tmp_path
