#!/usr/bin/env python3
"""Download the MNIST IDX files into a local directory.

Tries a couple of well-known mirrors; files are kept gzipped, which the
loader understands. Usage:

    python3 scripts/fetch_mnist.py --out data/mnist
"""

import argparse
import sys
import urllib.error
import urllib.request
from pathlib import Path

FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)

MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)


def fetch(name, out_dir):
    dest = out_dir / name
    if dest.exists() and dest.stat().st_size > 0:
        print(f"{name}: already present")
        return True
    for base in MIRRORS:
        url = base + name
        try:
            print(f"{name}: fetching {url}")
            with urllib.request.urlopen(url, timeout=60) as resp:
                dest.write_bytes(resp.read())
            print(f"{name}: {dest.stat().st_size} bytes")
            return True
        except (urllib.error.URLError, OSError) as exc:
            print(f"{name}: {exc}")
    return False


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/mnist", help="target directory")
    args = parser.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = all([fetch(name, out_dir) for name in FILES])
    if not ok:
        print("some files could not be downloaded; check network access", file=sys.stderr)
        return 1
    print(f"done; point --data-dir (or TSNN_MNIST_DIR) at {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
