"""Dataset loaders (MNIST IDX, CIFAR-10 binary) and model serialization.

Model files are a minimal container: magic "TSNN", format version, layer
descriptor table, float32 little-endian weight blobs, CRC-32 trailer. Master
weights are stored at float32; loading returns float64 arrays.
"""

import gzip
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import CONV, FC, MAXPOOL, LayerSpec, NetworkSpec, WeightStore

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
CIFAR_RECORD_BYTES = 3073

MODEL_MAGIC = b"TSNN"
MODEL_VERSION = 1

_KIND_CODE = {CONV: 1, FC: 2, MAXPOOL: 3}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}
_PAD_CODE = {"same": 1, "valid": 2}
_CODE_PAD = {v: k for k, v in _PAD_CODE.items()}


class LoadError(Exception):
    """Base for all ingestion/serialization failures."""


class BadMagicError(LoadError):
    pass


class TruncatedError(LoadError):
    pass


class CountMismatchError(LoadError):
    pass


class BadLabelError(LoadError):
    pass


class ChecksumError(LoadError):
    pass


class VersionError(LoadError):
    pass


@dataclass
class Dataset:
    """Images (N,C,H,W) scaled to [0,1] plus integer labels."""

    images: np.ndarray
    labels: np.ndarray
    split: str
    num_classes: int = 10


def _read_bytes(path):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_idx(images_path, labels_path, split="train"):
    """Parse big-endian IDX pairs: image magic 2051, label magic 2049."""
    img_raw = _read_bytes(images_path)
    if len(img_raw) < 16:
        raise TruncatedError(f"{images_path}: header needs 16 bytes, file has {len(img_raw)}")
    magic, n, h, w = struct.unpack(">IIII", img_raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagicError(f"{images_path}: magic {magic}, expected {IDX_IMAGE_MAGIC}")
    if len(img_raw) != 16 + n * h * w:
        raise TruncatedError(f"{images_path}: expected {16 + n * h * w} bytes, got {len(img_raw)}")
    images = np.frombuffer(img_raw, dtype=np.uint8, offset=16).reshape(n, 1, h, w)

    lbl_raw = _read_bytes(labels_path)
    if len(lbl_raw) < 8:
        raise TruncatedError(f"{labels_path}: header needs 8 bytes, file has {len(lbl_raw)}")
    magic, n_lbl = struct.unpack(">II", lbl_raw[:8])
    if magic != IDX_LABEL_MAGIC:
        raise BadMagicError(f"{labels_path}: magic {magic}, expected {IDX_LABEL_MAGIC}")
    if len(lbl_raw) != 8 + n_lbl:
        raise TruncatedError(f"{labels_path}: expected {8 + n_lbl} bytes, got {len(lbl_raw)}")
    if n_lbl != n:
        raise CountMismatchError(f"{n} images but {n_lbl} labels")
    labels = np.frombuffer(lbl_raw, dtype=np.uint8, offset=8).astype(np.int64)
    return Dataset(images.astype(np.float64) / 255.0, labels, split)


def load_cifar_bin(paths, split="train"):
    """Concatenate CIFAR-10 binary batches of 3073-byte records."""
    images, labels = [], []
    for path in paths:
        raw = _read_bytes(path)
        if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES:
            raise TruncatedError(f"{path}: size {len(raw)} not a multiple of {CIFAR_RECORD_BYTES}")
        rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        lbl = rec[:, 0]
        if lbl.max() > 9:
            raise BadLabelError(f"{path}: label byte {lbl.max()} > 9")
        labels.append(lbl.astype(np.int64))
        images.append(rec[:, 1:].reshape(-1, 3, 32, 32))
    return Dataset(
        np.concatenate(images).astype(np.float64) / 255.0, np.concatenate(labels), split
    )


def load_mnist(data_dir, split="train"):
    """Load the standard MNIST file pair from a directory; accepts .gz copies."""
    stem = "train" if split == "train" else "t10k"
    d = Path(data_dir)

    def pick(name):
        plain = d / name
        return plain if plain.exists() else d / (name + ".gz")

    return load_idx(pick(f"{stem}-images-idx3-ubyte"), pick(f"{stem}-labels-idx1-ubyte"), split)


def random_crop_flip(images, rng, pad=4):
    """Zero-pad, random-crop back to size, random horizontal flip per image."""
    n, c, h, w = images.shape
    padded = np.pad(images, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.empty_like(images)
    offs = rng.integers(0, 2 * pad + 1, size=(n, 2))
    flips = rng.random(n) < 0.5
    for i in range(n):
        dy, dx = offs[i]
        crop = padded[i, :, dy : dy + h, dx : dx + w]
        out[i] = crop[:, :, ::-1] if flips[i] else crop
    return out


def standardize_images(images):
    """Per-image standardization, min-max rescaled to [0,1] for the encoders."""
    n = images.shape[0]
    flat = images.reshape(n, -1)
    std = flat.std(axis=1, keepdims=True)
    z = (flat - flat.mean(axis=1, keepdims=True)) / np.where(std > 0, std, 1.0)
    lo, hi = z.min(axis=1, keepdims=True), z.max(axis=1, keepdims=True)
    z = (z - lo) / np.where(hi > lo, hi - lo, 1.0)
    return z.reshape(images.shape)


def _pack_layer(ls):
    code = _KIND_CODE[ls.kind]
    if ls.kind == CONV:
        return struct.pack("<BIIIB", code, ls.out_channels, ls.kernel, ls.stride, _PAD_CODE[ls.padding])
    if ls.kind == FC:
        return struct.pack("<BI", code, ls.out_features)
    return struct.pack("<BI", code, ls.window)


def _unpack_layer(buf, off):
    (code,) = struct.unpack_from("<B", buf, off)
    off += 1
    kind = _CODE_KIND.get(code)
    if kind is None:
        raise LoadError(f"unknown layer code {code}")
    if kind == CONV:
        oc, k, s, pad = struct.unpack_from("<IIIB", buf, off)
        return LayerSpec(CONV, out_channels=oc, kernel=k, stride=s, padding=_CODE_PAD[pad]), off + 13
    (arg,) = struct.unpack_from("<I", buf, off)
    if kind == FC:
        return LayerSpec(FC, out_features=arg), off + 4
    return LayerSpec(MAXPOOL, window=arg), off + 4


def save_model(spec, store, path):
    """Write spec + master weights; float64 masters are stored as float32."""
    parts = [MODEL_MAGIC, struct.pack("<H", MODEL_VERSION)]
    parts.append(struct.pack("<3I", *spec.input_shape))
    parts.append(struct.pack("<H", len(spec.layers)))
    for ls in spec.layers:
        parts.append(_pack_layer(ls))
    for w in store.weights:
        if w is None:
            continue
        blob = np.ascontiguousarray(w, dtype="<f4").tobytes()
        parts.append(struct.pack("<Q", len(blob)))
        parts.append(blob)
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_model(path):
    """Read a model file back into (NetworkSpec, WeightStore)."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MODEL_MAGIC) + 2 + 4:
        raise TruncatedError(f"{path}: {len(raw)} bytes is too short for a model file")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError(f"{path}: checksum mismatch")
    if body[:4] != MODEL_MAGIC:
        raise BadMagicError(f"{path}: magic {body[:4]!r}, expected {MODEL_MAGIC!r}")
    (version,) = struct.unpack_from("<H", body, 4)
    if version > MODEL_VERSION:
        raise VersionError(f"{path}: file version {version} > supported {MODEL_VERSION}")
    off = 6
    input_shape = struct.unpack_from("<3I", body, off)
    off += 12
    (n_layers,) = struct.unpack_from("<H", body, off)
    off += 2
    layers = []
    for _ in range(n_layers):
        ls, off = _unpack_layer(body, off)
        layers.append(ls)
    spec = NetworkSpec(input_shape, tuple(layers))

    weights = []
    for i in range(len(layers)):
        shape = spec.weight_shape(i)
        if shape is None:
            weights.append(None)
            continue
        (nbytes,) = struct.unpack_from("<Q", body, off)
        off += 8
        if off + nbytes > len(body):
            raise TruncatedError(f"{path}: weight blob overruns file")
        want = int(np.prod(shape)) * 4
        if nbytes != want:
            raise CountMismatchError(f"{path}: layer {i} blob {nbytes} bytes, expected {want}")
        w = np.frombuffer(body, dtype="<f4", count=want // 4, offset=off)
        weights.append(w.astype(np.float64).reshape(shape))
        off += nbytes
    if off != len(body):
        raise CountMismatchError(f"{path}: {len(body) - off} unread bytes after weights")
    return spec, WeightStore(weights)
