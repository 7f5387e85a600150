"""IDX loading and label-overlay batch construction."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
IMAGE_SIDE = 28

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, 784), values in [0, 1]
    labels: np.ndarray  # (N,) int64
    num_classes: int = 10

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise FormatError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, n: int | None) -> "LabeledDataset":
        if n is None or n >= len(self):
            return self
        return LabeledDataset(self.images[:n], self.labels[:n], self.num_classes)

    def astype(self, dtype) -> "LabeledDataset":
        return LabeledDataset(self.images.astype(dtype, copy=False), self.labels, self.num_classes)


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.exists() and path.with_name(path.name + ".gz").exists():
        path = path.with_name(path.name + ".gz")
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _parse_idx(raw: bytes, magic: int, ndim: int, what: str) -> tuple[tuple[int, ...], np.ndarray]:
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{what}: truncated header ({len(raw)} bytes)")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{what}: magic is 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    expected = header + int(np.prod(dims, dtype=np.int64))
    if len(raw) != expected:
        raise FormatError(f"{what}: payload length {len(raw) - header} does not match dims {dims}")
    return dims, np.frombuffer(raw, dtype=np.uint8, offset=header)


def load_idx(images_path, labels_path, num_classes: int = 10, dtype=np.float32) -> LabeledDataset:
    """Read an IDX image/label file pair; pixels are scaled to [0, 1]."""
    dims, pixels = _parse_idx(_read_bytes(images_path), IMAGE_MAGIC, 3, f"images file {images_path}")
    n, rows, cols = dims
    if (rows, cols) != (IMAGE_SIDE, IMAGE_SIDE):
        raise FormatError(f"images file {images_path}: image size {rows}x{cols}, expected 28x28")
    (n_labels,), labels = _parse_idx(_read_bytes(labels_path), LABEL_MAGIC, 1, f"labels file {labels_path}")
    if n_labels != n:
        raise FormatError(f"item count mismatch: {n} images vs {n_labels} labels")
    labels = labels.astype(np.int64)
    if n and labels.max() >= num_classes:
        raise FormatError(f"labels file {labels_path}: label {labels.max()} outside [0, {num_classes})")
    images = pixels.reshape(n, rows * cols).astype(dtype) / dtype(255.0)
    return LabeledDataset(images.astype(dtype, copy=False), labels, num_classes)


def load_split(data_dir, split: str = "train", num_classes: int = 10, dtype=np.float32) -> LabeledDataset:
    names = TRAIN_FILES if split == "train" else TEST_FILES
    data_dir = Path(data_dir)
    return load_idx(data_dir / names[0], data_dir / names[1], num_classes, dtype)


def write_idx(images_path, labels_path, images_u8: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images of shape (N, 28, 28) and their labels as an IDX pair."""
    images_u8 = np.asarray(images_u8, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n = images_u8.shape[0]
    Path(images_path).write_bytes(struct.pack(">4I", IMAGE_MAGIC, n, *images_u8.shape[1:]) + images_u8.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", LABEL_MAGIC, n) + labels.tobytes())


def overlay_labels(images: np.ndarray, overlay: np.ndarray, num_classes: int) -> np.ndarray:
    """Copy of ``images`` with the first ``num_classes`` pixels replaced by a one-hot of ``overlay``."""
    if num_classes > images.shape[1]:
        raise DomainError(f"cannot overlay {num_classes} classes onto {images.shape[1]} inputs")
    out = np.array(images, copy=True)
    out[:, :num_classes] = 0
    out[np.arange(out.shape[0]), overlay] = 1
    return out


def make_positive(images: np.ndarray, labels: np.ndarray, num_classes: int) -> np.ndarray:
    return overlay_labels(images, labels, num_classes)


def wrong_labels(labels: np.ndarray, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    """A uniformly random label different from each true label."""
    if num_classes < 2:
        raise DomainError(f"negative labels need at least 2 classes, got {num_classes}")
    return (labels + rng.integers(1, num_classes, size=labels.shape[0])) % num_classes


def make_negative_candidates(
    images: np.ndarray, labels: np.ndarray, num_classes: int, rng: np.random.Generator
) -> np.ndarray:
    return overlay_labels(images, wrong_labels(labels, num_classes, rng), num_classes)
