"""MNIST / Fashion-MNIST (IDX) and CIFAR-10 (binary batch) loaders."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 3073
LUMA = (0.299, 0.587, 0.114)


class DataFormatError(ValueError):
    """Malformed dataset file."""


class BadMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


@dataclass
class Sample:
    x: np.ndarray
    y: np.ndarray
    label: int


@dataclass
class Dataset:
    """Inputs ``X`` in ``[0, 1]`` of shape ``(N, n0)``, one-hot targets ``Y``
    and integer ``labels``."""

    X: np.ndarray
    Y: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i) -> Sample:
        return Sample(self.X[i], self.Y[i], int(self.labels[i]))

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    @property
    def num_classes(self) -> int:
        return self.Y.shape[1]

    def subset(self, n: int | None) -> "Dataset":
        """The first ``n`` samples (all of them if ``n`` is None)."""
        if n is None or n >= len(self):
            return self
        return Dataset(self.X[:n], self.Y[:n], self.labels[:n], f"{self.name}[:{n}]")

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.Y[idx], self.labels[idx], self.name)


def one_hot(labels, num_classes: int = 10) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def from_arrays(X, labels, num_classes: int = 10, name: str = "") -> Dataset:
    X = np.ascontiguousarray(X, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    return Dataset(X, one_hot(labels, num_classes), labels, name)


def _read_bytes(path) -> bytes:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _idx_header(buf: bytes, path, n_dims: int, magic: int):
    need = 4 * (n_dims + 1)
    if len(buf) < need:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    found = struct.unpack(">I", buf[:4])[0]
    if found != magic:
        raise BadMagicError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    return struct.unpack(f">{n_dims}I", buf[4:need]), need


def load_idx(images_path, labels_path, name: str = "") -> Dataset:
    """Parse an IDX image/label pair; pixels are scaled by 1/255."""
    ibuf = _read_bytes(images_path)
    (count, rows, cols), off = _idx_header(ibuf, images_path, 3, IDX_IMAGES_MAGIC)
    if len(ibuf) - off < count * rows * cols:
        raise TruncatedFileError(
            f"{images_path}: expected {count * rows * cols} pixel bytes, found {len(ibuf) - off}")
    lbuf = _read_bytes(labels_path)
    (lcount,), loff = _idx_header(lbuf, labels_path, 1, IDX_LABELS_MAGIC)
    if len(lbuf) - loff < lcount:
        raise TruncatedFileError(f"{labels_path}: expected {lcount} labels, found {len(lbuf) - loff}")
    if lcount != count:
        raise CountMismatchError(f"{images_path} has {count} images but {labels_path} has {lcount} labels")
    pixels = np.frombuffer(ibuf, dtype=np.uint8, count=count * rows * cols, offset=off)
    labels = np.frombuffer(lbuf, dtype=np.uint8, count=count, offset=loff)
    if labels.size and labels.max() > 9:
        raise DataFormatError(f"{labels_path}: label {labels.max()} out of range 0..9")
    X = pixels.reshape(count, rows * cols).astype(float) / 255.0
    return from_arrays(X, labels, 10, name or Path(images_path).name)


def load_cifar10_gray(batch_paths, weights: str = "luma", name: str = "cifar10gray") -> Dataset:
    """Parse CIFAR-10 binary batches and convert to grayscale in ``[0, 1]``.

    ``weights="luma"`` uses BT.601 luma, ``"mean"`` the channel average.
    """
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    coef = {"luma": LUMA, "mean": (1 / 3, 1 / 3, 1 / 3)}[weights]
    xs, ls = [], []
    for p in batch_paths:
        buf = _read_bytes(p)
        if len(buf) == 0 or len(buf) % CIFAR_RECORD:
            raise TruncatedFileError(
                f"{p}: length {len(buf)} is not a positive multiple of {CIFAR_RECORD}")
        rec = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        ls.append(rec[:, 0])
        rgb = rec[:, 1:].reshape(-1, 3, 1024).astype(float)
        xs.append((coef[0] * rgb[:, 0] + coef[1] * rgb[:, 1] + coef[2] * rgb[:, 2]) / 255.0)
    labels = np.concatenate(ls)
    if labels.max() > 9:
        raise DataFormatError(f"CIFAR label {labels.max()} out of range 0..9")
    return from_arrays(np.clip(np.concatenate(xs), 0.0, 1.0), labels, 10, name)


_IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(data_dir: Path, fname: str) -> Path:
    for cand in (data_dir / fname, data_dir / (fname + ".gz")):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"{fname}[.gz] not found in {data_dir}")


def load_dataset(name: str, data_dir, split: str = "train") -> Dataset:
    """Load ``mnist``, ``fashion`` or ``cifar10gray`` from ``data_dir``.

    IDX datasets use the standard file names (optionally gzipped); CIFAR-10
    expects ``data_batch_{1..5}.bin`` and ``test_batch.bin``.
    """
    data_dir = Path(data_dir)
    if name in ("mnist", "fashion"):
        imgs, labs = _IDX_FILES[split]
        return load_idx(_find(data_dir, imgs), _find(data_dir, labs), f"{name}-{split}")
    if name == "cifar10gray":
        files = [f"data_batch_{i}.bin" for i in range(1, 6)] if split == "train" else ["test_batch.bin"]
        return load_cifar10_gray([_find(data_dir, f) for f in files], name=f"{name}-{split}")
    raise ValueError(f"unknown dataset {name!r}")


def batches(dataset, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled index batches, deterministic in ``(seed, epoch)``; the final
    short batch is kept."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    n = dataset if isinstance(dataset, int) else len(dataset)
    perm = np.random.default_rng([seed, epoch]).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]
