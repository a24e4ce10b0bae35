"""Weights files, key=value configs and metrics CSV output.

Weights file layout (all little-endian)::

    8s   magic  b"LIFTNETW"
    u32  format version (1)
    u32  number of weight layers L
    u32  x (L+1)  layer dimensions n0..nL
    u8   x L      constraint codes for layers 1..L (0 linear, 1 relu, 2 hardsig)
    f64  gamma
    f64  ...      W_0..W_{L-1} row-major, then b_0..b_{L-1}
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from .netspec import ConstraintSet, NetworkSpec, Weights

MAGIC = b"LIFTNETW"
VERSION = 1


class WeightsFileError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def weights_to_bytes(spec: NetworkSpec, w: Weights) -> bytes:
    w.check(spec)
    L = spec.n_layers
    head = MAGIC + struct.pack(f"<II{L + 1}I{L}Bd", VERSION, L, *spec.layer_dims,
                               *[int(c) for c in spec.constraints], spec.gamma)
    body = np.concatenate([m.ravel() for m in w.matrices] + list(w.biases)).astype("<f8")
    return head + body.tobytes()


def weights_from_bytes(buf: bytes, origin: str = "<bytes>") -> tuple[NetworkSpec, Weights]:
    if buf[:8] != MAGIC:
        raise WeightsFileError(f"{origin}: not a liftnet weights file (bad magic)")
    if len(buf) < 16:
        raise WeightsFileError(f"{origin}: truncated header")
    version, L = struct.unpack_from("<II", buf, 8)
    if version != VERSION:
        raise WeightsFileError(f"{origin}: unsupported format version {version}")
    fmt = f"<{L + 1}I{L}Bd"
    if L < 1 or len(buf) < 16 + struct.calcsize(fmt):
        raise WeightsFileError(f"{origin}: truncated header")
    fields = struct.unpack_from(fmt, buf, 16)
    dims, codes, gamma = fields[:L + 1], fields[L + 1:2 * L + 1], fields[-1]
    try:
        spec = NetworkSpec(dims, [ConstraintSet(c) for c in codes], gamma)
    except ValueError as e:
        raise WeightsFileError(f"{origin}: invalid architecture in header: {e}") from None
    off = 16 + struct.calcsize(fmt)
    n = sum(dims[k] * dims[k + 1] + dims[k + 1] for k in range(L))
    if len(buf) - off != 8 * n:
        raise WeightsFileError(
            f"{origin}: expected {8 * n} bytes of parameters for {spec.describe()}, found {len(buf) - off}")
    flat = np.frombuffer(buf, dtype="<f8", count=n, offset=off).astype(float)
    mats, biases, pos = [], [], 0
    for k in range(L):
        size = dims[k] * dims[k + 1]
        mats.append(flat[pos:pos + size].reshape(dims[k + 1], dims[k]))
        pos += size
    for k in range(L):
        biases.append(flat[pos:pos + dims[k + 1]])
        pos += dims[k + 1]
    w = Weights(mats, biases)
    try:
        w.check(spec)
    except ValueError as e:
        raise WeightsFileError(f"{origin}: {e}") from None
    return spec, w


def save_weights(path, spec: NetworkSpec, w: Weights) -> None:
    with open(path, "wb") as f:
        f.write(weights_to_bytes(spec, w))


def load_weights(path) -> tuple[NetworkSpec, Weights]:
    with open(path, "rb") as f:
        return weights_from_bytes(f.read(), str(path))


def parse_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys may use
    dashes or underscores."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            key = key.replace("-", "_")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
            out.setdefault("__lines__", {})[key] = lineno
    return out


def csv_header(n_hidden: int) -> list[str]:
    return (["epoch", "wall_seconds", "eta_effective", "mean_loss", "train_acc", "test_acc"]
            + [f"linfrac_{k}" for k in range(1, n_hidden + 1)])


class MetricsCSV:
    """Appends one row per epoch and flushes, so partial runs leave a valid file."""

    def __init__(self, path, n_hidden: int):
        self._f = open(path, "w", newline="")
        self._w = csv.writer(self._f)
        self._w.writerow(csv_header(n_hidden))
        self._f.flush()

    def write(self, row) -> None:
        self._w.writerow([row.epoch, f"{row.wall_seconds:.3f}", repr(row.eta_effective),
                          repr(row.mean_loss), repr(row.train_acc), repr(row.test_acc),
                          *[repr(v) for v in row.linfrac]])
        self._f.flush()

    def close(self) -> None:
        self._f.close()
