"""Accuracy, linear-activation fractions, a linear-regression baseline and
first-layer filter export."""

from __future__ import annotations

import re

import numpy as np

from .inference import DEFAULT_SWEEPS, infer_free
from .netspec import ConstraintSet, NetworkSpec, Weights, forward_pass

EVAL_CHUNK = 2000


def _chunks(n, size=EVAL_CHUNK):
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def predict(spec: NetworkSpec, w: Weights, X, eval_mode: str = "forward", sweeps: int = DEFAULT_SWEEPS):
    """Argmax class (lowest index on ties) of the network output."""
    X = np.atleast_2d(X)
    out = np.empty(X.shape[0], dtype=np.int64)
    for s in _chunks(X.shape[0]):
        if eval_mode == "forward":
            z = forward_pass(spec, w, X[s]).output
        elif eval_mode == "inferred":
            z = infer_free(spec, w, X[s], sweeps).output
        else:
            raise ValueError(f"unknown eval_mode {eval_mode!r}")
        out[s] = np.argmax(z, axis=1)
    return out


def accuracy(spec: NetworkSpec, w: Weights, dataset, eval_mode: str = "forward",
             sweeps: int = DEFAULT_SWEEPS) -> float:
    if len(dataset) == 0:
        return float("nan")
    return float(np.mean(predict(spec, w, dataset.X, eval_mode, sweeps) == dataset.labels))


def linear_fraction(spec: NetworkSpec, w: Weights, dataset, sweeps: int = DEFAULT_SWEEPS) -> list[float]:
    """Per hidden layer, the share of unit-sample pairs whose free-inferred
    pre-activation lies strictly inside the identity region of the
    nonlinearity."""
    L = spec.n_layers
    counts = np.zeros(L - 1)
    total = 0
    for s in _chunks(len(dataset)):
        st = infer_free(spec, w, dataset.X[s], sweeps)
        total += st.a[0].shape[0]
        for k in range(L - 1):
            counts[k] += np.mean(spec.constraints[k].interior(st.a[k]), axis=1).sum()
    if total == 0:
        return [float("nan")] * (L - 1)
    return [float(c / total) for c in counts]


def linear_regression_baseline(train_set, test_set, max_iter: int = 3000, tol: float = 1e-8,
                               return_model: bool = False):
    """Least-squares linear map (with bias) onto one-hot targets, fitted by
    accelerated full-batch gradient descent; returns argmax accuracies."""
    X = np.hstack([train_set.X, np.ones((len(train_set), 1))])
    Y = train_set.Y
    n = X.shape[0]
    G = X.T @ X / n
    C = X.T @ Y / n
    step = 1.0 / np.linalg.eigvalsh(G)[-1]
    B = np.zeros((X.shape[1], Y.shape[1]))
    V = B.copy()
    t = 1.0
    g0 = None
    for _ in range(max_iter):
        grad = G @ V - C
        gn = np.linalg.norm(grad)
        g0 = gn if g0 is None else g0
        if gn <= tol * max(g0, 1e-300):
            break
        B_new = V - step * grad
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        V = B_new + ((t - 1.0) / t_new) * (B_new - B)
        B, t = B_new, t_new

    def acc(ds):
        if len(ds) == 0:
            return float("nan")
        P = np.hstack([ds.X, np.ones((len(ds), 1))]) @ B
        return float(np.mean(np.argmax(P, axis=1) == ds.labels))

    res = (acc(train_set), acc(test_set))
    return (res, B) if return_model else res


def filter_image(w: Weights, rows: int, cols: int) -> np.ndarray:
    """Tile the rows of ``W_0`` as ``rows x cols`` images, each min-max scaled
    to 0..255 (constant tiles become 128), with 1-pixel black separators."""
    W0 = w.matrices[0]
    if W0.shape[1] != rows * cols:
        raise ValueError(f"input dimension {W0.shape[1]} != {rows}x{cols}")
    n = W0.shape[0]
    grid_c = int(np.ceil(np.sqrt(n)))
    grid_r = int(np.ceil(n / grid_c))
    img = np.zeros((grid_r * (rows + 1) - 1, grid_c * (cols + 1) - 1), dtype=np.uint8)
    for u in range(n):
        f = W0[u]
        lo, hi = f.min(), f.max()
        if hi > lo:
            tile = np.rint((f - lo) / (hi - lo) * 255.0)
        else:
            tile = np.full(f.shape, 128.0)
        r, c = divmod(u, grid_c)
        img[r * (rows + 1):r * (rows + 1) + rows, c * (cols + 1):c * (cols + 1) + cols] = \
            tile.reshape(rows, cols).astype(np.uint8)
    return img


def export_filters(w: Weights, rows: int, cols: int, path) -> None:
    """Write the first-layer filter grid as a binary PGM (P5) file."""
    img = filter_image(w, rows, cols)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", buf)
    if m is None:
        raise ValueError(f"{path}: not a binary PGM")
    width, height = int(m.group(1)), int(m.group(2))
    return np.frombuffer(buf, dtype=np.uint8, count=width * height, offset=m.end()).reshape(height, width)
