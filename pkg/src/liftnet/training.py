"""Weight-update rules (back-propagation, standard lifted, contrastive),
mini-batch SGD and gradient checking."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, batches
from .inference import DEFAULT_SWEEPS, solve
from .metrics import accuracy, linear_fraction
from .netspec import NetworkSpec, Weights, as_batch, forward_pass, init_weights

log = logging.getLogger(__name__)

MODES = ("backprop", "lifted", "contrastive")


@dataclass
class GradientSet:
    dW: list[np.ndarray]
    db: list[np.ndarray]

    @classmethod
    def zeros_like(cls, w: Weights) -> "GradientSet":
        return cls([np.zeros_like(m) for m in w.matrices], [np.zeros_like(b) for b in w.biases])

    def __add__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet([a + b for a, b in zip(self.dW, other.dW)],
                           [a + b for a, b in zip(self.db, other.db)])

    def scaled(self, s: float) -> "GradientSet":
        return GradientSet([s * a for a in self.dW], [s * a for a in self.db])

    def flat(self) -> np.ndarray:
        return np.concatenate([m.ravel() for m in self.dW] + list(self.db))

    def layer(self, k: int) -> np.ndarray:
        """Weights and bias gradient of layer ``k`` as one flat vector."""
        return np.concatenate([self.dW[k].ravel(), self.db[k]])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())))


@dataclass
class TrainConfig:
    mode: str = "contrastive"
    eta_bp: float = 0.05
    batch_size: int = 50
    epochs: int = 100
    sweeps: int = DEFAULT_SWEEPS
    seed: int = 0
    # lifted mode only: rate is lifted_scale * eta_bp, damped by
    # warmup_factor for the first warmup_epochs epochs
    warmup_epochs: int = 5
    warmup_factor: float = 0.1
    lifted_scale: float = 8.0
    eval_mode: str = "forward"
    linfrac_split: str = "test"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.eta_bp > 0:
            raise ValueError("eta_bp must be positive")
        if not (self.lifted_scale > 0 and self.warmup_factor > 0) or self.warmup_epochs < 0:
            raise ValueError("lifted_scale and warmup_factor must be positive, warmup_epochs >= 0")
        if self.batch_size < 1 or self.epochs < 1 or self.sweeps < 1:
            raise ValueError("batch_size, epochs and sweeps must be at least 1")
        if self.eval_mode not in ("forward", "inferred"):
            raise ValueError(f"unknown eval_mode {self.eval_mode!r}")
        if self.linfrac_split not in ("train", "test"):
            raise ValueError(f"unknown linfrac_split {self.linfrac_split!r}")


@dataclass
class EpochMetrics:
    epoch: int
    mode: str
    wall_seconds: float
    eta_effective: float
    mean_loss: float
    train_acc: float
    test_acc: float
    linfrac: tuple


@dataclass
class RunMetrics:
    rows: list[EpochMetrics] = field(default_factory=list)

    @property
    def last(self) -> EpochMetrics:
        return self.rows[-1]


class NonFiniteLossError(RuntimeError):
    pass


# -- per-batch gradient rules (sums over rows, plus summed loss) -------------

def _bp_sum(spec, w, xb, yb):
    st = forward_pass(spec, w, xb)
    delta = st.a[-1] - yb
    loss = 0.5 * float(np.sum(delta * delta))
    dW, db = [None] * spec.n_layers, [None] * spec.n_layers
    for k in range(spec.n_layers - 1, -1, -1):
        zin = xb if k == 0 else st.z[k - 1]
        dW[k] = delta.T @ zin
        db[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ w.matrices[k]) * spec.constraints[k - 1].interior(st.a[k - 1])
    return GradientSet(dW, db), loss


def _energy_grad(spec, xb, st, sign=1.0):
    """W-gradient of the energy at a consistent state: ``-gamma^k lam_{k+1} z_k^T``."""
    g = spec.gamma
    dW, db = [], []
    for k in range(spec.n_layers):
        lam = st.z[k] - st.a[k]
        zin = xb if k == 0 else st.z[k - 1]
        c = -sign * g**k
        dW.append(c * (lam.T @ zin))
        db.append(c * lam.sum(axis=0))
    return GradientSet(dW, db)


def _energy_value(spec, st):
    g = spec.gamma
    return float(sum(0.5 * g**k * np.sum((st.z[k] - st.a[k]) ** 2) for k in range(spec.n_layers)))


def _lifted_sum(spec, w, xb, yb, sweeps, tol=None, backend=None):
    st, _ = solve(spec, w, xb, yb, sweeps, tol=tol, backend=backend)
    return _energy_grad(spec, xb, st), _energy_value(spec, st)


def _contrastive_sum(spec, w, xb, yb, sweeps, tol=None, backend=None):
    hat, _ = solve(spec, w, xb, yb, sweeps, tol=tol, backend=backend)
    chk, _ = solve(spec, w, xb, None, sweeps, tol=tol, backend=backend)
    g = _energy_grad(spec, xb, hat) + _energy_grad(spec, xb, chk, sign=-1.0)
    return g, _energy_value(spec, hat) - _energy_value(spec, chk)


def _mean(spec, x, y, fn, *args, **kw):
    xb, _ = as_batch(x, spec.layer_dims[0])
    yb, _ = as_batch(y, spec.layer_dims[-1], "y")
    g, loss = fn(*args[:2], xb, yb, *args[2:], **kw)
    return g.scaled(1.0 / xb.shape[0]), loss / xb.shape[0]


def grad_backprop(spec: NetworkSpec, w: Weights, x, y) -> GradientSet:
    """Gradient of ``||f(x) - y||^2 / 2`` through the projection cascade
    (batch mean). Projections have derivative 0 at boundary points."""
    return _mean(spec, x, y, _bp_sum, spec, w)[0]


def grad_standard_lifted(spec: NetworkSpec, w: Weights, x, y, sweeps: int = DEFAULT_SWEEPS, **kw) -> GradientSet:
    """Weight gradient of the clamped energy at its inferred minimiser."""
    return _mean(spec, x, y, _lifted_sum, spec, w, sweeps, **kw)[0]


def grad_contrastive(spec: NetworkSpec, w: Weights, x, y, sweeps: int = DEFAULT_SWEEPS, **kw) -> GradientSet:
    """Gradient of the contrastive loss: clamped minus free energy gradients,
    each evaluated at its own minimiser."""
    return _mean(spec, x, y, _contrastive_sum, spec, w, sweeps, **kw)[0]


def backprop_loss(spec, w, x, y) -> float:
    return _mean(spec, x, y, _bp_sum, spec, w)[1]


def lifted_loss(spec, w, x, y, sweeps=DEFAULT_SWEEPS, **kw) -> float:
    """Mean of the minimal clamped energies."""
    return _mean(spec, x, y, _lifted_sum, spec, w, sweeps, **kw)[1]


def contrastive_loss(spec, w, x, y, sweeps=DEFAULT_SWEEPS, **kw) -> float:
    """Mean of ``min clamped energy - min free energy``."""
    return _mean(spec, x, y, _contrastive_sum, spec, w, sweeps, **kw)[1]


def contrastive_lr(eta_bp: float, gamma: float, n_layers: int) -> float:
    if eta_bp <= 0 or gamma <= 0 or n_layers < 1:
        raise ValueError("contrastive_lr needs positive inputs")
    return eta_bp / gamma ** (n_layers - 1)


def sgd_step(w: Weights, g: GradientSet, eta: float) -> Weights:
    return Weights([m - eta * d for m, d in zip(w.matrices, g.dW)],
                   [b - eta * d for b, d in zip(w.biases, g.db)])


def finite_diff_grad(loss_fn, w: Weights, epsilon: float = 1e-6) -> GradientSet:
    """Central differences of ``loss_fn(Weights) -> float`` for every weight
    and bias entry. Any inner minimisation in ``loss_fn`` is re-run per
    perturbation."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    theta = w.flat()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        t = theta.copy()
        t[i] = theta[i] + epsilon
        fp = loss_fn(w.unflat(t))
        t[i] = theta[i] - epsilon
        fm = loss_fn(w.unflat(t))
        grad[i] = (fp - fm) / (2.0 * epsilon)
    gw = w.unflat(grad)
    return GradientSet(gw.matrices, gw.biases)


# -- back-propagation equivalence ----------------------------------------------

def cosine(u, v) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 1.0 if nu == nv else 0.0
    return float(u @ v / (nu * nv))


def bp_equivalence_report(spec: NetworkSpec, w: Weights, x, y, gammas, tol: float = 1e-12,
                          max_sweeps: int = 20000) -> list[dict]:
    """Compare ``gamma^{-(L-1)}`` times the contrastive gradient with the
    back-propagation gradient, per layer, for each feedback weight.

    Rows carry ``gamma``, ``layer`` (0-based weight index), ``cosine`` and
    ``rel_err = ||g_c - g_bp|| / ||g_bp||``.
    """
    gammas = list(gammas)
    if any(g <= 0 for g in gammas) or any(a <= b for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gammas must be positive and strictly descending")
    gb = grad_backprop(spec, w, x, y)
    rows = []
    for gam in gammas:
        sg = spec.with_gamma(gam)
        gc = grad_contrastive(sg, w, x, y, sweeps=max_sweeps, tol=tol).scaled(gam ** -(spec.n_layers - 1))
        for k in range(spec.n_layers):
            u, v = gc.layer(k), gb.layer(k)
            rows.append(dict(gamma=gam, layer=k, cosine=cosine(u, v),
                             rel_err=float(np.linalg.norm(u - v) / max(np.linalg.norm(v), 1e-300))))
    return rows


def sample_interior_instance(spec: NetworkSpec, rng: np.random.Generator, margin: float = 1e-3,
                             max_tries: int = 10000):
    """Random ``(weights, x, y)`` whose forward pre-activations all stay at
    least ``margin`` away from every constraint boundary."""
    d = spec.layer_dims
    for _ in range(max_tries):
        w = init_weights(spec, int(rng.integers(2**31)))
        w.biases = [rng.normal(0, 0.1, size=b.shape) for b in w.biases]
        x = rng.uniform(0.0, 1.0, size=d[0])
        st = forward_pass(spec, w, x)
        ok = True
        for k in range(spec.n_layers - 1):
            a = st.a[k]
            c = int(spec.constraints[k])
            if c >= 1 and np.min(np.abs(a)) < margin:
                ok = False
            if c == 2 and np.min(np.abs(a - 1.0)) < margin:
                ok = False
            # a layer that is entirely clamped carries no signal
            if c >= 1 and not np.any(spec.constraints[k].interior(a)):
                ok = False
        if ok:
            y = st.z[-1] + rng.normal(0.0, 1.0, size=d[-1])
            return w, x, y
    raise RuntimeError("could not sample an interior instance")


# -- training loop ---------------------------------------------------------------

def effective_lr(cfg: TrainConfig, spec: NetworkSpec, epoch: int) -> float:
    """Learning rate used in (0-based) ``epoch``."""
    if cfg.mode == "contrastive":
        return contrastive_lr(cfg.eta_bp, spec.gamma, spec.n_layers)
    if cfg.mode == "lifted":
        damp = cfg.warmup_factor if epoch < cfg.warmup_epochs else 1.0
        return damp * cfg.lifted_scale * cfg.eta_bp
    return cfg.eta_bp


def _batch_sum(cfg, spec, w, xb, yb):
    if cfg.mode == "backprop":
        return _bp_sum(spec, w, xb, yb)
    if cfg.mode == "lifted":
        return _lifted_sum(spec, w, xb, yb, cfg.sweeps)
    return _contrastive_sum(spec, w, xb, yb, cfg.sweeps)


def batch_gradient(cfg: TrainConfig, spec: NetworkSpec, w: Weights, xb, yb, pool=None):
    """Mean gradient and mean loss over a batch. With a thread pool the batch
    is split into contiguous chunks reduced in a fixed order."""
    n = xb.shape[0]
    if pool is None or cfg.workers <= 1 or n < 2 * cfg.workers:
        g, loss = _batch_sum(cfg, spec, w, xb, yb)
    else:
        edges = np.linspace(0, n, cfg.workers + 1).astype(int)
        parts = list(pool.map(lambda i: _batch_sum(cfg, spec, w, xb[edges[i]:edges[i + 1]],
                                                   yb[edges[i]:edges[i + 1]]),
                              range(cfg.workers)))
        g, loss = parts[0]
        for gi, li in parts[1:]:
            g, loss = g + gi, loss + li
    return g.scaled(1.0 / n), loss / n


def evaluate(spec, w, train_set, test_set, cfg: TrainConfig):
    train_acc = accuracy(spec, w, train_set, cfg.eval_mode, cfg.sweeps)
    test_acc = accuracy(spec, w, test_set, cfg.eval_mode, cfg.sweeps) if test_set is not None else float("nan")
    split = test_set if (cfg.linfrac_split == "test" and test_set is not None) else train_set
    return train_acc, test_acc, tuple(linear_fraction(spec, w, split, cfg.sweeps))


def train(spec: NetworkSpec, dataset: Dataset, cfg: TrainConfig, test_set: Dataset | None = None,
          w0: Weights | None = None, on_epoch=None) -> tuple[Weights, RunMetrics]:
    """Shuffled mini-batch SGD with the gradient rule selected by ``cfg.mode``.

    ``on_epoch(EpochMetrics)`` is called after every epoch.
    """
    if len(dataset) == 0:
        raise ValueError("empty training set")
    w = init_weights(spec, cfg.seed) if w0 is None else w0.copy()
    w.check(spec)
    metrics = RunMetrics()
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    t0 = time.perf_counter()
    try:
        for epoch in range(cfg.epochs):
            eta = effective_lr(cfg, spec, epoch)
            total, count = 0.0, 0
            for bi, idx in enumerate(batches(dataset, cfg.batch_size, cfg.seed, epoch)):
                xb, yb = dataset.X[idx], dataset.Y[idx]
                g, loss = batch_gradient(cfg, spec, w, xb, yb, pool)
                if not (np.isfinite(loss) and g.is_finite()):
                    raise NonFiniteLossError(
                        f"non-finite loss or gradient in epoch {epoch + 1}, batch {bi} "
                        f"(mode={cfg.mode}, eta={eta:g})")
                w = sgd_step(w, g, eta)
                total += loss * len(idx)
                count += len(idx)
            train_acc, test_acc, lf = evaluate(spec, w, dataset, test_set, cfg)
            row = EpochMetrics(epoch + 1, cfg.mode, time.perf_counter() - t0, eta,
                               total / count, train_acc, test_acc, lf)
            metrics.rows.append(row)
            log.info("epoch %d %s loss=%.5f train=%.4f test=%.4f linfrac=%s", row.epoch, cfg.mode,
                     row.mean_loss, train_acc, test_acc, ",".join(f"{v:.3f}" for v in lf))
            if on_epoch is not None:
                on_epoch(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return w, metrics
