"""Network architecture, parameter containers and the plain feed-forward pass."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ConstraintSet(enum.IntEnum):
    """Convex set a layer's activations are constrained to.

    The integer values are the codes understood by the compiled kernels and
    stored in weights files.
    """

    LINEAR = 0
    NONNEGATIVE = 1
    UNIT_INTERVAL = 2

    @classmethod
    def from_name(cls, name: str) -> "ConstraintSet":
        try:
            return _NONLIN_NAMES[name.strip().lower()]
        except KeyError:
            raise ValueError(
                f"unknown nonlinearity {name!r}; expected one of "
                f"{sorted(_NONLIN_NAMES)}"
            ) from None

    @property
    def short_name(self) -> str:
        return {0: "linear", 1: "relu", 2: "hardsig"}[int(self)]

    def project(self, v):
        return project(self, v)

    def contains(self, v, tol: float = 0.0) -> bool:
        v = np.asarray(v)
        if self is ConstraintSet.LINEAR:
            return True
        if self is ConstraintSet.NONNEGATIVE:
            return bool(np.all(v >= -tol))
        return bool(np.all(v >= -tol) and np.all(v <= 1.0 + tol))

    def interior(self, a) -> np.ndarray:
        """Mask of entries where the projection acts as the identity (strictly)."""
        a = np.asarray(a)
        if self is ConstraintSet.LINEAR:
            return np.ones(a.shape, dtype=bool)
        if self is ConstraintSet.NONNEGATIVE:
            return a > 0.0
        return (a > 0.0) & (a < 1.0)


_NONLIN_NAMES = {
    "linear": ConstraintSet.LINEAR,
    "relu": ConstraintSet.NONNEGATIVE,
    "nonnegative": ConstraintSet.NONNEGATIVE,
    "hardsig": ConstraintSet.UNIT_INTERVAL,
    "hardsigmoid": ConstraintSet.UNIT_INTERVAL,
    "unitinterval": ConstraintSet.UNIT_INTERVAL,
}


def project(c: ConstraintSet, v):
    """Euclidean projection of ``v`` onto the set ``c`` (returns a new array)."""
    v = np.asarray(v, dtype=float)
    if c is ConstraintSet.LINEAR:
        return v.copy()
    if c is ConstraintSet.NONNEGATIVE:
        return np.maximum(v, 0.0)
    return np.clip(v, 0.0, 1.0)


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths ``[n0, ..., nL]``, constraint set per layer 1..L and the
    feedback weight ``gamma``."""

    layer_dims: tuple[int, ...]
    constraints: tuple[ConstraintSet, ...]
    gamma: float = 0.125

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        cons = tuple(ConstraintSet(c) for c in self.constraints)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "constraints", cons)
        object.__setattr__(self, "gamma", float(self.gamma))
        if len(dims) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer dimensions must be positive, got {dims}")
        if len(cons) != len(dims) - 1:
            raise ValueError(
                f"expected {len(dims) - 1} constraint sets, got {len(cons)}"
            )
        if cons[-1] is not ConstraintSet.LINEAR:
            raise ValueError("the output layer must be unconstrained (linear)")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")

    @classmethod
    def build(cls, layers, nonlin="relu", gamma: float = 0.125) -> "NetworkSpec":
        """Build from ``"784-64-10"`` (or a list of ints) and a hidden-layer
        nonlinearity name; the output layer is always linear."""
        if isinstance(layers, str):
            try:
                layers = [int(t) for t in layers.split("-")]
            except ValueError:
                raise ValueError(f"malformed layer string {layers!r}") from None
        n_layers = len(layers) - 1
        if isinstance(nonlin, str):
            hidden = [ConstraintSet.from_name(nonlin)] * (n_layers - 1)
        else:
            hidden = [ConstraintSet(c) for c in nonlin]
        return cls(tuple(layers), tuple(hidden) + (ConstraintSet.LINEAR,), gamma)

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def with_gamma(self, gamma: float) -> "NetworkSpec":
        return NetworkSpec(self.layer_dims, self.constraints, gamma)

    def describe(self) -> str:
        return "-".join(map(str, self.layer_dims)) + "/" + ",".join(
            c.short_name for c in self.constraints[:-1]
        )


@dataclass
class Weights:
    """Matrices ``W_k`` of shape ``(n_{k+1}, n_k)`` and biases ``b_k``."""

    matrices: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.matrices = [np.ascontiguousarray(m, dtype=float) for m in self.matrices]
        self.biases = [np.ascontiguousarray(b, dtype=float) for b in self.biases]
        if len(self.matrices) != len(self.biases):
            raise ValueError("need one bias vector per weight matrix")

    def check(self, spec: NetworkSpec) -> None:
        if len(self.matrices) != spec.n_layers:
            raise ValueError(
                f"weights have {len(self.matrices)} layers, network has {spec.n_layers}"
            )
        d = spec.layer_dims
        for k, (m, b) in enumerate(zip(self.matrices, self.biases)):
            if m.shape != (d[k + 1], d[k]) or b.shape != (d[k + 1],):
                raise ValueError(
                    f"layer {k}: expected W {(d[k + 1], d[k])} and b {(d[k + 1],)}, "
                    f"got {m.shape} and {b.shape}"
                )
            if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite weights")

    def copy(self) -> "Weights":
        return Weights([m.copy() for m in self.matrices], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([m.ravel() for m in self.matrices] + list(self.biases))

    def unflat(self, v) -> "Weights":
        """Weights of the same shapes filled from a flat vector (see ``flat``)."""
        mats, bias, pos = [], [], 0
        for m in self.matrices:
            mats.append(np.asarray(v[pos:pos + m.size]).reshape(m.shape))
            pos += m.size
        for b in self.biases:
            bias.append(np.asarray(v[pos:pos + b.size]).copy())
            pos += b.size
        return Weights(mats, bias)


@dataclass
class ActivationState:
    """Activations ``z[k-1] = z_k`` for layers 1..L and the matching
    pre-activations ``a_k = W_{k-1} z_{k-1} + b_{k-1}``.

    Arrays are either vectors (single sample) or ``(batch, n_k)`` matrices.
    """

    z: list[np.ndarray]
    a: list[np.ndarray] = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.z[-1]

    def copy(self) -> "ActivationState":
        return ActivationState([v.copy() for v in self.z], [v.copy() for v in self.a])


def init_weights(spec: NetworkSpec, seed: int) -> Weights:
    """Normal weights with std ``1/sqrt(fan_in)`` and zero biases."""
    rng = np.random.default_rng(seed)
    d = spec.layer_dims
    mats = [
        rng.normal(0.0, 1.0 / np.sqrt(d[k]), size=(d[k + 1], d[k]))
        for k in range(spec.n_layers)
    ]
    return Weights(mats, [np.zeros(d[k + 1]) for k in range(spec.n_layers)])


def as_batch(x, dim: int, name: str = "x") -> tuple[np.ndarray, bool]:
    """Return ``x`` as a C-contiguous ``(batch, dim)`` array and whether the
    input was a single vector."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != dim:
        raise ValueError(f"{name} has shape {x.shape}, expected trailing dimension {dim}")
    return np.ascontiguousarray(x2), single


def unbatch(state: ActivationState, single: bool) -> ActivationState:
    if not single:
        return state
    return ActivationState([v[0] for v in state.z], [v[0] for v in state.a])


def forward_pass(spec: NetworkSpec, w: Weights, x) -> ActivationState:
    """Feed-forward computation ``z_{k+1} = proj(W_k z_k + b_k)`` with ``z_0 = x``."""
    xb, single = as_batch(x, spec.layer_dims[0])
    z_prev = xb
    zs, As = [], []
    for k in range(spec.n_layers):
        a = z_prev @ w.matrices[k].T + w.biases[k]
        z_prev = project(spec.constraints[k], a)
        As.append(a)
        zs.append(z_prev)
    return unbatch(ActivationState(zs, As), single)
