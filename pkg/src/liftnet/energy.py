"""Free and clamped network energies, their duals and the primal-dual map.

All functions accept single samples (vectors) or batches (rows); batched
inputs give per-sample arrays where a scalar would otherwise be returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netspec import ActivationState, ConstraintSet, NetworkSpec, Weights

FEASIBILITY_TOL = 1e-8
"""Absolute tolerance for primal constraint and dual indicator checks."""


@dataclass
class EnergyBreakdown:
    total: float | np.ndarray
    per_layer: list


@dataclass
class DualState:
    """Dual vectors ``lam[k-1] = lambda_k`` (k = 1..L) and slacks
    ``nu[k-1] = lambda_k - gamma W_k^T lambda_{k+1}`` for hidden layers."""

    lam: list[np.ndarray]
    nu: list[np.ndarray]


def _sq(v):
    return np.sum(v * v, axis=-1)


def _check_feasible(spec, zs, upto):
    for k in range(upto):
        c = spec.constraints[k]
        if not c.contains(zs[k], FEASIBILITY_TOL):
            raise ValueError(f"activations of layer {k + 1} violate the {c.short_name} constraint")


def _layer_terms(spec, w, x, zs):
    g = spec.gamma
    terms = []
    prev = np.asarray(x, dtype=float)
    for k in range(spec.n_layers):
        r = zs[k] - prev @ w.matrices[k].T - w.biases[k]
        terms.append(0.5 * g**k * _sq(r))
        prev = zs[k]
    return terms


def free_energy(spec: NetworkSpec, w: Weights, x, z: ActivationState) -> EnergyBreakdown:
    """Free energy of the activations ``z`` given input ``x``."""
    _check_feasible(spec, z.z, spec.n_layers)
    terms = _layer_terms(spec, w, x, z.z)
    return EnergyBreakdown(sum(terms), terms)


def clamped_energy(spec: NetworkSpec, w: Weights, x, y, z: ActivationState) -> EnergyBreakdown:
    """Energy with the output clamped to ``y``; ``z.z[-1]`` is ignored."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != spec.layer_dims[-1]:
        raise ValueError(f"target has dimension {y.shape[-1]}, output layer has {spec.layer_dims[-1]}")
    _check_feasible(spec, z.z, spec.n_layers - 1)
    zs = list(z.z[:-1]) + [y]
    terms = _layer_terms(spec, w, x, zs)
    return EnergyBreakdown(sum(terms), terms)


def primal_to_dual(spec: NetworkSpec, w: Weights, x, z: ActivationState) -> DualState:
    """``lambda_k = z_k - a_k`` from a consistent activation state.

    For a clamped state (``z.z[-1] == y``) the output dual is ``y - a_L``.
    """
    g = spec.gamma
    lam = [zk - ak for zk, ak in zip(z.z, z.a)]
    nu = [lam[k - 1] - g * lam[k] @ w.matrices[k] for k in range(1, spec.n_layers)]
    return DualState(lam, nu)


def _conjugate_terms(spec, w, lam):
    """Sum over hidden layers of ``gamma^{k-1} phi_k^*(gamma W_k^T lam_{k+1} - lam_k)``;
    ``inf`` where the argument is outside the conjugate's domain."""
    g = spec.gamma
    out = np.zeros(np.shape(lam[0])[:-1])
    for k in range(1, spec.n_layers):
        v = g * lam[k] @ w.matrices[k] - lam[k - 1]
        c = spec.constraints[k - 1]
        if c is ConstraintSet.LINEAR:
            val = np.where(np.max(np.abs(v), axis=-1) <= FEASIBILITY_TOL, 0.0, np.inf)
        elif c is ConstraintSet.NONNEGATIVE:
            val = np.where(np.max(v, axis=-1) <= FEASIBILITY_TOL, 0.0, np.inf)
        else:
            val = np.sum(np.maximum(v, 0.0), axis=-1)
        out = out + g ** (k - 1) * val
    return out


def _bias_shift(spec, w, x, lam):
    g = spec.gamma
    a1 = np.asarray(x, dtype=float) @ w.matrices[0].T + w.biases[0]
    s = np.sum(lam[0] * a1, axis=-1)
    for k in range(1, spec.n_layers):
        s = s + g**k * (lam[k] @ w.biases[k])
    return s


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def dual_free_energy(spec: NetworkSpec, w: Weights, x, dual: DualState):
    """Dual of the free energy; ``-inf`` when ``dual`` is infeasible."""
    g = spec.gamma
    lam = dual.lam
    L = spec.n_layers
    quad = sum(0.5 * g ** (k - 1) * _sq(lam[k - 1]) for k in range(1, L))
    val = -quad - _conjugate_terms(spec, w, lam) - _bias_shift(spec, w, x, lam)
    out_ok = np.max(np.abs(lam[-1]), axis=-1) <= FEASIBILITY_TOL
    return _scalar(np.where(out_ok, val, -np.inf))


def dual_clamped_energy(spec: NetworkSpec, w: Weights, x, y, dual: DualState):
    """Dual of the clamped energy; ``-inf`` when ``dual`` is infeasible."""
    g = spec.gamma
    lam = dual.lam
    L = spec.n_layers
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != spec.layer_dims[-1]:
        raise ValueError(f"target has dimension {y.shape[-1]}, output layer has {spec.layer_dims[-1]}")
    quad = sum(0.5 * g ** (k - 1) * _sq(lam[k - 1]) for k in range(1, L + 1))
    val = (
        -quad
        - _conjugate_terms(spec, w, lam)
        - _bias_shift(spec, w, x, lam)
        + g ** (L - 1) * np.sum(lam[-1] * y, axis=-1)
    )
    return _scalar(val)


def duality_gap(primal, dual):
    return primal - dual
