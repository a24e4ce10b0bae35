"""Self-contained numerical checks behind ``liftnet verify``.

Every suite draws random small instances from printed seeds and returns a
list of :class:`Check` results with the worst observed error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import (clamped_energy, dual_clamped_energy, dual_free_energy, duality_gap,
                     free_energy, primal_to_dual)
from .inference import solve
from .netspec import ConstraintSet, NetworkSpec, Weights, init_weights
from .training import (GradientSet, backprop_loss, bp_equivalence_report, contrastive_loss,
                       finite_diff_grad, grad_backprop, grad_contrastive, grad_standard_lifted,
                       lifted_loss, sample_interior_instance)

SUITES = ("gradcheck", "duality", "gamma-sweep", "optimality")
KINDS = tuple(ConstraintSet)


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    limit: float
    seed: int | None = None

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        seed = "" if self.seed is None else f" (seed {self.seed})"
        return f"[{tag}] {self.name}: worst {self.worst:.3e} (limit {self.limit:.1e}){seed}"


def _collect(name, values, limit, seeds, larger_is_better=False):
    values = np.asarray(values, dtype=float)
    if larger_is_better:
        i = int(np.argmin(values))
        return Check(name, bool(values[i] >= limit), float(values[i]), limit, seeds[i])
    i = int(np.argmax(values))
    return Check(name, bool(values[i] <= limit), float(values[i]), limit, seeds[i])


def random_instance(seed: int, kind: ConstraintSet, max_dim: int = 8, max_layers: int = 4,
                    gamma: float = 0.125):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(2, max_layers + 1))
    dims = [int(d) for d in rng.integers(2, max_dim + 1, size=L + 1)]
    spec = NetworkSpec.build(dims, kind.short_name, gamma)
    w = init_weights(spec, seed)
    w = Weights(w.matrices, [rng.normal(0, 0.2, size=b.shape) for b in w.biases])
    x = rng.uniform(0, 1, size=dims[0])
    y = rng.normal(size=dims[-1])
    return spec, w, x, y


def _rel(g: GradientSet, ref: GradientSet) -> float:
    return float(np.linalg.norm(g.flat() - ref.flat()) / max(np.linalg.norm(ref.flat()), 1e-300))


def gradcheck(seed: int = 1, n: int = 6, tol: float = 1e-10) -> list[Check]:
    inner = dict(sweeps=100000, tol=tol)
    bp, lif, con, seeds = [], [], [], []
    for i in range(n):
        s = seed * 1000 + i
        spec, w, x, y = random_instance(s, KINDS[i % 3], max_dim=5, max_layers=3)
        seeds.append(s)
        bp.append(_rel(grad_backprop(spec, w, x, y),
                       finite_diff_grad(lambda v: backprop_loss(spec, v, x, y), w, 1e-6)))
        lif.append(_rel(grad_standard_lifted(spec, w, x, y, **inner),
                        finite_diff_grad(lambda v: lifted_loss(spec, v, x, y, **inner), w, 1e-6)))
        con.append(_rel(grad_contrastive(spec, w, x, y, **inner),
                        finite_diff_grad(lambda v: contrastive_loss(spec, v, x, y, **inner), w, 1e-6)))
    return [_collect("backprop vs finite differences", bp, 1e-6, seeds),
            _collect("standard lifted vs nested finite differences", lif, 1e-4, seeds),
            _collect("contrastive vs nested finite differences", con, 1e-4, seeds)]


def duality(seed: int = 1, n: int = 20) -> list[Check]:
    out = []
    for kind, limit in ((ConstraintSet.LINEAR, 1e-8), (ConstraintSet.NONNEGATIVE, 1e-6),
                        (ConstraintSet.UNIT_INTERVAL, 1e-6)):
        gaps, weak, seeds = [], [], []
        for i in range(n):
            s = seed * 1000 + i
            spec, w, x, y = random_instance(s, kind)
            seeds.append(s)
            hat, _ = solve(spec, w, x, y, 20000, tol=1e-13)
            chk, _ = solve(spec, w, x, None, 20000, tol=1e-13)
            g1 = duality_gap(clamped_energy(spec, w, x, y, hat).total,
                             dual_clamped_energy(spec, w, x, y, primal_to_dual(spec, w, x, hat)))
            g2 = duality_gap(free_energy(spec, w, x, chk).total,
                             dual_free_energy(spec, w, x, primal_to_dual(spec, w, x, chk)))
            gaps.append(max(abs(g1), abs(g2)))
            weak.append(-min(g1, g2))
        out.append(_collect(f"duality gap at optimum ({kind.short_name})", gaps, limit, seeds))
        out.append(_collect(f"weak duality violation ({kind.short_name})", weak, 1e-10, seeds))
    return out


def linear_closed_form(spec: NetworkSpec, w: Weights, x, y, hat) -> GradientSet:
    """Contrastive gradient of an all-linear network from the dual recursion:
    the output error propagated by transposed weights, times ``gamma^{L-1}``."""
    L, g = spec.n_layers, spec.gamma
    prev = x if L == 1 else hat.z[-2]
    err = w.matrices[-1] @ prev + w.biases[-1] - y
    dW, db = [], []
    for k in range(L):
        sig = err
        for j in range(L - 1, k, -1):
            sig = w.matrices[j].T @ sig
        zk = x if k == 0 else hat.z[k - 1]
        dW.append(g ** (L - 1) * np.outer(sig, zk))
        db.append(g ** (L - 1) * sig)
    return GradientSet(dW, db)


def gamma_sweep(seed: int = 1, n: int = 10, gammas=(1 / 8, 1 / 32, 1 / 128)) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst_mono, final_cos, seeds = [], [], []
    for i in range(n):
        s = int(rng.integers(2**31))
        r = np.random.default_rng(s)
        dims = [int(d) for d in r.integers(2, 9, size=int(r.integers(3, 5)))]
        spec = NetworkSpec.build(dims, "relu", gammas[0])
        w, x, y = sample_interior_instance(spec, r)
        rows = bp_equivalence_report(spec, w, x, y, gammas)
        drops, finals = [], []
        for k in range(spec.n_layers):
            cos = [row["cosine"] for row in rows if row["layer"] == k]
            drops.append(max(a - b for a, b in zip(cos, cos[1:])))
            finals.append(cos[-1])
        worst_mono.append(max(drops))
        final_cos.append(min(finals))
        seeds.append(s)
    lin = []
    lseeds = []
    for i in range(n):
        s = seed * 1000 + i
        spec, w, x, y = random_instance(s, ConstraintSet.LINEAR)
        hat, _ = solve(spec, w, x, y, 100000, tol=1e-15)
        lin.append(_rel(grad_contrastive(spec, w, x, y, sweeps=100000, tol=1e-15),
                        linear_closed_form(spec, w, x, y, hat)))
        lseeds.append(s)
    return [_collect("cosine decrease as gamma shrinks", worst_mono, 1e-9, seeds),
            _collect(f"cosine to back-prop at gamma={gammas[-1]:.4g}", final_cos, 0.99, seeds,
                     larger_is_better=True),
            _collect("linear closed form vs contrastive gradient", lin, 1e-10, lseeds)]


def stationarity_residual(spec: NetworkSpec, w: Weights, state, clamped: bool) -> float:
    """Largest violation of the first-order conditions over hidden layers
    (and the output layer in free mode)."""
    g = spec.gamma
    L = spec.n_layers
    worst = 0.0
    for k in range(1, L + 1):
        if k == L and clamped:
            break
        zk = state.z[k - 1]
        grad = zk - state.a[k - 1]
        if k < L:
            grad = grad - g * w.matrices[k].T @ (state.z[k] - state.a[k])
        c = spec.constraints[k - 1]
        r = np.abs(grad)
        if c is not ConstraintSet.LINEAR:
            at_lo = zk <= 0.0
            r[at_lo] = np.maximum(-grad[at_lo], 0.0)
            if c is ConstraintSet.UNIT_INTERVAL:
                at_hi = zk >= 1.0
                r[at_hi] = np.maximum(grad[at_hi], 0.0)
        worst = max(worst, float(np.max(r)))
    return worst


def optimality(seed: int = 1, n: int = 21, sweeps: int = 200) -> list[Check]:
    resid, mono, feas, j1, seeds = [], [], [], [], []
    for i in range(n):
        s = seed * 1000 + i
        spec, w, x, y = random_instance(s, KINDS[i % 3])
        seeds.append(s)
        hat, ih = solve(spec, w, x, y, sweeps, trace=True)
        chk, ic = solve(spec, w, x, None, sweeps, trace=True)
        resid.append(max(stationarity_residual(spec, w, hat, True),
                         stationarity_residual(spec, w, chk, False)))
        tr = np.concatenate([np.diff(ih.energy_trace), np.diff(ic.energy_trace), [0.0]])
        mono.append(max(float(np.max(tr)), 0.0))
        feas.append(0.0 if all(spec.constraints[k].contains(st.z[k]) for st in (hat, chk)
                               for k in range(spec.n_layers)) else 1.0)
        j1.append(-(clamped_energy(spec, w, x, y, hat).total - free_energy(spec, w, x, chk).total))
    return [_collect(f"first-order residual after {sweeps} sweeps", resid, 1e-6, seeds),
            _collect("energy increase between sweeps", mono, 1e-12, seeds),
            _collect("constraint violation (0/1)", feas, 0.0, seeds),
            _collect("negative contrastive loss", j1, 1e-12, seeds)]


_SUITE_FUNCS = {"gradcheck": gradcheck, "duality": duality, "gamma-sweep": gamma_sweep,
                "optimality": optimality}


def run_suite(name: str, seed: int = 1) -> list[Check]:
    if name not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    return _SUITE_FUNCS[name](seed=seed)
