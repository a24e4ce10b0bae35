"""Independent reference computations used by the tests.

Nothing here calls into the coordinate-descent code; energies are summed
element by element and minimisers are found by projected gradient on an
explicitly assembled quadratic model.
"""

import itertools

import numpy as np

from liftnet.netspec import ConstraintSet, NetworkSpec, Weights, init_weights

KINDS = (ConstraintSet.LINEAR, ConstraintSet.NONNEGATIVE, ConstraintSet.UNIT_INTERVAL)


def random_net(rng, dims, kind, gamma=0.125, bias_scale=0.2, w_scale=1.0):
    spec = NetworkSpec.build(list(dims), ConstraintSet(kind).short_name, gamma)
    w = init_weights(spec, int(rng.integers(2**31)))
    w = Weights([w_scale * m for m in w.matrices],
                [rng.normal(0, bias_scale, size=b.shape) for b in w.biases])
    return spec, w


def energy_loops(spec, w, x, zs, y=None):
    """Energy summed coordinate by coordinate; ``y`` replaces the output."""
    g = spec.gamma
    L = spec.n_layers
    layers = [list(x)] + [list(z) for z in zs]
    if y is not None:
        layers[L] = list(y)
    total = 0.0
    for k in range(L):
        W, b = w.matrices[k], w.biases[k]
        for i in range(len(layers[k + 1])):
            s = b[i]
            for j in range(len(layers[k])):
                s += W[i][j] * layers[k][j]
            r = layers[k + 1][i] - s
            total += 0.5 * g**k * r * r
    return total


def quadratic_model(spec, w, x, y=None):
    """``E(v) = v^T H v / 2 - c^T v + e0`` over the stacked free variables
    (hidden layers, plus the output layer when ``y`` is None), assembled by
    polarisation of ``energy_loops``. Also returns box bounds and an
    unstacking function."""
    L = spec.n_layers
    d = spec.layer_dims
    free_layers = list(range(1, L)) + ([] if y is not None else [L])
    sizes = [d[k] for k in free_layers]
    n = sum(sizes)

    def unstack(v):
        zs, pos = [], 0
        for k in range(1, L + 1):
            if k in free_layers:
                zs.append(np.asarray(v[pos:pos + d[k]], dtype=float))
                pos += d[k]
            else:
                zs.append(np.asarray(y, dtype=float))
        return zs

    def E(v):
        return energy_loops(spec, w, x, unstack(v), y)

    e0 = E(np.zeros(n))
    eye = np.eye(n)
    ei = np.array([E(eye[i]) for i in range(n)])
    H = np.empty((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        if j < i:
            H[i, j] = H[j, i]
        elif i == j:
            H[i, i] = ei[i] + E(-eye[i]) - 2 * e0
        else:
            H[i, j] = E(eye[i] + eye[j]) - ei[i] - ei[j] + e0
    c = -(ei - e0 - 0.5 * np.diag(H))
    lo, hi = [], []
    for k, s in zip(free_layers, sizes):
        kind = spec.constraints[k - 1]
        lo += [-np.inf if kind is ConstraintSet.LINEAR else 0.0] * s
        hi += [1.0 if kind is ConstraintSet.UNIT_INTERVAL else np.inf] * s
    return H, c, e0, np.array(lo), np.array(hi), unstack


def pg_solve(H, c, lo, hi, iters=200000, tol=1e-15):
    """Accelerated projected gradient for the box-constrained quadratic."""
    step = 1.0 / np.linalg.eigvalsh(H)[-1]
    v = np.clip(np.zeros_like(c), lo, hi)
    u, t = v.copy(), 1.0
    for _ in range(iters):
        v_new = np.clip(u - step * (H @ u - c), lo, hi)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        u = v_new + (t - 1) / t_new * (v_new - v)
        if np.max(np.abs(v_new - v)) < tol:
            v = v_new
            break
        v, t = v_new, t_new
    return v


def oracle_minimiser(spec, w, x, y=None):
    H, c, e0, lo, hi, unstack = quadratic_model(spec, w, x, y)
    v = pg_solve(H, c, lo, hi)
    zs = unstack(v)
    return zs, energy_loops(spec, w, x, zs, y)


def grid_min_1d(f, lo, hi, levels=12, points=41):
    """Zooming grid search for the minimiser of a convex 1-D quadratic on
    ``[lo, hi]``. Rounding limits pure grid search to about sqrt(eps) in
    position, so an interior grid optimum is refined by the vertex of the
    parabola through three widely spaced points (exact for quadratics)."""
    a, b = lo, hi
    for _ in range(levels):
        xs = np.linspace(a, b, points)
        vals = [f(t) for t in xs]
        i = int(np.argmin(vals))
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, points - 1)]
    m = xs[i]
    if m in (lo, hi):
        return float(m)
    h = 0.25
    fm, f0, fp = f(m - h), f(m), f(m + h)
    vertex = m + 0.5 * h * (fm - fp) / (fm - 2 * f0 + fp)
    return float(min(max(vertex, lo), hi))
