import importlib

import numpy as np
import pytest

from liftnet import _backend, _pykernels
from liftnet.inference import solve

from .oracles import KINDS, random_net

try:
    from liftnet import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernel not built")


def _random_layer(rng, B=6, nk=5, nn=4):
    WT = np.ascontiguousarray(rng.normal(size=(nk, nn)))
    z = np.ascontiguousarray(np.abs(rng.normal(size=(B, nk))))
    a = rng.normal(size=(B, nk))
    zn = rng.normal(size=(B, nn))
    an = rng.normal(size=(B, nn))
    return WT, z, a, zn, an, np.ascontiguousarray((WT * WT).sum(axis=1))


@needs_ext
@pytest.mark.parametrize("kind", [0, 1, 2])
def test_layer_pass_backends_agree(kind):
    rng = np.random.default_rng(kind)
    WT, z, a, zn, an, cs = _random_layer(rng)
    z1, an1 = z.copy(), an.copy()
    z2, an2 = z.copy(), an.copy()
    m1 = _pykernels.layer_pass(WT, z1, a, zn, an1, kind, 0.3, cs)
    m2 = _ckernels.layer_pass(WT, z2, a, zn, an2, kind, 0.3, cs)
    np.testing.assert_allclose(z1, z2, atol=1e-13)
    np.testing.assert_allclose(an1, an2, atol=1e-13)
    assert m1 == pytest.approx(m2, abs=1e-13)


@needs_ext
@pytest.mark.parametrize("kind", KINDS)
def test_solver_backends_agree(kind):
    rng = np.random.default_rng(30)
    spec, w = random_net(rng, (6, 7, 5, 3), kind)
    X, Y = rng.normal(size=(9, 6)), rng.normal(size=(9, 3))
    for target in (None, Y):
        a, ia = solve(spec, w, X, target, 15, backend="python")
        b, ib = solve(spec, w, X, target, 15, backend="cython")
        for u, v in zip(a.z + a.a, b.z + b.a):
            np.testing.assert_allclose(u, v, atol=1e-12)
        assert ia.sweeps == ib.sweeps


@needs_ext
def test_kernel_shape_check():
    rng = np.random.default_rng(0)
    WT, z, a, zn, an, cs = _random_layer(rng)
    with pytest.raises(ValueError):
        _ckernels.layer_pass(WT, z[:, :3].copy(), a[:, :3].copy(), zn, an, 1, 0.1, cs)


def test_env_var_forces_fallback(monkeypatch):
    monkeypatch.setenv("LIFTNET_PURE_PYTHON", "1")
    mod = importlib.reload(_backend)
    try:
        assert mod.BACKEND == "python" and mod.kernels is _pykernels
    finally:
        monkeypatch.delenv("LIFTNET_PURE_PYTHON")
        importlib.reload(_backend)
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")
