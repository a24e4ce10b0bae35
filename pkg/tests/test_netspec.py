import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from liftnet.netspec import (ConstraintSet, NetworkSpec, Weights, forward_pass, init_weights,
                             project)

finite = st.floats(-1e6, 1e6, allow_nan=False)
vectors = arrays(float, st.integers(1, 12), elements=finite)


def test_project_examples():
    assert np.array_equal(project(ConstraintSet.NONNEGATIVE, [-1, 2]), [0, 2])
    assert np.array_equal(project(ConstraintSet.LINEAR, [-1, 2]), [-1, 2])
    assert np.array_equal(project(ConstraintSet.UNIT_INTERVAL, [-0.5, 0.3, 1.7]), [0, 0.3, 1])


@pytest.mark.parametrize("c", list(ConstraintSet))
@given(v=vectors)
def test_projection_idempotent_and_fixes_members(c, v):
    p = project(c, v)
    assert np.array_equal(project(c, p), p)
    assert c.contains(p)


@pytest.mark.parametrize("c", list(ConstraintSet))
@given(data=st.data())
def test_projection_nonexpansive(c, data):
    n = data.draw(st.integers(1, 10))
    u = data.draw(arrays(float, n, elements=finite))
    v = data.draw(arrays(float, n, elements=finite))
    assert np.linalg.norm(project(c, u) - project(c, v)) <= np.linalg.norm(u - v) * (1 + 1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec((3,), ())
    with pytest.raises(ValueError):
        NetworkSpec((3, 0, 2), (ConstraintSet.NONNEGATIVE, ConstraintSet.LINEAR))
    with pytest.raises(ValueError, match="output"):
        NetworkSpec((3, 2), (ConstraintSet.NONNEGATIVE,))
    with pytest.raises(ValueError):
        NetworkSpec((3, 2), (ConstraintSet.LINEAR,), gamma=0.0)
    spec = NetworkSpec.build("784-64-64-10", "hardsig", 0.125)
    assert spec.constraints == (ConstraintSet.UNIT_INTERVAL,) * 2 + (ConstraintSet.LINEAR,)
    assert spec.n_layers == 3


def test_init_weights_deterministic_and_zero_bias():
    spec = NetworkSpec.build("4-3-2", "relu")
    a, b = init_weights(spec, 7), init_weights(spec, 7)
    for m1, m2 in zip(a.matrices, b.matrices):
        assert np.array_equal(m1, m2)
    assert all(np.all(v == 0) for v in a.biases)
    a.check(spec)
    assert not np.array_equal(init_weights(spec, 8).matrices[0], a.matrices[0])


def test_init_weights_distribution():
    spec = NetworkSpec.build("4-3-2", "relu")
    W0 = init_weights(spec, 7).matrices[0]
    sigma = 1 / np.sqrt(4)
    assert abs(W0.mean()) <= 4 * sigma / np.sqrt(12)
    big = init_weights(NetworkSpec.build("400-300-2", "relu"), 7).matrices[0]
    assert big.std() == pytest.approx(1 / np.sqrt(400), rel=0.01)


def test_weights_check_rejects_bad_shapes():
    spec = NetworkSpec.build("4-3-2", "relu")
    w = init_weights(spec, 0)
    bad = Weights([w.matrices[0].T, w.matrices[1]], w.biases)
    with pytest.raises(ValueError, match="layer 0"):
        bad.check(spec)
    w.matrices[1][0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        w.check(spec)


def test_forward_examples():
    spec = NetworkSpec.build("3-4-2", "relu")
    zero = Weights([np.zeros((4, 3)), np.zeros((2, 4))], [np.zeros(4), np.zeros(2)])
    st_ = forward_pass(spec, zero, [1.0, -2.0, 3.0])
    assert all(np.all(v == 0) for v in st_.z)

    chain = NetworkSpec.build("1-1-1", "linear")
    w = Weights([[[2.0]], [[3.0]]], [[0.0], [0.0]])
    st_ = forward_pass(chain, w, [1.0])
    assert st_.z[0][0] == 2.0 and st_.z[1][0] == 6.0


def test_forward_relu_clamps_and_propagates():
    # hand evaluation: a1 = (1*1 - 1*2, 1*1 + 1*2) = (-1, 3) -> z1 = (0, 3); a2 = 2*0 + 1*3 = 3
    spec = NetworkSpec.build("2-2-1", "relu")
    w = Weights([[[1.0, -1.0], [1.0, 1.0]], [[2.0, 1.0]]], [[0.0, 0.0], [0.0]])
    st_ = forward_pass(spec, w, [1.0, 2.0])
    assert np.array_equal(st_.a[0], [-1.0, 3.0])
    assert np.array_equal(st_.z[0], [0.0, 3.0])
    assert st_.z[1][0] == 3.0


def test_forward_consistency_and_linear_chain(rng):
    for kind in ConstraintSet:
        spec = NetworkSpec.build([5, 4, 6, 3], kind.short_name)
        w = init_weights(spec, 3)
        w.biases = [rng.normal(size=b.shape) for b in w.biases]
        x = rng.normal(size=(7, 5))
        st_ = forward_pass(spec, w, x)
        for k in range(3):
            assert np.array_equal(st_.z[k], project(spec.constraints[k], st_.a[k]))
        if kind is ConstraintSet.LINEAR:
            ref = x
            for m, b in zip(w.matrices, w.biases):
                ref = ref @ m.T + b
            np.testing.assert_allclose(st_.output, ref, rtol=1e-13, atol=1e-13)


def test_forward_dimension_mismatch():
    spec = NetworkSpec.build("3-2", "linear")
    with pytest.raises(ValueError):
        forward_pass(spec, init_weights(spec, 0), [1.0, 2.0])
