import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sketchtensor.tensor import (
    CpTensor,
    contract_free,
    contract_Iuu,
    contract_pair,
    contract_uuu,
    densify,
    frobenius,
    inner,
    khatri_rao,
    kron,
    mode_unfold,
    rank_one_dense,
    refold,
    unvec,
    vec,
)
import oracles

shapes = st.lists(st.integers(1, 5), min_size=1, max_size=4).map(tuple)
finite = st.floats(-10, 10, allow_nan=False)


def test_vec_index_rule():
    t = np.arange(24.0).reshape(2, 3, 4)
    v = vec(t)
    for i1, i2, i3 in oracles.indices(t.shape):
        assert v[i1 + 2 * i2 + 6 * i3] == t[i1, i2, i3]


@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite)))
def test_vec_roundtrip_and_norm(t):
    assert np.array_equal(unvec(vec(t), t.shape), t)
    assert np.isclose(frobenius(t), np.linalg.norm(t.ravel()))


def test_unvec_size_mismatch():
    with pytest.raises(ValueError):
        unvec(np.ones(5), (2, 3))


def test_vec_outer_is_reversed_kron(rng):
    u, v = rng.standard_normal(3), rng.standard_normal(4)
    assert np.allclose(vec(np.multiply.outer(u, v)), np.kron(v, u))


def test_densify_examples():
    cp = CpTensor([1.0], ([[1.0], [2.0]], [[3.0], [4.0]]))
    assert np.array_equal(densify(cp), [[3, 4], [6, 8]])
    assert not densify(CpTensor([0.0], ([[1.0], [2.0]], [[3.0], [4.0]]))).any()
    u = np.array([[1.0, 1.0], [2.0, 2.0]])
    assert np.allclose(densify(CpTensor([1.0, -1.0], (u, u, u))), 0)


def test_densify_vs_loops(rng):
    factors = tuple(rng.standard_normal((n, 3)) for n in (2, 3, 4))
    w = rng.standard_normal(3)
    assert np.allclose(densify(CpTensor(w, factors)), oracles.densify(w, factors))


def test_densify_linear_in_weights(rng):
    factors = tuple(rng.standard_normal((n, 2)) for n in (3, 3))
    a, b = rng.standard_normal(2), rng.standard_normal(2)
    lhs = densify(CpTensor(2 * a - 3 * b, factors))
    rhs = 2 * densify(CpTensor(a, factors)) - 3 * densify(CpTensor(b, factors))
    assert np.allclose(lhs, rhs)


def test_cp_validation():
    with pytest.raises(ValueError):
        CpTensor([1.0, 2.0], (np.ones((3, 2)), np.ones((3, 1))))
    with pytest.raises(ValueError):
        CpTensor([1.0], ())


def test_cp_normalized(rng):
    cp = CpTensor(rng.standard_normal(2), tuple(rng.standard_normal((n, 2)) for n in (3, 4)))
    nc = cp.normalized()
    assert np.allclose([np.linalg.norm(f, axis=0) for f in nc.factors], 1)
    assert np.allclose(densify(nc), densify(cp))


def test_unfold_examples():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(mode_unfold(m, 0), m)
    t = unvec(np.arange(1.0, 9.0), (2, 2, 2))
    assert np.array_equal(mode_unfold(t, 2), [[1, 2, 3, 4], [5, 6, 7, 8]])


def test_unfold_column_rule():
    t = np.arange(60.0).reshape(3, 4, 5)
    m = mode_unfold(t, 1)
    for i, j, k in oracles.indices(t.shape):
        assert m[j, i + 3 * k] == t[i, j, k]


def test_unfold_mode_out_of_range():
    with pytest.raises(ValueError):
        mode_unfold(np.ones((2, 2)), 2)


@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite)), st.data())
def test_refold_roundtrip(t, data):
    mode = data.draw(st.integers(0, t.ndim - 1))
    assert np.array_equal(refold(mode_unfold(t, mode), mode, t.shape), t)


def test_unfold_khatri_rao_identity(rng):
    factors = [rng.standard_normal((n, 2)) for n in (3, 4, 5)]
    t = densify(CpTensor(np.ones(2), tuple(factors)))
    # T_(1) = U1 (U3 kr U2)^T with the first Khatri-Rao operand slowest
    assert np.allclose(mode_unfold(t, 0), factors[0] @ khatri_rao([factors[2], factors[1]]).T)


def test_inner_examples(rng):
    e = np.zeros((2, 3))
    e[1, 2] = 1
    assert inner(e, e) == 1
    t = rng.standard_normal((3, 4, 5))
    u, v = rng.standard_normal(4), rng.standard_normal(5)
    e0 = np.zeros(3)
    e0[1] = 1
    expected = sum(t[1, j, k] * u[j] * v[k] for j in range(4) for k in range(5))
    assert np.isclose(inner(t, rank_one_dense(e0, u, v)), expected)
    s = rng.standard_normal((3, 4, 5))
    assert inner(t, s) == inner(s, t)
    with pytest.raises(ValueError):
        inner(t, s[:2])


def test_contract_uuu(rng):
    u = rng.standard_normal(4)
    u /= np.linalg.norm(u)
    assert np.isclose(contract_uuu(rank_one_dense(u, u, u), u), 1)
    t = rng.standard_normal((4, 4, 4))
    w = rng.standard_normal(4)
    assert abs(contract_uuu(t, w) - oracles.contract_all(t, w, w, w)) < 1e-12
    assert contract_uuu(t, np.zeros(4)) == 0
    assert np.isclose(contract_uuu(t, w), inner(t, rank_one_dense(w, w, w)))
    with pytest.raises(ValueError):
        contract_uuu(t, np.ones(3))


def test_contract_Iuu(rng):
    u = rng.standard_normal(5)
    u /= np.linalg.norm(u)
    assert np.allclose(contract_Iuu(2.5 * rank_one_dense(u, u, u), u), 2.5 * u)
    t = rng.standard_normal((5, 5, 5))
    assert np.allclose(contract_Iuu(t, u), oracles.contract_free(t, u, u, u, 0))
    assert not contract_Iuu(np.zeros((5, 5, 5)), u).any()


@pytest.mark.parametrize("free", [0, 1, 2])
def test_contract_free_vs_loops(rng, free):
    t = rng.standard_normal((3, 4, 5))
    vs = [rng.standard_normal(n) for n in (3, 4, 5)]
    assert np.allclose(contract_free(t, vs, free), oracles.contract_free(t, *vs, free))


def test_kron_examples(rng):
    b = rng.standard_normal((2, 3))
    assert np.allclose(kron([[2.0]], b), 2 * b)
    a, b = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    assert np.allclose(kron(a, b), oracles.kron(a, b))
    assert np.array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))


def test_contract_pair(rng):
    a, b = rng.standard_normal((2, 2, 3)), rng.standard_normal((3, 2, 2))
    assert np.allclose(contract_pair(a, b, 2, 0), oracles.contract_pair_31(a, b))
    a1, b1 = rng.standard_normal((2, 3, 1)), rng.standard_normal((1, 4, 2))
    assert np.allclose(contract_pair(a1, b1, 2, 0), np.multiply.outer(a1[:, :, 0], b1[0]))
    assert not contract_pair(a, np.zeros((3, 2, 2)), 2, 0).any()
    with pytest.raises(ValueError):
        contract_pair(a, b[:2], 2, 0)
