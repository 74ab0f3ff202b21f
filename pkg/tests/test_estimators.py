import numpy as np
import pytest

from sketchtensor.estimators import (
    EstimatorConfig,
    PrecomputedFcs,
    est_inner,
    est_Iuu,
    est_Iuv_generic,
    est_uuu,
    est_uvw,
    inner_estimates,
    make_backend,
    median_reduce,
    precompute,
)
from sketchtensor.hashing import HashFamily, HashPair, make_families
from sketchtensor.tensor import CpTensor, contract_free, contract_Iuu, contract_uuu, inner, rank_one_dense
import oracles


def _injective_family(shape, rng, equal_lens=False):
    """Signed hashes whose composed bucket is the column-major flat index."""
    total = int(np.prod(shape))
    pairs, stride = [], 1
    for n in shape:
        j = total if equal_lens else stride * (n - 1) + 1
        pairs.append(HashPair.from_maps(stride * np.arange(n), rng.choice([-1, 1], n), j))
        stride *= n
    return HashFamily(tuple(pairs))


def test_median_reduce_examples():
    assert median_reduce([1.0, 2.0, 100.0]) == 2.0
    assert median_reduce([1.0, 2.0, 3.0, 10.0]) == 2.5
    assert np.array_equal(median_reduce([[1.0, 5.0], [3.0, 1.0], [2.0, 2.0]]), [2.0, 2.0])
    with pytest.raises(ValueError):
        median_reduce([])


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(hash_len=0)
    with pytest.raises(ValueError):
        EstimatorConfig(sketch_count=0)
    with pytest.raises(ValueError):
        EstimatorConfig(reduction="mean")


def test_inner_exact_under_injective_hashes(rng):
    a, b = rng.standard_normal((3, 4, 5)), rng.standard_normal((3, 4, 5))
    fam = _injective_family(a.shape, rng)
    assert np.isclose(inner_estimates(a, b, [fam])[0], inner(a, b))
    fam_ts = _injective_family(a.shape, rng, equal_lens=True)
    assert np.isclose(inner_estimates(a, b, [fam_ts], "TS")[0], inner(a, b))


def test_inner_shape_mismatch(rng):
    with pytest.raises(ValueError):
        inner_estimates(np.ones((2, 3)), np.ones((3, 2)), make_families((2, 3), 2, 0, 1))


def test_contractions_exact_under_injective_hashes(rng):
    t = rng.standard_normal((4, 5, 6))
    u, v, w = (rng.standard_normal(n) for n in t.shape)
    pre = [PrecomputedFcs.build(t, _injective_family(t.shape, rng))]
    assert np.isclose(float(est_uvw(pre, u, v, w)), oracles.contract_all(t, u, v, w))
    vs = [u, v, w]
    for free in range(3):
        others = [vs[m] for m in range(3) if m != free]
        got = est_Iuv_generic(pre, others[0], others[1], free)
        assert np.allclose(got, oracles.contract_free(t, u, v, w, free))


def test_Iuu_matches_inner_with_basis_tensors_exhaustively(rng):
    t = rng.standard_normal((4, 4, 4))
    u = rng.standard_normal(4)
    cfg = EstimatorConfig(hash_len=3, sketch_count=1, seed=17)
    got = est_Iuu(precompute(t, cfg), u)
    for i in range(4):
        e = np.zeros(4)
        e[i] = 1.0
        assert np.isclose(got[i], est_inner(t, rank_one_dense(e, u, u), cfg), atol=1e-10)
    assert np.isclose(est_uuu(precompute(t, cfg), u), est_inner(t, rank_one_dense(u, u, u), cfg))


def test_precompute_accepts_cp(rng):
    cp = CpTensor(rng.standard_normal(2), tuple(rng.standard_normal((5, 2)) for _ in range(3)))
    cfg = EstimatorConfig(hash_len=4, sketch_count=3, seed=1)
    from sketchtensor.tensor import densify

    a, b = precompute(cp, cfg), precompute(densify(cp), cfg)
    u = rng.standard_normal(5)
    assert np.allclose(est_Iuu(a, u), est_Iuu(b, u))


def test_bad_free_mode_and_lengths(rng):
    pre = precompute(rng.standard_normal((3, 4, 5)), EstimatorConfig(hash_len=2))
    with pytest.raises(ValueError):
        est_Iuv_generic(pre, np.ones(4), np.ones(5), 3)
    with pytest.raises(ValueError):
        est_Iuv_generic(pre, np.ones(3), np.ones(5), 0)
    with pytest.raises(ValueError):
        PrecomputedFcs.from_values(np.ones(3), pre[0].family)


def test_Iuu_is_consistent(rng):
    t = rng.standard_normal((6, 6, 6))
    u = rng.standard_normal(6)
    cfg = EstimatorConfig(hash_len=40, sketch_count=31, seed=3)
    est = est_Iuu(precompute(t, cfg), u)
    exact = contract_Iuu(t, u)
    assert np.linalg.norm(est - exact) < 0.35 * np.linalg.norm(t) * u @ u


@pytest.mark.parametrize("kind", ["FCS", "TS", "HCS"])
def test_backends_exact_under_injective_hashes(rng, kind):
    t = rng.standard_normal((3, 4, 5))
    fam = _injective_family(t.shape, rng, equal_lens=(kind == "TS"))
    if kind == "HCS":
        fam = HashFamily(tuple(HashPair.from_maps(np.arange(n), rng.choice([-1, 1], n), n) for n in t.shape))
    backend = make_backend("plain", t)
    table = {k: type(make_backend(k, t, EstimatorConfig(hash_len=2))) for k in ("FCS", "TS", "HCS")}
    sk = table[kind](t, [fam])
    mats = [rng.standard_normal((n, 2)) for n in t.shape]
    for free in range(3):
        assert np.allclose(sk.contract_free(mats, free), backend.contract_free(mats, free))
    assert np.allclose(sk.contract_all(*mats), backend.contract_all(*mats))
    u, v, w = (m[:, 0] for m in mats)
    sk.deflate(0.7, u, v, w)
    backend.deflate(0.7, u, v, w)
    assert np.allclose(sk.contract_all(*mats), backend.contract_all(*mats))
    cp = CpTensor(np.array([0.5]), (u[:, None], v[:, None], w[:, None]))
    assert np.isclose(sk.sketch_fit(cp), backend.sketch_fit(cp))


def test_plain_backend_matches_tensor_ops(rng):
    t = rng.standard_normal((4, 4, 4))
    u = rng.standard_normal(4)
    b = make_backend("plain", t)
    assert np.allclose(b.contract_free([u, u, u], 0)[:, 0], contract_Iuu(t, u))
    assert np.isclose(b.contract_all(u, u, u)[0], contract_uuu(t, u))
    assert np.allclose(b.contract_free([u, u, u], 2)[:, 0], contract_free(t, [u, u, u], 2))
    assert b.hash_memory == 0


def test_cs_backend_memory_and_accuracy(rng):
    t = rng.standard_normal((5, 5, 5))
    cfg = EstimatorConfig(hash_len=40, sketch_count=5, seed=2)
    cs = make_backend("CS", t, cfg)
    fcs = make_backend("FCS", t, cfg)
    # one 125-entry pair per copy vs three 5-entry pairs
    assert cs.hash_memory > 5 * fcs.hash_memory
    u = rng.standard_normal((5, 1))
    exact = make_backend("plain", t).contract_all(u, u, u)
    assert abs(cs.contract_all(u, u, u)[0] - exact[0]) < np.linalg.norm(t) * 5


def test_backend_errors(rng):
    with pytest.raises(ValueError):
        make_backend("FCS", rng.standard_normal((3, 3, 3)))
    with pytest.raises(ValueError):
        make_backend("XYZ", rng.standard_normal((3, 3, 3)), EstimatorConfig())
    with pytest.raises(ValueError):
        make_backend("FCS", rng.standard_normal((3, 3)), EstimatorConfig())


def test_inner_unbiased_small(rng):
    a, b = rng.standard_normal((3, 3, 3)), rng.standard_normal((3, 3, 3))
    est = inner_estimates(a, b, make_families(a.shape, 4, 99, 4000))
    se = est.std(ddof=1) / np.sqrt(est.size)
    assert abs(est.mean() - inner(a, b)) < 4 * se


def test_zero_vector_gives_zero(rng):
    t = rng.standard_normal((4, 5, 6))
    pre = precompute(t, EstimatorConfig(hash_len=5, sketch_count=2))
    assert not est_Iuv_generic(pre, rng.standard_normal(5), np.zeros(6), 0).any()
    assert est_uuu(precompute(rng.standard_normal((4, 4, 4)), EstimatorConfig(hash_len=3)), np.zeros(4)) == 0
