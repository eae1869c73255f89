import numpy as np
import pytest

from pmi_relax import bench
from pmi_relax.cone import (ConeForm, ConeSizeError, build_block, build_cone, build_dense, build_scalar_mixed,
                            build_sparse, enumerate_words)
from pmi_relax.model import PmiProblem, sample_feasible
from pmi_relax.poly import PolyMatrix
from pmi_relax.sparsity import validated_pattern

from conftest import const, random_polymatrix, var


def _linear(q=2, n=2, t=1, seed=0):
    rng = np.random.default_rng(seed)
    mats = [random_polymatrix(rng, n, q) + PolyMatrix.identity(n, q) * 3.0 for _ in range(t)]
    return PmiProblem.from_matrices(var(n, 0), mats)


def _nonlinear(q=2):
    x, y = var(2, 0), var(2, 1)
    G = PolyMatrix.from_rows([[x * y, x], [x, 0.5 - y * y]])
    return PmiProblem.from_matrices(x, [G] if q == 2 else [G, G])


def test_dense_sizes():
    assert build_dense(_linear(), 3).sizes == [1, 2, 4, 8]
    assert build_dense(_nonlinear(), 2).sizes == [1, 4, 16]


def test_dense_cap():
    with pytest.raises(ConeSizeError, match="use block/sparse form or lower m"):
        build_dense(_linear(q=4), 5, max_block_size=512)


def test_block_word_count():
    p = _linear(t=2)
    cone = build_block(p, 3)
    assert len(cone.slots) - 1 == 2 + 4 + 8
    X1X2X1 = next(s for s in cone.slots if s.word == (0, 1, 0))
    assert X1X2X1.size == 8 and X1X2X1.key == "G1G2G1"


def test_block_commutative_counts():
    p = _linear(t=2)
    cone = build_block(p, 3, commutative=True)
    assert len(cone.slots) - 1 == 2 + 3 + 4


def test_word_order():
    words = [w.letters for w in enumerate_words(2, 2)]
    assert words == [(0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)]


def test_nonlinear_letters_alternate():
    cone = build_block(_nonlinear(q=4), 1)
    assert cone.letter_names == ("G1", "I-G1", "G2", "I-G2")


def test_mixed_census():
    cone = build_scalar_mixed(bench.gen_example1(1), 2)
    assert [s.key for s in cone.slots[1:]] == ["gamma=1,0", "gamma=0,1", "gamma=2,0", "gamma=1,1", "gamma=0,2"]
    assert cone.sizes[1:] == [1, 2, 1, 2, 4]


def test_sparse_chain():
    p = bench.gen_chain(3)
    cone = build_sparse(p, validated_pattern(p), 4)
    assert cone.sizes == [1] + [2, 4, 8, 16] * 2


def test_sparse_single_clique_matches_dense():
    p = _linear()
    sp = build_cone(p, 3, "sparse")
    de = build_dense(p, 3)
    assert sp.sizes == de.sizes
    pts = np.random.default_rng(0).uniform(-1, 1, (5, 2))
    for a, b in zip(sp.slots, de.slots):
        assert np.allclose(a.evaluate(pts), b.evaluate(pts))


def test_block_t1_is_dense():
    p = _linear()
    b, d = build_block(p, 3), build_dense(p, 3)
    assert b.sizes == d.sizes
    assert all(x.generator == y.generator for x, y in zip(b.slots, d.slots))


def test_nesting():
    p = _linear(t=2)
    for form in ("dense", "block"):
        lo, hi = build_cone(p, 2, form), build_cone(p, 3, form)
        assert set(lo.keys()) <= set(hi.keys())


def test_generator_dimensions_match_sizes():
    p = _nonlinear(q=4)
    for cone in (build_dense(p, 2), build_block(p, 2)):
        for s in cone.slots[1:]:
            assert s.generator.q == s.size


def test_membership_soundness():
    p = bench.gen_example1(1)
    cone = build_scalar_mixed(p, 3)
    rng = np.random.default_rng(7)
    mats = []
    for s in cone.slots:
        R = rng.standard_normal((s.size, s.size))
        mats.append(R @ R.T)
    pts = sample_feasible(p, 300, seed=2)
    assert (cone.evaluate_element(mats, pts) >= -1e-12).all()


def test_evaluate_matches_symbolic():
    p = _nonlinear()
    cone = build_dense(p, 2)
    rng = np.random.default_rng(1)
    mats = [np.eye(s.size) * rng.uniform(0.1, 1) for s in cone.slots]
    pts = rng.uniform(-1, 1, (6, 2))
    assert np.allclose(cone.evaluate_element(mats, pts), cone.expand_element(mats).evaluate_many(pts))


def test_hash_depends_on_data():
    a = build_dense(_linear(seed=0), 2).content_hash
    b = build_dense(_linear(seed=1), 2).content_hash
    assert a != b and a == build_dense(_linear(seed=0), 2).content_hash


def test_form_enum():
    assert ConeForm("mixed") is ConeForm.MIXED
    with pytest.raises(ValueError):
        build_cone(_linear(), 1, "nope")
    x = var(1, 0)
    scalar_only = PmiProblem.from_matrices(x, [PolyMatrix.scalar(1 - x), PolyMatrix.scalar(1 + x)])
    with pytest.raises(ValueError, match="exactly one matrix block"):
        build_scalar_mixed(scalar_only, 2)
    with pytest.raises(ValueError):
        build_dense(PmiProblem.from_matrices(const(1, 0), [PolyMatrix.scalar(const(1, 1))]), 0)
