import pytest

from pmi_relax import bench
from pmi_relax.model import PmiProblem
from pmi_relax.poly import PolyMatrix, Polynomial
from pmi_relax.sparsity import SparsityError, SparsityPattern, check_rip, extract_cliques, validated_pattern

from conftest import var


def _pattern(*cliques):
    cl = tuple(frozenset(c) for c in cliques)
    return SparsityPattern(cl, tuple(range(len(cl))), tuple(Polynomial.zero(5) for _ in cl))


def _rip_holds(cliques, order):
    seen = set()
    for pos, i in enumerate(order):
        inter = cliques[i] & seen
        if pos and not any(inter <= cliques[order[k]] for k in range(pos)):
            return False
        seen |= cliques[i]
    return True


def test_chain_three():
    p = bench.gen_chain(3)
    pat = extract_cliques(p)
    assert pat.cliques == (frozenset({0, 1}), frozenset({1, 2}))
    x2 = var(3, 1)
    assert pat.objective_split[0].coefficient((0, 2, 0)) == 1.0
    assert pat.objective_split[1].coefficient((0, 2, 0)) == 0.0
    total = sum(pat.objective_split, Polynomial.zero(3))
    assert (total - p.objective).is_zero()
    assert (x2 - 1) ** 2 != p.objective


def test_single_block_single_clique():
    p = bench.gen_corrmat(3)
    pat = extract_cliques(p)
    assert pat.cliques == (frozenset({0, 1, 2}),)


def test_rip_chain():
    assert check_rip(_pattern({0, 1}, {1, 2}, {2, 3})).ordering == (0, 1, 2)


def test_rip_reorder():
    res = check_rip(_pattern({0, 1}, {2, 3}, {0, 2}))
    assert res.ok and res.ordering != (0, 1, 2)
    assert _rip_holds([frozenset({0, 1}), frozenset({2, 3}), frozenset({0, 2})], res.ordering)


def test_rip_failure_witness():
    # a 4-cycle has no ordering with the property
    res = check_rip(_pattern({0, 1}, {1, 2}, {2, 3}, {3, 0}))
    assert not res.ok
    assert res.violating_clique == 3 and res.intersection == frozenset({0, 3})


def test_chain_ten_natural_order():
    pat = validated_pattern(bench.gen_chain(10))
    assert pat.ordering == tuple(range(9))


def test_uncovered_objective_term():
    x, y = var(2, 0), var(2, 1)
    p = PmiProblem.from_matrices(x * y, [PolyMatrix.scalar(1 - x), PolyMatrix.scalar(1 - y)])
    with pytest.raises(SparsityError, match="not covered"):
        extract_cliques(p)


def test_deterministic():
    p = bench.gen_random(6, 2, seed=3, sparsity=3)
    assert extract_cliques(p) == extract_cliques(p)
