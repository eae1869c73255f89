from math import comb

import numpy as np
import pytest

from pmi_relax import bench
from pmi_relax.cone import build_dense, build_scalar_mixed
from pmi_relax.model import PmiProblem
from pmi_relax.poly import PolyMatrix, monomial_values, monomials_up_to
from pmi_relax.sdp import SolverStatus, assemble_by_coeffs, assemble_by_points, plan_samples, solve_ipm

from conftest import const, var


def test_plan_univariate():
    plan = plan_samples(1, 2, seed=0)
    assert plan.count == 3
    V = monomial_values(plan.points, monomials_up_to(1, 2))
    assert abs(np.linalg.det(V)) > 1e-8


def test_plan_count():
    assert plan_samples(3, 4).count == 35
    assert plan_samples(3, 4, oversample_factor=1.5).count == 53


def test_plan_conditioning_n2_d6():
    plan = plan_samples(2, 6, seed=0)
    V = monomial_values(plan.points, monomials_up_to(2, 6))
    V = V / np.linalg.norm(V, axis=0)
    s = np.linalg.svd(V, compute_uv=False)
    assert np.sum(s > 1e-12 * s[0]) == 28
    assert s[-1] > 1e-8


def test_plan_deterministic_and_boxed():
    a = plan_samples(2, 3, box=[(0, 1), (2, 5)], seed=9)
    b = plan_samples(2, 3, box=[(0, 1), (2, 5)], seed=9)
    assert np.array_equal(a.points, b.points)
    assert (a.points[:, 0] >= 0).all() and (a.points[:, 1] >= 2).all()
    assert not np.array_equal(a.points, plan_samples(2, 3, seed=10).points)


def test_plan_rejects_bad_input():
    with pytest.raises(ValueError):
        plan_samples(2, 0)
    with pytest.raises(ValueError):
        plan_samples(2, 2, oversample_factor=0.5)
    with pytest.raises(ValueError):
        plan_samples(2, 2, box=[(1, 0), (0, 1)])


def _lambda0_only(c, n=1):
    # a one-letter problem whose letter is the constant 0: every word slot vanishes
    return PmiProblem.from_matrices(const(n, c), [PolyMatrix.scalar(const(n, 0.0))])


def test_constant_objective_points():
    cone = build_dense(_lambda0_only(2.5), 1)
    sdp = assemble_by_points(cone, const(1, 2.5), plan_samples(1, 1))
    res = solve_ipm(sdp)
    assert res.status is SolverStatus.OPTIMAL
    assert abs(res.r[0] - 2.5) < 1e-7
    assert abs(res.X[0][0, 0]) < 1e-7


def test_zero_objective_coeffs():
    cone = build_dense(_lambda0_only(0.0), 1)
    res = solve_ipm(assemble_by_coeffs(cone, const(1, 0.0)))
    assert abs(res.r[0]) < 1e-9


def test_scalar_handelman_term():
    x = var(1, 0)
    p = PmiProblem.from_matrices(x, [PolyMatrix.scalar(x)])
    cone = build_dense(p, 1)
    res = solve_ipm(assemble_by_coeffs(cone, x))
    assert res.status is SolverStatus.OPTIMAL
    assert abs(res.r[0]) < 1e-7
    assert abs(res.X[1][0, 0] - 1.0) < 1e-7


def test_example1_m2_points():
    p = bench.gen_example1(1)
    cone = build_scalar_mixed(p, 2)
    sdp = assemble_by_points(cone, p.objective, plan_samples(3, 2))
    assert sdp.n_constraints == comb(5, 3) == 10
    res = solve_ipm(sdp)
    assert abs(res.r[0] - 1.5) <= 2e-3


def test_example1_f3_coeffs_matches_points():
    p = bench.gen_example1(3)
    cone = build_scalar_mixed(p, 2)
    rc = solve_ipm(assemble_by_coeffs(cone, p.objective)).r[0]
    rp = solve_ipm(assemble_by_points(cone, p.objective, plan_samples(3, 2))).r[0]
    assert abs(rc - 2.0) <= 1e-4 and abs(rc - rp) <= 1e-6


def test_degree_guard():
    p = bench.gen_example1(1)
    cone = build_scalar_mixed(p, 3)
    with pytest.raises(ValueError, match="degree bound too small"):
        assemble_by_points(cone, p.objective, plan_samples(3, 2))


def test_coefficient_guard():
    p = bench.gen_corrmat(7)
    cone = build_dense(p, 4)
    with pytest.raises(ValueError, match="guard"):
        assemble_by_coeffs(cone, p.objective)
