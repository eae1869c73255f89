from math import comb

import numpy as np
import pytest

from pmi_relax import RelaxOptions, bench, relax
from pmi_relax.model import PmiProblem
from pmi_relax.poly import PolyMatrix
from pmi_relax.sdp import SolverStatus, solve_ipm
from pmi_relax.sos import build_sos, build_sos_tilde1, sos_spec, sos_tilde_spec

from conftest import const, var


def test_plain_sos_of_square():
    x = var(1, 0)
    p = PmiProblem.from_matrices(x * x, [PolyMatrix.scalar(const(1, 1.0))])
    res = solve_ipm(build_sos(p, 1))
    assert res.status is SolverStatus.OPTIMAL and abs(res.r[0]) < 1e-7


def test_gram_sizes():
    p = bench.gen_corrmat(3)
    spec = sos_spec(p, 2)
    assert spec.sizes == [comb(3 + 2, 3), 3 * comb(3 + 1, 3)]
    spec3 = sos_spec(p, 3)
    assert spec3.sizes == [comb(6, 3), 3 * comb(5, 3)]
    assert sos_tilde_spec(p).sizes == [4, 3 * 4]


def test_order_too_small():
    x = var(1, 0)
    p = PmiProblem.from_matrices(x, [PolyMatrix.scalar(1 - x ** 4)])
    with pytest.raises(ValueError, match="order too small"):
        sos_spec(p, 1)


def test_corrmat_orders():
    p = bench.gen_corrmat(3)
    assert solve_ipm(build_sos(p, 1)).status is SolverStatus.INFEASIBLE
    assert abs(solve_ipm(build_sos(p, 2)).r[0] + 3) <= 1e-3
    assert abs(solve_ipm(build_sos_tilde1(p)).r[0] + 3) <= 1e-3


def test_sos_tilde_q5():
    res = solve_ipm(build_sos_tilde1(bench.gen_corrmat(5)))
    assert abs(res.r[0] + 10) <= 2e-3


def test_identity_on_fresh_points():
    p = bench.gen_corrmat(3)
    out = relax(p, 2, "sos")
    assert out.verified
    cone = out.cone
    mats = out.certificate.matrices(cone.keys())
    pts = np.random.default_rng(11).uniform(-1, 1, (50, 3))
    f = p.objective.evaluate_many(pts)
    rhs = cone.evaluate_element(mats, pts) + out.bound
    assert np.max(np.abs(f - rhs) / (1 + np.abs(f))) <= 1e-6


def test_per_block_variant():
    p = bench.gen_example1(3)
    a = relax(p, 2, "sos")
    b = relax(p, 2, "sos", opts=RelaxOptions(sos_per_block=True))
    assert abs(a.bound - b.bound) <= 1e-6
