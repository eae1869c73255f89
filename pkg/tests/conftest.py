import numpy as np
import pytest

from pmi_relax.poly import PolyMatrix, Polynomial
from pmi_relax.sdp.relax import clear_history


@pytest.fixture(autouse=True)
def _fresh_history():
    clear_history()
    yield


def var(n, i):
    return Polynomial.variable(n, i)


def const(n, c):
    return Polynomial.constant(n, c)


def random_polymatrix(rng, n, q, deg=1):
    """Symmetric q x q matrix with random polynomial entries of degree <= deg."""
    from pmi_relax.poly import monomials_up_to

    monos = monomials_up_to(n, deg)
    entries = {}
    for i in range(q):
        for j in range(i, q):
            entries[(i, j)] = Polynomial(n, {m: float(rng.standard_normal()) for m in monos})
    return PolyMatrix.from_upper(n, q, entries)


def grid_minimum(p, points_per_axis=401):
    """Objective minimum over feasible grid points of the problem box (n <= 2)."""
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in p.box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, p.n)
    ok = p.min_eigenvalues(pts) >= -1e-12
    return float(p.objective.evaluate_many(pts[ok]).min())
