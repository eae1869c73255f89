"""Benchmark problem families with reference optima, and random instances."""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .model import PmiProblem, _rng
from .poly import PolyMatrix, Polynomial, block_diag, monomials_up_to


@dataclass(frozen=True)
class ReferenceOptimum:
    value: float
    minimizers: tuple[tuple[float, ...], ...] = ()
    provenance: str = "closed-form"  # closed-form | scalar-solve | grid


def _vars(n: int) -> list[Polynomial]:
    return [Polynomial.variable(n, i) for i in range(n)]


# ---------------------------------------------------------------- spectrahedron with four objectives

EXAMPLE1_MINIMIZERS = {1: (0.5, 0.0, 0.5), 2: (2.0, 0.0, 1.0), 3: (0.0, 0.0, 0.0), 4: (1.0, 0.0, 1.0)}


def example1_objective(which: int) -> Polynomial:
    x1, x2, x3 = _vars(3)
    if which == 1:
        return (x1 + 0.5) ** 2 + x2 ** 2 + (x3 - 1.5) ** 2
    if which == 2:
        return (x1 - 2) ** 2 + x2 ** 2 + (x3 - 1 - sqrt(2.0)) ** 2
    if which == 3:
        return (x1 + 1) ** 2 + x2 ** 2 + (x3 - 1) ** 2
    if which == 4:
        return x1 ** 2 + x2 ** 2 + (x3 - 2) ** 2
    raise ValueError("which must be 1, 2, 3 or 4")


def gen_example1(which: int = 1) -> PmiProblem:
    """Cone over a disk: a 2x2 linear block plus the scalar cut ``1 - x3``."""
    f = example1_objective(which)
    x1, x2, x3 = _vars(3)
    G = PolyMatrix.from_rows([[x3 + x2, 2 * x3 - x1], [2 * x3 - x1, x3 - x2]])
    g = PolyMatrix.scalar(1 - x3)
    return PmiProblem.from_matrices(f, [g, G], box=((-1.0, 3.0), (-1.0, 1.0), (0.0, 1.0)),
                                    known_optimum=2.0, name=f"example1-f{which}")


def example1_reference(which: int) -> ReferenceOptimum:
    return ReferenceOptimum(2.0, (EXAMPLE1_MINIMIZERS[which],))


# ---------------------------------------------------------------- nonlinear 2x2 PMI

def gen_example2(variant: str = "original") -> PmiProblem:
    """Quadratic 2x2 block, scaled by 8/9 so that ``I - G`` is PSD on K."""
    x1, x2 = _vars(2)
    H = PolyMatrix.from_rows([[x2 - x1 / 2, x1 * x2], [x1 * x2, 2 * x1 - x2]])
    G = H * (8.0 / 9.0)
    if variant == "original":
        f = x1 ** 2 * (x1 - 1) ** 2 + x2 ** 2 * (x2 - 1) ** 2 + (x1 - x2) ** 2
    elif variant == "rescaled":
        f = x1 ** 2 * (2 * x1 - 1) ** 2 + x2 ** 2 * (2 * x2 - 1) ** 2 + (x1 - x2) ** 2
    else:
        raise ValueError("variant must be 'original' or 'rescaled'")
    return PmiProblem.from_matrices(f, [G], box=((0.0, 1.2), (0.0, 1.2)), known_optimum=0.0,
                                    name=f"example2-{variant}")


def example2_reference(variant: str) -> ReferenceOptimum:
    mins = ((0.0, 0.0),) if variant == "original" else ((0.5, 0.5), (0.0, 0.0))
    return ReferenceOptimum(0.0, mins)


# ---------------------------------------------------------------- chain of 2x2 blocks

def chain_optimum(n: int) -> ReferenceOptimum:
    if n < 2:
        raise ValueError("n must be >= 2")
    if n % 2 == 0:
        s = sqrt(2.0) / 2
        return ReferenceOptimum(n / 2 * (3 - 2 * sqrt(2.0)), ((s,) * n,))

    def a_of(b: float) -> float:
        return (n + 1) * b / (2 * b + n - 1)

    lo, hi = 0.0, 1.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if a_of(mid) ** 2 + mid ** 2 - 1 > 0:
            hi = mid
        else:
            lo = mid
    b = 0.5 * (lo + hi)
    a = a_of(b)
    value = (n + 1) / 2 * (a - 1) ** 2 + (n - 1) / 2 * (b - 1) ** 2
    x = tuple(a if i % 2 == 0 else b for i in range(n))
    return ReferenceOptimum(value, (x,), "scalar-solve")


def gen_chain(n: int) -> PmiProblem:
    """Blocks ``[[1 - x_i, x_{i+1}], [x_{i+1}, 1 + x_i]]`` for consecutive pairs."""
    if n < 2:
        raise ValueError("n must be >= 2")
    x = _vars(n)
    f = sum(((xi - 1) ** 2 for xi in x), Polynomial.zero(n))
    mats = [PolyMatrix.from_rows([[1 - x[i], x[i + 1]], [x[i + 1], 1 + x[i]]]) for i in range(n - 1)]
    return PmiProblem.from_matrices(f, mats, known_optimum=chain_optimum(n).value, name=f"chain-{n}")


# ---------------------------------------------------------------- correlation-matrix spectrahedron

def corrmat_index(q: int, i: int, j: int) -> int:
    """0-based variable of entry (i, j), 1-based ``i < j``."""
    return (2 * q - i) * (i - 1) // 2 + j - i - 1


def gen_corrmat(q: int) -> PmiProblem:
    """Unit-diagonal symmetric matrix with one variable per off-diagonal pair;
    minimize ``-sum x_i^2``."""
    if q < 2:
        raise ValueError("q must be >= 2")
    n = q * (q - 1) // 2
    x = _vars(n)
    entries = {(i, i): Polynomial.constant(n, 1.0) for i in range(q)}
    for i in range(1, q + 1):
        for j in range(i + 1, q + 1):
            entries[(i - 1, j - 1)] = x[corrmat_index(q, i, j)]
    G = PolyMatrix.from_upper(n, q, entries)
    f = -sum((xi * xi for xi in x), Polynomial.zero(n))
    return PmiProblem.from_matrices(f, [G], known_optimum=-float(n), name=f"corrmat-{q}")


def corrmat_reference(q: int) -> ReferenceOptimum:
    n = q * (q - 1) // 2
    return ReferenceOptimum(-float(n), ((1.0,) * n,))


# ---------------------------------------------------------------- random instances

def _random_poly(n: int, deg: int, rng: np.random.Generator, vars_: list[int], scale: float = 1.0,
                 with_constant: bool = True) -> Polynomial:
    k = len(vars_)
    terms = {}
    for mono in monomials_up_to(k, deg):
        if not with_constant and sum(mono) == 0:
            continue
        full = [0] * n
        for v, e in zip(vars_, mono):
            full[v] = e
        terms[tuple(full)] = scale * float(rng.standard_normal())
    return Polynomial(n, terms)


def _random_block(n: int, q: int, deg: int, rng, vars_: list[int], margin: float) -> PolyMatrix:
    entries = {}
    for i in range(q):
        for j in range(i, q):
            entries[(i, j)] = _random_poly(n, deg, rng, vars_, 0.3, with_constant=False)
    M = PolyMatrix.from_upper(n, q, entries) + PolyMatrix.identity(n, q) * (1.0 + margin)
    if deg >= 2:
        # |x^a| <= 1 on the unit box, so this bounds the spectrum there
        monos, C = M.coefficient_tensor
        bound = sum(np.linalg.norm(Cm, 2) for Cm in C)
        M = M * (1.0 / bound)
    return M


def _box_block(n: int, vars_: list[int]) -> PolyMatrix:
    x = _vars(n)
    diag = []
    for v in vars_:
        diag += [PolyMatrix.scalar((1 - x[v]) * 0.5), PolyMatrix.scalar((1 + x[v]) * 0.5)]
    return block_diag(*diag)


def gen_random(n: int, q: int, deg: int = 1, seed: int = 0, sparsity: int | None = None,
               *, objective_degree: int = 2, margin: float = 0.1) -> PmiProblem:
    """Random instance with the origin strictly inside K.

    Dense (``sparsity=None``): one random ``q x q`` block and a diagonal block
    encoding the unit box.  With ``sparsity=w`` the variables are covered by
    a chain of windows of width ``w``; each window gets one block combining a
    random part and its box constraints, and the objective splits accordingly.
    """
    if min(n, q, deg) < 1 or objective_degree < 1:
        raise ValueError("parameters must be positive")
    rng = _rng(seed)
    if sparsity is None:
        windows = [list(range(n))]
        mats = [_random_block(n, q, deg, rng, windows[0], margin), _box_block(n, windows[0])]
    else:
        w = max(1, min(sparsity, n))
        windows = [list(range(i, i + w)) for i in range(0, max(1, n - w + 1))]
        mats = [block_diag(_random_block(n, q, deg, rng, W, margin), _box_block(n, W)) for W in windows]
    f = Polynomial.zero(n)
    for W in windows:
        f = f + _random_poly(n, objective_degree, rng, W)
    # a convex anchor keeps minimizers away from pathological degeneracy
    f = f + sum((Polynomial.variable(n, i) ** 2 for i in range(n)), Polynomial.zero(n))
    name = f"random-n{n}-q{q}-d{deg}-s{seed}" + (f"-w{sparsity}" if sparsity else "")
    return PmiProblem.from_matrices(f, mats, name=name)


# ---------------------------------------------------------------- expected relaxation values

# lower bounds by relaxation order for the first family (not exact for f1, f2)
EXAMPLE1_BOUNDS = {
    1: {2: 1.5000, 3: 1.8333, 4: 1.8333, 5: 1.9000, 6: 1.9000, 7: 1.9286},
    2: {2: 1.0000, 3: 1.5000, 4: 1.6667, 5: 1.7500, 6: 1.8019, 7: 1.9657},
    3: {2: 2.0000},
    4: {2: 2.0000},
}
EXAMPLE2_BOUNDS = {
    "original": {4: 0.0},
    "rescaled": {4: -0.0478, 5: -0.0274, 6: -0.0195},
}
CHAIN_TABLE = {3: 0.2367, 4: 0.3431, 5: 0.4167, 6: 0.5147, 7: 0.5918, 8: 0.6863, 9: 0.7653, 10: 0.8579}
CORRMAT_TABLE = {5: -10.0, 6: -15.0, 7: -21.0, 8: -28.0}
