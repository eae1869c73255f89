"""Sparse multivariate polynomials and symmetric polynomial matrices.

Monomials are exponent tuples of length ``n``.  All containers iterate in
graded lexicographic order, i.e. ``1, x1, x2, ..., x1^2, x1*x2, ...``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]

#: relative threshold below which coefficients are dropped after arithmetic
PRUNE_RTOL = 1e-14
#: asymmetry (absolute coefficient difference) tolerated silently
SYMMETRY_TOL = 1e-12


def grlex_key(mono: Monomial) -> tuple:
    return (sum(mono), tuple(-e for e in mono))


def monomials_up_to(n: int, d: int) -> list[Monomial]:
    """All exponent vectors of total degree <= d, in graded lex order."""
    out = []
    for deg in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


@dataclass(frozen=True)
class MonomialBasis:
    """The canonical basis ``[x]_d`` of polynomials of degree at most ``d``."""

    n: int
    d: int

    @cached_property
    def monomials(self) -> list[Monomial]:
        return monomials_up_to(self.n, self.d)

    def __len__(self) -> int:
        return comb(self.n + self.d, self.d)

    def __iter__(self):
        return iter(self.monomials)

    def index(self, mono: Monomial) -> int:
        return self._index[mono]

    @cached_property
    def _index(self) -> dict[Monomial, int]:
        return {m: i for i, m in enumerate(self.monomials)}

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Rows of basis values, shape ``(P, len(self))``."""
        return monomial_values(points, self.monomials)


def monomial_values(points: np.ndarray, monos: Sequence[Monomial]) -> np.ndarray:
    """Evaluate each monomial at each point; returns shape ``(P, len(monos))``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not monos:
        return np.ones((pts.shape[0], 0))
    exps = np.asarray(monos, dtype=int)
    out = np.ones((pts.shape[0], len(monos)))
    # accumulate per variable; avoids a (P, K, n) temporary
    for i in range(exps.shape[1]):
        col = exps[:, i]
        if not col.any():
            continue
        maxe = int(col.max())
        powers = np.ones((pts.shape[0], maxe + 1))
        for e in range(1, maxe + 1):
            powers[:, e] = powers[:, e - 1] * pts[:, i]
        out *= powers[:, col]
    return out


def _prune(terms: dict[Monomial, float]) -> dict[Monomial, float]:
    if not terms:
        return terms
    big = max(abs(c) for c in terms.values())
    cut = PRUNE_RTOL * big
    return {m: c for m, c in terms.items() if c != 0.0 and abs(c) >= cut}


class Polynomial:
    """Immutable sparse real polynomial in ``n`` variables."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Monomial, float] | None = None, *, prune: bool = True):
        self.n = int(n)
        clean: dict[Monomial, float] = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != self.n:
                raise ValueError(f"monomial {mono} has length {len(mono)}, expected {self.n}")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            clean[mono] = clean.get(mono, 0.0) + float(c)
        clean = _prune(clean) if prune else {m: c for m, c in clean.items() if c != 0.0}
        self._terms = dict(sorted(clean.items(), key=lambda mc: grlex_key(mc[0])))

    @classmethod
    def _make(cls, n: int, terms: dict[Monomial, float]) -> Polynomial:
        # trusted internal path: monomials already validated
        self = object.__new__(cls)
        self.n = n
        self._terms = dict(sorted(_prune(terms).items(), key=lambda mc: grlex_key(mc[0])))
        return self

    # construction helpers
    @classmethod
    def constant(cls, n: int, c: float) -> Polynomial:
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> Polynomial:
        e = [0] * n
        e[i] = 1
        return cls(n, {tuple(e): 1.0})

    @classmethod
    def zero(cls, n: int) -> Polynomial:
        return cls(n)

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, mono: Monomial) -> float:
        return self._terms.get(tuple(mono), 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 here."""
        return max((sum(m) for m in self._terms), default=0)

    def support(self) -> frozenset[int]:
        """Indices of variables that actually occur."""
        return frozenset(i for m in self._terms for i, e in enumerate(m) if e)

    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m in self._terms)

    # arithmetic
    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError(f"variable count mismatch: {self.n} vs {other.n}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.n, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms.get(m, 0.0) + c
        return Polynomial._make(self.n, terms)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial._make(self.n, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial._make(self.n, {m: c * float(other) for m, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[Monomial, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                terms[m] = terms.get(m, 0.0) + c1 * c2
        return Polynomial._make(self.n, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * (1.0 / float(other))
        return NotImplemented

    def __pow__(self, k: int) -> Polynomial:
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.n, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.n, tuple(self._terms.items())))

    def allclose(self, other: Polynomial, atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff._terms.values())

    # evaluation
    def __call__(self, point) -> float:
        return poly_eval(self, point)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at the rows of ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.n:
            raise ValueError(f"points have {pts.shape[1]} coordinates, expected {self.n}")
        if not self._terms:
            return np.zeros(pts.shape[0])
        monos = list(self._terms)
        coeffs = np.fromiter(self._terms.values(), dtype=float, count=len(monos))
        return monomial_values(pts, monos) @ coeffs

    def extend(self, n: int, positions: Sequence[int]) -> Polynomial:
        """Re-embed into ``n`` variables, variable ``i`` going to ``positions[i]``."""
        terms = {}
        for m, c in self._terms.items():
            e = [0] * n
            for i, ei in enumerate(m):
                e[positions[i]] += ei
            terms[tuple(e)] = c
        return Polynomial(n, terms)

    # serialisation
    def to_json(self) -> list[dict]:
        return [{"c": c, "e": list(m)} for m, c in self._terms.items()]

    @classmethod
    def from_json(cls, n: int, data: Iterable[Mapping]) -> Polynomial:
        terms: dict[Monomial, float] = {}
        for t in data:
            e = tuple(t["e"])
            terms[e] = terms.get(e, 0.0) + float(t["c"])
        return cls(n, terms)

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for m, c in self._terms.items():
            factors = [f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(m) if e]
            if not factors:
                parts.append(f"{c:g}")
            elif c == 1.0:
                parts.append("*".join(factors))
            elif c == -1.0:
                parts.append("-" + "*".join(factors))
            else:
                parts.append(f"{c:g}*" + "*".join(factors))
        return " + ".join(parts).replace("+ -", "- ")


def poly_eval(p: Polynomial, point) -> float:
    """Evaluate ``p`` at a single point with compensated summation."""
    pt = np.asarray(point, dtype=float).ravel()
    if pt.shape[0] != p.n:
        raise ValueError(f"point has {pt.shape[0]} coordinates, expected {p.n}")
    vals = []
    for m, c in p.items():
        v = c
        for xi, e in zip(pt, m):
            if e:
                v *= float(xi) ** e
        vals.append(v)
    return math.fsum(vals)


class PolyMatrix:
    """Symmetric ``q x q`` matrix with polynomial entries.

    Only the upper triangle is stored.  Build instances with
    :meth:`from_rows`, :meth:`from_upper`, :meth:`constant` or
    :meth:`identity`.
    """

    def __init__(self, n: int, q: int, upper: Sequence[Polynomial]):
        if len(upper) != q * (q + 1) // 2:
            raise ValueError("upper-triangle storage has wrong length")
        for p in upper:
            if p.n != n:
                raise ValueError(f"entry uses {p.n} variables, expected {n}")
        self.n = n
        self.q = q
        self._upper = tuple(upper)

    @staticmethod
    def _pos(q: int, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return i * q - i * (i - 1) // 2 + (j - i)

    @classmethod
    def from_upper(cls, n: int, q: int, entries: Mapping[tuple[int, int], Polynomial]) -> PolyMatrix:
        """Build from a map of (i, j) with i <= j (0-based); missing entries are zero."""
        upper = []
        for i in range(q):
            for j in range(i, q):
                upper.append(entries.get((i, j), Polynomial.zero(n)))
        return cls(n, q, upper)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Polynomial]], n: int | None = None) -> PolyMatrix:
        """Symmetrise a full square array of polynomials by averaging."""
        q = len(rows)
        if any(len(r) != q for r in rows):
            raise ValueError("matrix must be square")
        if n is None:
            n = rows[0][0].n
        upper = []
        worst = 0.0
        for i in range(q):
            for j in range(i, q):
                a, b = rows[i][j], rows[j][i]
                if i == j or a == b:
                    upper.append(a)
                    continue
                diff = a - b
                worst = max(worst, max((abs(c) for _, c in diff.items()), default=0.0))
                upper.append((a + b) * 0.5)
        if worst > SYMMETRY_TOL:
            warnings.warn(f"polynomial matrix asymmetric by {worst:.3g}; symmetrised", stacklevel=2)
        return cls(n, q, upper)

    @classmethod
    def constant(cls, M, n: int) -> PolyMatrix:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        q = M.shape[0]
        rows = [[Polynomial.constant(n, M[i, j]) for j in range(q)] for i in range(q)]
        return cls.from_rows(rows, n)

    @classmethod
    def identity(cls, n: int, q: int) -> PolyMatrix:
        return cls.constant(np.eye(q), n)

    @classmethod
    def scalar(cls, p: Polynomial) -> PolyMatrix:
        return cls(p.n, 1, [p])

    def __getitem__(self, ij: tuple[int, int]) -> Polynomial:
        i, j = ij
        return self._upper[self._pos(self.q, i, j)]

    def upper_items(self):
        """Yield ((i, j), poly) for i <= j."""
        k = 0
        for i in range(self.q):
            for j in range(i, self.q):
                yield (i, j), self._upper[k]
                k += 1

    def rows(self) -> list[list[Polynomial]]:
        return [[self[i, j] for j in range(self.q)] for i in range(self.q)]

    @property
    def degree(self) -> int:
        return max((p.degree for p in self._upper), default=0)

    def is_linear(self) -> bool:
        return self.degree <= 1

    def support(self) -> frozenset[int]:
        out: frozenset[int] = frozenset()
        for p in self._upper:
            out |= p.support()
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.n == other.n and self.q == other.q and self._upper == other._upper

    def __hash__(self) -> int:
        return hash((self.n, self.q, self._upper))

    def _binary(self, other: PolyMatrix, op) -> PolyMatrix:
        if not isinstance(other, PolyMatrix) or other.q != self.q or other.n != self.n:
            raise ValueError("size mismatch")
        return PolyMatrix(self.n, self.q, [op(a, b) for a, b in zip(self._upper, other._upper)])

    def __add__(self, other: PolyMatrix) -> PolyMatrix:
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other: PolyMatrix) -> PolyMatrix:
        return self._binary(other, lambda a, b: a - b)

    def __neg__(self) -> PolyMatrix:
        return PolyMatrix(self.n, self.q, [-p for p in self._upper])

    def __mul__(self, s: float) -> PolyMatrix:
        return PolyMatrix(self.n, self.q, [p * float(s) for p in self._upper])

    __rmul__ = __mul__

    # numeric evaluation
    @cached_property
    def coefficient_tensor(self) -> tuple[list[Monomial], np.ndarray]:
        """Monomials occurring in any entry and the matching (K, q, q) coefficients."""
        monos = sorted({m for p in self._upper for m in p._terms}, key=grlex_key)
        index = {m: k for k, m in enumerate(monos)}
        C = np.zeros((len(monos), self.q, self.q))
        for (i, j), p in self.upper_items():
            for m, c in p.items():
                C[index[m], i, j] = c
                C[index[m], j, i] = c
        return monos, C

    def evaluate(self, point) -> np.ndarray:
        pt = np.asarray(point, dtype=float).ravel()
        if pt.shape[0] != self.n:
            raise ValueError(f"point has {pt.shape[0]} coordinates, expected {self.n}")
        return self.evaluate_many(pt[None, :])[0]

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Values at the rows of ``points``; shape ``(P, q, q)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        monos, C = self.coefficient_tensor
        if not monos:
            return np.zeros((pts.shape[0], self.q, self.q))
        V = monomial_values(pts, monos)
        return np.tensordot(V, C, axes=(1, 0))

    def to_numpy(self) -> np.ndarray:
        """The constant matrix; raises if any entry is non-constant."""
        if self.degree > 0:
            raise ValueError("matrix is not constant")
        return self.evaluate(np.zeros(self.n))

    def __repr__(self) -> str:
        return f"PolyMatrix(q={self.q}, n={self.n}, deg={self.degree})"


def block_diag(*mats: PolyMatrix) -> PolyMatrix:
    if not mats:
        raise ValueError("need at least one block")
    n = mats[0].n
    q = sum(M.q for M in mats)
    entries: dict[tuple[int, int], Polynomial] = {}
    off = 0
    for M in mats:
        if M.n != n:
            raise ValueError("variable count mismatch")
        for (i, j), p in M.upper_items():
            if not p.is_zero():
                entries[(off + i, off + j)] = p
        off += M.q
    return PolyMatrix.from_upper(n, q, entries)


def pm_kron(A: PolyMatrix, B: PolyMatrix) -> PolyMatrix:
    """Kronecker product; entry (i*qB + k, j*qB + l) is A[i, j] * B[k, l]."""
    if A.n != B.n:
        raise ValueError("variable count mismatch")
    qa, qb = A.q, B.q
    q = qa * qb
    cache: dict[tuple[int, int, int, int], Polynomial] = {}
    upper = []
    for r in range(q):
        i, k = divmod(r, qb)
        for c in range(r, q):
            j, l = divmod(c, qb)
            key = (min(i, j), max(i, j), min(k, l), max(k, l))
            p = cache.get(key)
            if p is None:
                a, b = A[i, j], B[k, l]
                p = Polynomial.zero(A.n) if (a.is_zero() or b.is_zero()) else a * b
                cache[key] = p
            upper.append(p)
    return PolyMatrix(A.n, q, upper)


def pm_kron_power(G: PolyMatrix, k: int) -> PolyMatrix:
    """The k-fold Kronecker power ``G ⊗ ... ⊗ G``."""
    if k < 1:
        raise ValueError("Kronecker power needs k >= 1; the k = 0 term is the scalar slot")
    out = G
    for _ in range(k - 1):
        out = pm_kron(out, G)
    return out


def trace_inner(L, M: PolyMatrix) -> Polynomial:
    """``<L, M(x)> = sum_ij L_ij M_ij(x)`` for a constant symmetric ``L``."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape != (M.q, M.q):
        raise ValueError(f"size mismatch: {L.shape} vs ({M.q}, {M.q})")
    Ls = 0.5 * (L + L.T)
    terms: dict[Monomial, float] = {}
    for (i, j), p in M.upper_items():
        w = Ls[i, j] if i == j else 2.0 * Ls[i, j]
        if w == 0.0:
            continue
        for m, c in p.items():
            terms[m] = terms.get(m, 0.0) + w * c
    return Polynomial(M.n, terms)


def dilate(G: PolyMatrix) -> PolyMatrix:
    """``diag(G, I - G)``."""
    return block_diag(G, PolyMatrix.identity(G.n, G.q) - G)


def word_eval(word: Sequence[int], letters: Sequence[PolyMatrix]) -> PolyMatrix:
    """Kronecker product of ``letters[w]`` for ``w`` in ``word`` (0-based indices)."""
    if len(word) == 0:
        raise ValueError("empty word")
    for w in word:
        if not 0 <= w < len(letters):
            raise IndexError(f"letter index {w} out of range for {len(letters)} letters")
    out = letters[word[0]]
    for w in word[1:]:
        out = pm_kron(out, letters[w])
    return out


def batched_kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker products of matching stacks ``(P, a, a)`` and ``(P, b, b)``."""
    P, a, _ = A.shape
    b = B.shape[1]
    return (A[:, :, None, :, None] * B[:, None, :, None, :]).reshape(P, a * b, a * b)
