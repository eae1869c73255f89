"""SOS-matrix baseline: ``f - r = sigma + <Sigma, G>`` with Gram matrices.

``sigma`` has a Gram matrix over the monomials of degree <= m, ``Sigma`` one
over ``[x]_d (x) I_q``.  The program exposes the same slot interface as a
Kronecker cone, so point assembly and certificate checks are shared.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Sequence

import numpy as np

from .model import PmiProblem
from .poly import PolyMatrix, Polynomial, monomial_values, monomials_up_to, pm_kron, trace_inner
from .sdp.assembly import assemble_by_points, plan_samples
from .sdp.problem import SdpProblem


def _gram_basis_matrix(n: int, d: int) -> PolyMatrix:
    monos = monomials_up_to(n, d)
    k = len(monos)
    entries = {}
    for i in range(k):
        for j in range(i, k):
            e = tuple(a + b for a, b in zip(monos[i], monos[j]))
            entries[(i, j)] = Polynomial(n, {e: 1.0})
    return PolyMatrix.from_upper(n, k, entries)


@dataclass(frozen=True)
class SosSlot:
    key: str
    size: int
    degree: int
    basis_degree: int
    n: int
    matrix: PolyMatrix | None = field(default=None, repr=False, compare=False)

    word = ("sos",)

    @cached_property
    def generator(self) -> PolyMatrix:
        V = _gram_basis_matrix(self.n, self.basis_degree)
        return V if self.matrix is None else pm_kron(V, self.matrix)

    def evaluate(self, points: np.ndarray, letter_values=None) -> np.ndarray:
        pts = np.atleast_2d(points)
        v = monomial_values(pts, monomials_up_to(self.n, self.basis_degree))
        outer = v[:, :, None] * v[:, None, :]
        if self.matrix is None:
            return outer
        G = self.matrix.evaluate_many(pts)
        P, k, q = pts.shape[0], v.shape[1], self.matrix.q
        return (outer[:, :, None, :, None] * G[:, None, :, None, :]).reshape(P, k * q, k * q)


@dataclass(frozen=True)
class SosSpec:
    """Quacks like :class:`~pmi_relax.cone.ConeSpec` for assembly and checks."""

    form: str
    order: int
    n: int
    slots: tuple[SosSlot, ...]
    block_hash: str

    letters = ()

    @property
    def sizes(self) -> list[int]:
        return [s.size for s in self.slots]

    @property
    def degree(self) -> int:
        return max(s.degree for s in self.slots)

    @property
    def total_dim(self) -> int:
        return sum(s.size * (s.size + 1) // 2 for s in self.slots)

    def keys(self) -> list[str]:
        return [s.key for s in self.slots]

    def letter_values(self, points: np.ndarray) -> list:
        return []

    def evaluate_element(self, mats: Sequence[np.ndarray], points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        total = np.zeros(pts.shape[0])
        for slot, X in zip(self.slots, mats):
            total += np.einsum("pij,ij->p", slot.evaluate(pts), np.asarray(X, dtype=float))
        return total

    def expand_element(self, mats: Sequence[np.ndarray]) -> Polynomial:
        out = Polynomial.zero(self.n)
        for slot, X in zip(self.slots, mats):
            out = out + trace_inner(np.asarray(X, dtype=float), slot.generator)
        return out

    @cached_property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.form, self.order, self.n, self.block_hash,
                             [(s.key, s.size, s.basis_degree) for s in self.slots]]).encode())
        return h.hexdigest()[:16]


def _blocks_hash(mats: Sequence[PolyMatrix]) -> str:
    h = hashlib.sha256()
    for M in mats:
        for (i, j), p in M.upper_items():
            h.update(json.dumps([M.q, i, j, p.to_json()]).encode())
    return h.hexdigest()[:16]


def _sigma_slots(p: PmiProblem, sigma_deg: int, Sigma_deg: int, per_block: bool) -> list[SosSlot]:
    n = p.n
    slots = [SosSlot("sigma", comb(n + sigma_deg, n), 2 * sigma_deg, sigma_deg, n)]
    mats = [b.matrix for b in p.blocks] if per_block else [p.merged()]
    for k, M in enumerate(mats):
        key = f"Sigma{k + 1}" if per_block else "Sigma"
        slots.append(SosSlot(key, M.q * comb(n + Sigma_deg, n), 2 * Sigma_deg + M.degree, Sigma_deg, n, M))
    return slots


def sos_spec(p: PmiProblem, m: int, *, per_block: bool = False) -> SosSpec:
    """Order-``m`` program: ``deg sigma <= 2m`` and ``deg <Sigma, G> <= 2m``."""
    if m < 1:
        raise ValueError("order m must be >= 1")
    degG = max(b.degree for b in p.blocks)
    d = (2 * m - degG) // 2
    if d < 0:
        raise ValueError("order too small for Sigma")
    if 2 * m < p.objective.degree:
        raise ValueError(f"order {m} too small for an objective of degree {p.objective.degree}")
    slots = _sigma_slots(p, m, d, per_block)
    mats = [b.matrix for b in p.blocks]
    return SosSpec("sos", m, p.n, tuple(slots), _blocks_hash(mats))


def sos_tilde_spec(p: PmiProblem, *, per_block: bool = False) -> SosSpec:
    """Degree-2 variant: ``sigma`` and the entries of ``Sigma`` both quadratic."""
    slots = _sigma_slots(p, 1, 1, per_block)
    mats = [b.matrix for b in p.blocks]
    return SosSpec("sos-tilde", 1, p.n, tuple(slots), _blocks_hash(mats))


def sample_degree(spec: SosSpec, f: Polynomial) -> int:
    return max(spec.degree, f.degree, 1)


def build_sos(p: PmiProblem, m: int, *, seed: int = 0, oversample_factor: float = 1.0,
              box=None, per_block: bool = False) -> SdpProblem:
    spec = sos_spec(p, m, per_block=per_block)
    plan = plan_samples(p.n, max(2 * m, sample_degree(spec, p.objective)), box, seed, oversample_factor)
    return assemble_by_points(spec, p.objective, plan)


def build_sos_tilde1(p: PmiProblem, *, seed: int = 0, oversample_factor: float = 1.0,
                     box=None, per_block: bool = False) -> SdpProblem:
    spec = sos_tilde_spec(p, per_block=per_block)
    degG = max(b.degree for b in p.blocks)
    plan = plan_samples(p.n, max(2 + degG, p.objective.degree), box, seed, oversample_factor)
    return assemble_by_points(spec, p.objective, plan)
