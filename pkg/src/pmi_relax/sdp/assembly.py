"""Turn ``f - r in cone`` into a block SDP.

Two routes: equate values at generic sample points (the fast default), or
match the coefficients of the expanded identity (small instances only).
Both produce ``lambda0 + sum <X_s, W_s> + r = f`` with objective ``min -r``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import ceil, comb
from typing import Sequence

import numpy as np

from ..cone import ConeSpec
from ..model import _rng
from ..poly import Polynomial, monomial_values, monomials_up_to
from .problem import SdpBlock, SdpProblem

log = logging.getLogger(__name__)

MAX_COEFF_MONOMIALS = 5000
PROBE_LIMIT = 1500
REDRAWS = 5


class SamplingError(RuntimeError):
    pass


@dataclass
class SamplePlan:
    points: np.ndarray
    seed: int
    degree: int
    target: int
    box: tuple[tuple[float, float], ...]
    conditioning: float | None = None
    draws: int = 1
    notes: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.points.shape[0]


def _conditioning(points: np.ndarray, D: int) -> tuple[float, int] | None:
    """``(sigma_min / sigma_max, numerical rank)`` of the column-normalized
    degree-``D`` monomial evaluation matrix, or None when too large to probe."""
    n = points.shape[1]
    K = comb(n + D, n)
    if K > PROBE_LIMIT:
        return None
    V = monomial_values(points, monomials_up_to(n, D))
    norms = np.linalg.norm(V, axis=0)
    V = V / np.where(norms > 0, norms, 1.0)
    sv = np.linalg.svd(V, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0.0, 0
    tol = max(V.shape) * np.finfo(float).eps * sv[0]
    rank = int(np.sum(sv > tol))
    ratio = float(sv[-1] / sv[0]) if sv.size == K else 0.0
    return ratio, rank


def plan_samples(
    n: int,
    D: int,
    box: Sequence[Sequence[float]] | None = None,
    seed: int = 0,
    oversample_factor: float = 1.0,
) -> SamplePlan:
    """Uniform points in ``box`` (default ``[-1, 1]^n``), ``C(n+D, n)`` of them
    times ``oversample_factor``."""
    if D < 1:
        raise ValueError("degree bound D must be >= 1")
    if oversample_factor < 1.0:
        raise ValueError("oversample_factor must be >= 1")
    box_t = tuple((float(a), float(b)) for a, b in (box or [(-1.0, 1.0)] * n))
    if len(box_t) != n or any(b <= a for a, b in box_t):
        raise ValueError("box must give n intervals with lo < hi")
    target = comb(n + D, n)
    count = ceil(oversample_factor * target)
    lo = np.array([a for a, _ in box_t])
    hi = np.array([b for _, b in box_t])
    rng = _rng(seed)
    cond = None
    for draw in range(1, REDRAWS + 1):
        pts = lo + (hi - lo) * rng.random((count, n))
        probe = _conditioning(pts, D)
        if probe is None:
            return SamplePlan(pts, seed, D, target, box_t, None, draw,
                              ["conditioning probe skipped (basis too large)"])
        cond, rank = probe
        if rank == target:
            return SamplePlan(pts, seed, D, target, box_t, cond, draw)
        log.warning("sample draw %d rank deficient (%d < %d), redrawing", draw, rank, target)
    raise SamplingError("sampling degenerate; raise oversample_factor")


def _free_column(N: int) -> dict:
    return dict(B=np.ones((N, 1)), c_free=np.array([-1.0]), free_names=["r"])


def assemble_by_points(cone: ConeSpec, f: Polynomial, plan: SamplePlan) -> SdpProblem:
    need = max(cone.degree, f.degree)
    if plan.degree < need:
        raise ValueError(f"degree bound too small: plan has D={plan.degree}, identity needs {need}")
    pts = plan.points
    lv = cone.letter_values(pts)
    blocks = [SdpBlock(s.size, s.evaluate(pts, lv), label=s.key) for s in cone.slots]
    b = f.evaluate_many(pts)
    meta = {"assembly": "points", "cone_hash": cone.content_hash, "seed": plan.seed,
            "degree": plan.degree, "points": plan.count}
    return SdpProblem(blocks, b, meta=meta, **_free_column(len(b)))


def assemble_by_coeffs(cone: ConeSpec, f: Polynomial) -> SdpProblem:
    D = max(cone.degree, f.degree, 0)
    K = comb(cone.n + D, cone.n)
    if K > MAX_COEFF_MONOMIALS:
        raise ValueError(f"coefficient assembly guard: {K} monomials > {MAX_COEFF_MONOMIALS}")
    monos = monomials_up_to(cone.n, D)
    index = {m: k for k, m in enumerate(monos)}
    blocks = []
    for s in cone.slots:
        A = np.zeros((K, s.size, s.size))
        sm, C = s.generator.coefficient_tensor
        for m, Cm in zip(sm, C):
            A[index[m]] = Cm
        blocks.append(SdpBlock(s.size, A, label=s.key))
    b = np.array([f.coefficient(m) for m in monos])
    B = np.zeros((K, 1))
    B[index[(0,) * cone.n], 0] = 1.0
    meta = {"assembly": "coefficients", "cone_hash": cone.content_hash, "degree": D}
    return SdpProblem(blocks, b, B=B, c_free=np.array([-1.0]), free_names=["r"], meta=meta)
