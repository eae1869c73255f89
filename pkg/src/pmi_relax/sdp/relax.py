"""Hierarchy driver: cone -> samples -> SDP -> solve -> certificate."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from math import ceil, comb
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..certificates import Certificate, extract_certificate, verify_certificate
from ..cone import (DEFAULT_MAX_BLOCK, DEFAULT_MAX_WORDS, ConeForm, build_block,
                    build_cone)
from ..model import PmiProblem, ProblemKind
from ..sos import sos_spec, sos_tilde_spec
from .assembly import assemble_by_coeffs, assemble_by_points, plan_samples
from .ipm import IpmOptions, solve_ipm
from .problem import SdpProblem, SolverResult, SolverStatus
from .sdpa import export_sdpa

log = logging.getLogger(__name__)

MODES = ("dense", "block", "mixed", "sparse", "sos", "sos-tilde")
DEFAULT_MEMORY_LIMIT = 2 * 2**30


class ResourceLimitError(RuntimeError):
    """The assembled SDP would not fit the configured memory budget."""


@dataclass
class RelaxOptions:
    tol: float = 1e-8
    seed: int = 0
    oversample: float = 1.0
    sample_box: Sequence[Sequence[float]] | None = None
    assembly: str = "points"            # points | coeffs
    max_block_size: int = DEFAULT_MAX_BLOCK
    max_words: int = DEFAULT_MAX_WORDS
    memory_limit: int = DEFAULT_MEMORY_LIMIT
    commutative: bool = False           # block form: one word per letter multiset
    dense_fallback: bool = True         # realize oversized dense cones by their block decomposition
    dense_direct_max: int = 512         # largest Kronecker-power block built directly when splittable
    sos_per_block: bool = False
    pattern: Any = None
    max_iter: int = 200
    verify: bool = True
    export_sdpa: str | Path | None = None


@dataclass
class RelaxOutcome:
    bound: float
    result: SolverResult
    certificate: Certificate | None
    mode: str
    order: int
    cone: Any = None
    sdp_shape: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    def __iter__(self):
        return iter((self.bound, self.result, self.certificate))

    @property
    def verified(self) -> bool | None:
        if self.certificate is None or "verified" not in self.certificate.report:
            return None
        return bool(self.certificate.report["verified"])


# (problem hash, mode, seed) -> {order: bound}; guarded for concurrent bench rows
_history: dict[tuple, dict[int, float]] = {}
_history_lock = threading.Lock()


def clear_history() -> None:
    with _history_lock:
        _history.clear()


def _record(key: tuple, m: int, bound: float, tol: float) -> list[str]:
    notes = []
    with _history_lock:
        runs = _history.setdefault(key, {})
        for k, b in runs.items():
            if k < m and bound < b - 2 * tol * max(1.0, abs(b)):
                notes.append(f"monotonicity violated: order {m} bound {bound:.8g} < order {k} bound {b:.8g}")
            if k > m and b < bound - 2 * tol * max(1.0, abs(b)):
                notes.append(f"monotonicity violated: order {k} bound {b:.8g} < order {m} bound {bound:.8g}")
        runs[m] = bound
    for n in notes:
        log.warning(n)
    return notes


def build_relaxation_cone(p: PmiProblem, m: int, mode: str, opts: RelaxOptions):
    """Cone (or SOS program) for ``mode``; returns ``(cone, notes)``."""
    notes: list[str] = []
    if mode == "sos":
        return sos_spec(p, m, per_block=opts.sos_per_block), notes
    if mode == "sos-tilde":
        return sos_tilde_spec(p, per_block=opts.sos_per_block), notes
    form = ConeForm(mode)
    caps = {"max_block_size": opts.max_block_size}
    if form is ConeForm.BLOCK:
        return build_block(p, m, max_words=opts.max_words, commutative=opts.commutative, **caps), notes
    if form is ConeForm.DENSE:
        nonlinear = p.kind is ProblemKind.NONLINEAR
        q = 2 * p.q_total if nonlinear else p.q_total
        splittable = p.t > 1 or nonlinear
        if opts.dense_fallback and splittable and q ** m > min(opts.max_block_size, opts.dense_direct_max):
            notes.append(f"dense order {m} needs a {q ** m}-square block; using the equivalent block decomposition")
            return build_block(p, m, max_words=opts.max_words, commutative=True, **caps), notes
        if opts.dense_fallback and splittable:
            est = _estimate_bytes([q ** k for k in range(m + 1)], comb(p.n + max(m * max(b.degree for b in p.blocks), p.objective.degree), p.n))
            if est > opts.memory_limit:
                notes.append("dense cone exceeds the memory budget; using the equivalent block decomposition")
                return build_block(p, m, max_words=opts.max_words, commutative=True, **caps), notes
        return build_cone(p, m, form, **caps), notes
    if form is ConeForm.SPARSE:
        return build_cone(p, m, form, pattern=opts.pattern, **caps), notes
    return build_cone(p, m, form, **caps), notes


def _estimate_bytes(sizes: Sequence[int], N: int) -> int:
    sq = sum(s * s for s in sizes)
    tri = sum(s * (s + 1) // 2 for s in sizes)
    # raw and orthonormalized constraint data, QR workspace, Schur matrix
    return 8 * (2 * N * sq + 2 * N * tri + 2 * N * N)


def sample_degree(cone, f) -> int:
    return max(cone.degree, f.degree, 1)


def relax(p: PmiProblem, m: int, mode: str = "dense", opts: RelaxOptions | None = None) -> RelaxOutcome:
    """Lower bound ``sup r`` with ``f - r`` in the order-``m`` cone of ``mode``."""
    opts = opts or RelaxOptions()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    t0 = time.perf_counter()
    cone, notes = build_relaxation_cone(p, m, mode, opts)
    D = sample_degree(cone, p.objective)
    if mode == "sos":
        D = max(D, 2 * m)
    N = ceil(opts.oversample * comb(p.n + D, p.n))
    est = _estimate_bytes(cone.sizes, N)
    if est > opts.memory_limit:
        raise ResourceLimitError(
            f"{mode} order {m}: about {est / 2**30:.1f} GiB needed for {N} constraints and blocks up to "
            f"{max(cone.sizes)} (limit {opts.memory_limit / 2**30:.1f} GiB)"
        )
    if opts.assembly == "coeffs":
        sdp = assemble_by_coeffs(cone, p.objective)
    else:
        plan = plan_samples(p.n, D, opts.sample_box, opts.seed, opts.oversample)
        sdp = assemble_by_points(cone, p.objective, plan)
    sdp.meta.update({"problem": p.name, "mode": mode, "order": m})
    if opts.export_sdpa:
        export_sdpa(sdp, opts.export_sdpa)
    res = solve_ipm(sdp, IpmOptions(tol=opts.tol, max_iter=opts.max_iter))
    shape = {"constraints": sdp.n_constraints, "rank": res.presolve.get("rank"),
             "blocks": len(sdp.blocks), "max_block": max(cone.sizes), "slots": len(cone.sizes)}
    cert = None
    if res.status is SolverStatus.INFEASIBLE:
        bound = -np.inf
    elif res.status is SolverStatus.UNBOUNDED:
        bound = np.inf
    else:
        bound = float(res.r[0])
        info = {"mode": mode, "order": m, "commutative": opts.commutative, "per_block": opts.sos_per_block,
                "form": getattr(cone.form, "value", cone.form)}
        cert = extract_certificate(cone, res.X, bound, problem_hash=p.content_hash(), cone_info=info)
        if opts.verify:
            verify_certificate(cert, p, cone, box=opts.sample_box)
    if res.status.ok:
        key = (p.content_hash(), mode, opts.seed, opts.sample_box and tuple(map(tuple, opts.sample_box)))
        notes += _record(key, m, bound, opts.tol)
    return RelaxOutcome(bound, res, cert, mode, m, cone, shape, notes, time.perf_counter() - t0)


def rebuild_cone(p: PmiProblem, info: dict[str, Any]):
    """Cone described by a certificate's ``cone`` entry."""
    mode = info.get("mode", "dense")
    m = int(info.get("order", 1))
    form = info.get("form", mode)
    opts = RelaxOptions(commutative=bool(info.get("commutative", True)),
                        sos_per_block=bool(info.get("per_block", False)))
    if mode == "dense" and form == "block":
        return build_block(p, m, commutative=True)
    cone, _ = build_relaxation_cone(p, m, mode, opts)
    return cone


__all__ = ["RelaxOptions", "RelaxOutcome", "ResourceLimitError", "relax", "rebuild_cone", "MODES",
           "clear_history", "SdpProblem"]
