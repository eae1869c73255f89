"""Positivity certificates: extraction, JSON round trip, independent checks,
and the nullspace test that rules out exactness of every relaxation order."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .model import PmiProblem, ProblemKind, _rng
from .poly import Polynomial, dilate

PSD_TOL = 1e-7
IDENTITY_TOL = 1e-6
COEFF_TOL = 1e-6
CHECK_POINTS = 200
CHECK_SEED = 20_240_917
EXACT_CHECK_LIMIT = 2000     # max monomials for the symbolic expansion check
EXACT_CHECK_DIM = 4000       # max total slot dimension for it


class CertificateMismatch(ValueError):
    """Certificate does not belong to the given problem or cone."""


@dataclass
class Certificate:
    bound: float
    lambda0: float
    slots: dict[str, np.ndarray]
    cone_hash: str
    problem_hash: str = ""
    cone: dict[str, Any] = field(default_factory=dict)
    report: dict[str, Any] = field(default_factory=dict)

    def matrices(self, keys: Sequence[str]) -> list[np.ndarray]:
        missing = [k for k in keys if k not in self.slots]
        if missing:
            raise CertificateMismatch(f"certificate lacks slots {missing[:3]}")
        return [self.slots[k] for k in keys]

    def to_json(self) -> dict[str, Any]:
        return {
            "bound": self.bound,
            "lambda0": self.lambda0,
            "slots": [{"id": k, "size": int(M.shape[0]), "matrix": M.ravel().tolist()} for k, M in self.slots.items()],
            "cone_hash": self.cone_hash,
            "problem_hash": self.problem_hash,
            "cone": self.cone,
            "report": self.report,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> Certificate:
        try:
            slots = {}
            for s in data["slots"]:
                vals = np.asarray(s["matrix"], dtype=float)
                k = int(s.get("size") or round(np.sqrt(vals.size)))
                if k * k != vals.size:
                    raise ValueError(f"slot {s['id']!r}: {vals.size} values do not form a square matrix")
                slots[str(s["id"])] = vals.reshape(k, k)
            return cls(float(data["bound"]), float(data["lambda0"]), slots, str(data["cone_hash"]),
                       str(data.get("problem_hash", "")), dict(data.get("cone", {})), dict(data.get("report", {})))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed certificate: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> Certificate:
        return cls.from_json(json.loads(Path(path).read_text()))


def extract_certificate(cone, X: Sequence[np.ndarray], r: float, *, problem_hash: str = "",
                        cone_info: dict | None = None, psd_tol: float = PSD_TOL) -> Certificate:
    """Slot matrices from a solver run, with tiny negative eigenvalues clipped."""
    slots: dict[str, np.ndarray] = {}
    clipped = {}
    for slot, M in zip(cone.slots, X):
        M = 0.5 * (np.asarray(M, dtype=float) + np.asarray(M, dtype=float).T)
        w, V = np.linalg.eigh(M)
        neg = w.min() if w.size else 0.0
        if -psd_tol <= neg < 0:
            clipped[slot.key] = float(-neg)
            M = (V * np.maximum(w, 0.0)) @ V.T
        slots[slot.key] = M
    lam0 = float(slots["lambda0"][0, 0]) if "lambda0" in slots else 0.0
    report = {"clipped": clipped, "max_clip": max(clipped.values(), default=0.0)}
    return Certificate(float(r), lam0, slots, cone.content_hash, problem_hash, dict(cone_info or {}), report)


def _sample_box(cone, box) -> np.ndarray:
    if box is None:
        box = [(-1.0, 1.0)] * cone.n
    return np.array(box, dtype=float)


def verify_certificate(
    cert: Certificate,
    p: PmiProblem,
    cone,
    *,
    psd_tol: float = PSD_TOL,
    identity_tol: float = IDENTITY_TOL,
    coeff_tol: float = COEFF_TOL,
    points: int = CHECK_POINTS,
    seed: int = CHECK_SEED,
    box=None,
    exact: bool | None = None,
) -> dict[str, Any]:
    """Check ``f - r = lambda0 + sum <Lambda_s, W_s>`` with PSD ``Lambda_s``.

    Only problem data are used; the generators are re-evaluated from the
    cone.  Returns a report whose ``verified`` entry is the verdict.
    """
    if cert.cone_hash != cone.content_hash:
        raise CertificateMismatch(f"cone hash {cert.cone_hash} does not match {cone.content_hash}")
    if cert.problem_hash and cert.problem_hash != p.content_hash():
        raise CertificateMismatch(f"problem hash {cert.problem_hash} does not match {p.content_hash()}")
    mats = cert.matrices(cone.keys())
    checks: dict[str, Any] = {}

    min_eigs = {}
    sym_err = 0.0
    for key, M in zip(cone.keys(), mats):
        sym_err = max(sym_err, float(np.abs(M - M.T).max(initial=0.0)))
        min_eigs[key] = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    worst = min(min_eigs.values())
    checks["psd"] = {"passed": worst >= -psd_tol and sym_err <= 1e-9, "min_eigenvalue": worst,
                     "asymmetry": sym_err, "per_slot": min_eigs}

    lo_hi = _sample_box(cone, box)
    rng = _rng(seed)
    pts = lo_hi[:, 0] + (lo_hi[:, 1] - lo_hi[:, 0]) * rng.random((points, cone.n))
    fvals = p.objective.evaluate_many(pts)
    rhs = cone.evaluate_element(mats, pts)
    if "lambda0" not in cone.keys():
        rhs = rhs + cert.lambda0
    resid = np.abs(fvals - cert.bound - rhs) / (1.0 + np.abs(fvals))
    checks["identity"] = {"passed": bool(resid.max() <= identity_tol), "max_residual": float(resid.max()),
                          "points": points, "seed": seed}

    D = max(cone.degree, p.objective.degree)
    small = comb(cone.n + D, cone.n) <= EXACT_CHECK_LIMIT and cone.total_dim <= EXACT_CHECK_DIM
    if exact is None:
        exact = small
    if exact:
        expanded = cone.expand_element(mats)
        if "lambda0" not in cone.keys():
            expanded = expanded + cert.lambda0
        diff = p.objective - cert.bound - expanded
        err = max((abs(c) for _, c in diff.items()), default=0.0)
        checks["coefficients"] = {"passed": err <= coeff_tol, "max_residual": err}

    verified = all(c["passed"] for c in checks.values())
    failed = [name for name, c in checks.items() if not c["passed"]]
    report = {"verified": verified, "failed": failed, **checks}
    cert.report = {**cert.report, **_jsonable(report)}
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------- nonexactness

class Exactness(str, enum.Enum):
    NOT_EXACT = "not_exact"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ExactnessVerdict:
    verdict: Exactness
    null_dim_star: int
    null_dim_other: int
    inclusion_residual: float
    detail: str = ""


def nullspace(M: np.ndarray, rank_tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical nullspace."""
    U, s, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    smax = s[0] if s.size else 0.0
    keep = s > rank_tol * smax if smax > 0 else np.zeros_like(s, dtype=bool)
    return Vt[int(keep.sum()):].T


def nonexactness_diagnostic(
    p: PmiProblem,
    u_star: Sequence[float],
    u: Sequence[float],
    rank_tol: float = 1e-8,
    *,
    feas_tol: float = 1e-9,
) -> ExactnessVerdict:
    """If ``Null(G(u*))`` lies inside ``Null(G(u))`` for a feasible ``u`` with
    ``f(u) > f(u*)``, no finite order can reach the minimum.

    Nonlinear problems use the dilated matrix ``diag(G, I - G)``.
    """
    u_star = np.asarray(u_star, dtype=float)
    u = np.asarray(u, dtype=float)
    for name, pt in (("u_star", u_star), ("u", u)):
        if pt.shape != (p.n,):
            raise ValueError(f"{name} must have {p.n} coordinates")
        if not p.is_feasible(pt, feas_tol):
            raise ValueError(f"{name} is not feasible")
    fs, fu = p.objective(u_star), p.objective(u)
    if not fu > fs:
        raise ValueError(f"need f(u) > f(u_star), got {fu} <= {fs}")
    G = p.merged()
    if p.kind is ProblemKind.NONLINEAR:
        G = dilate(G)
    A = G.evaluate(u_star)
    B = G.evaluate(u)
    Ns = nullspace(A, rank_tol)
    Nu = nullspace(B, rank_tol)
    if Ns.shape[1] == 0:
        return ExactnessVerdict(Exactness.NOT_EXACT, 0, Nu.shape[1], 0.0, "G(u*) is nonsingular")
    # distance of each null vector of G(u*) from Null(G(u))
    resid = Ns - Nu @ (Nu.T @ Ns) if Nu.shape[1] else Ns
    err = float(np.linalg.norm(resid, 2))
    tol = max(1e-6, 1e3 * rank_tol)
    if err <= tol:
        return ExactnessVerdict(Exactness.NOT_EXACT, Ns.shape[1], Nu.shape[1], err,
                                "Null(G(u*)) is contained in Null(G(u))")
    return ExactnessVerdict(Exactness.INCONCLUSIVE, Ns.shape[1], Nu.shape[1], err,
                            "nullspace inclusion fails")


def polynomial_residual(p: PmiProblem, cert: Certificate, cone) -> Polynomial:
    """``f - r - (certificate)`` expanded symbolically (small cones only)."""
    mats = cert.matrices(cone.keys())
    out = p.objective - cert.bound - cone.expand_element(mats)
    if "lambda0" not in cone.keys():
        out = out - cert.lambda0
    return out
