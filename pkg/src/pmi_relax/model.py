"""PMI-constrained problem data, the JSON problem format, and preprocessing."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .poly import Polynomial, PolyMatrix, block_diag

log = logging.getLogger(__name__)

#: smallest eigenvalue still counted as PSD when sampling K
FEASIBILITY_TOL = 1e-10


class ProblemFormatError(ValueError):
    """Problem file does not match the expected schema."""


class EmptySetError(RuntimeError):
    """Rejection sampling found (almost) no feasible points."""


class ProblemKind(str, enum.Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class BlockTag(str, enum.Enum):
    MATRIX = "matrix"
    SCALAR = "scalar"


@dataclass(frozen=True)
class Block:
    matrix: PolyMatrix

    @property
    def q(self) -> int:
        return self.matrix.q

    @property
    def tag(self) -> BlockTag:
        return BlockTag.SCALAR if self.matrix.q == 1 else BlockTag.MATRIX

    @property
    def degree(self) -> int:
        return self.matrix.degree


@dataclass(frozen=True)
class PmiProblem:
    """``min f(x)`` subject to ``G_i(x) ⪰ 0`` for every block ``i``."""

    n: int
    objective: Polynomial
    blocks: tuple[Block, ...]
    box: tuple[tuple[float, float], ...] | None = None
    known_optimum: float | None = None
    name: str = ""

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("problem needs at least one block")
        if self.objective.n != self.n:
            raise ValueError("objective variable count mismatch")
        for b in self.blocks:
            if b.matrix.n != self.n:
                raise ValueError("block variable count mismatch")
        if self.box is None:
            object.__setattr__(self, "box", tuple((-1.0, 1.0) for _ in range(self.n)))
        elif len(self.box) != self.n:
            raise ValueError("box must give one interval per variable")

    @classmethod
    def from_matrices(cls, objective: Polynomial, mats: Sequence[PolyMatrix], **kw) -> PmiProblem:
        return cls(objective.n, objective, tuple(Block(M) for M in mats), **kw)

    @property
    def kind(self) -> ProblemKind:
        deg = max(b.degree for b in self.blocks)
        return ProblemKind.LINEAR if deg <= 1 else ProblemKind.NONLINEAR

    @property
    def t(self) -> int:
        return len(self.blocks)

    @property
    def q_total(self) -> int:
        return sum(b.q for b in self.blocks)

    def merged(self) -> PolyMatrix:
        """All blocks assembled into one block-diagonal matrix."""
        return block_diag(*(b.matrix for b in self.blocks))

    def merge_blocks(self) -> PmiProblem:
        return replace(self, blocks=(Block(self.merged()),))

    def with_objective(self, f: Polynomial, known_optimum: float | None = None) -> PmiProblem:
        return replace(self, objective=f, known_optimum=known_optimum)

    def min_eigenvalues(self, points: np.ndarray) -> np.ndarray:
        """Smallest eigenvalue over all blocks at each point, shape ``(P,)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(pts.shape[0], np.inf)
        for b in self.blocks:
            vals = b.matrix.evaluate_many(pts)
            out = np.minimum(out, np.linalg.eigvalsh(vals)[:, 0])
        return out

    def is_feasible(self, point, tol: float = FEASIBILITY_TOL) -> bool:
        return bool(self.min_eigenvalues(np.asarray(point, dtype=float)[None, :])[0] >= -tol)

    def to_json(self) -> dict[str, Any]:
        blocks = []
        for b in self.blocks:
            entries = [
                {"i": i + 1, "j": j + 1, "p": p.to_json()}
                for (i, j), p in b.matrix.upper_items()
                if not p.is_zero()
            ]
            blocks.append({"q": b.q, "entries": entries})
        data: dict[str, Any] = {"n": self.n, "objective": self.objective.to_json(), "blocks": blocks}
        data["box"] = [list(iv) for iv in self.box]
        if self.known_optimum is not None:
            data["known_optimum"] = self.known_optimum
        if self.name:
            data["name"] = self.name
        return data

    def content_hash(self) -> str:
        """Stable hex digest of the problem data (name excluded)."""
        data = self.to_json()
        data.pop("name", None)
        data.pop("known_optimum", None)
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- file format

_TOP_KEYS = {"n", "objective", "blocks", "box", "known_optimum", "name"}
_BLOCK_KEYS = {"q", "entries"}
_ENTRY_KEYS = {"i", "j", "p"}
_TERM_KEYS = {"c", "e"}


def _check_keys(obj: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, Mapping):
        raise ProblemFormatError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ProblemFormatError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ProblemFormatError(f"{where}: missing key(s) {sorted(missing)}")


def _parse_poly(data: Any, n: int, where: str) -> Polynomial:
    if not isinstance(data, list):
        raise ProblemFormatError(f"{where}: polynomial must be a list of terms")
    terms: dict[tuple[int, ...], float] = {}
    for k, t in enumerate(data):
        tw = f"{where}[{k}]"
        _check_keys(t, _TERM_KEYS, _TERM_KEYS, tw)
        c, e = t["c"], t["e"]
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise ProblemFormatError(f"{tw}.c: expected a finite number")
        if not isinstance(e, list) or len(e) != n:
            raise ProblemFormatError(f"{tw}.e: expected {n} exponents (variable-count mismatch)")
        if any(isinstance(x, bool) or not isinstance(x, int) or x < 0 for x in e):
            raise ProblemFormatError(f"{tw}.e: exponents must be nonnegative integers")
        terms[tuple(e)] = terms.get(tuple(e), 0.0) + float(c)
    return Polynomial(n, terms)


def problem_from_json(data: Any) -> PmiProblem:
    _check_keys(data, _TOP_KEYS, {"n", "objective", "blocks"}, "problem")
    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ProblemFormatError("problem.n: expected a positive integer")
    objective = _parse_poly(data["objective"], n, "problem.objective")
    if not isinstance(data["blocks"], list) or not data["blocks"]:
        raise ProblemFormatError("problem.blocks: expected a nonempty list")
    blocks = []
    for bi, bdata in enumerate(data["blocks"]):
        where = f"problem.blocks[{bi}]"
        _check_keys(bdata, _BLOCK_KEYS, _BLOCK_KEYS, where)
        q = bdata["q"]
        if isinstance(q, bool) or not isinstance(q, int) or q < 1:
            raise ProblemFormatError(f"{where}.q: expected a positive integer")
        if not isinstance(bdata["entries"], list):
            raise ProblemFormatError(f"{where}.entries: expected a list")
        entries: dict[tuple[int, int], Polynomial] = {}
        for ei, e in enumerate(bdata["entries"]):
            ew = f"{where}.entries[{ei}]"
            _check_keys(e, _ENTRY_KEYS, _ENTRY_KEYS, ew)
            i, j = e["i"], e["j"]
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in (i, j)):
                raise ProblemFormatError(f"{ew}: i and j must be integers")
            if not (1 <= i <= q and 1 <= j <= q):
                raise ProblemFormatError(f"{ew}: index ({i}, {j}) outside 1..{q}")
            if i > j:
                raise ProblemFormatError(
                    f"{ew}: non-symmetric block storage, entry ({i}, {j}) lies below the diagonal; "
                    "give only i <= j"
                )
            if (i - 1, j - 1) in entries:
                raise ProblemFormatError(f"{ew}: duplicate entry ({i}, {j})")
            entries[(i - 1, j - 1)] = _parse_poly(e["p"], n, f"{ew}.p")
        blocks.append(Block(PolyMatrix.from_upper(n, q, entries)))
    box = None
    if "box" in data:
        raw = data["box"]
        if not isinstance(raw, list) or len(raw) != n:
            raise ProblemFormatError(f"problem.box: expected {n} intervals")
        box_l = []
        for k, iv in enumerate(raw):
            if not isinstance(iv, list) or len(iv) != 2 or not iv[0] < iv[1]:
                raise ProblemFormatError(f"problem.box[{k}]: expected [lo, hi] with lo < hi")
            box_l.append((float(iv[0]), float(iv[1])))
        box = tuple(box_l)
    known = data.get("known_optimum")
    if known is not None and (isinstance(known, bool) or not isinstance(known, (int, float))):
        raise ProblemFormatError("problem.known_optimum: expected a number")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise ProblemFormatError("problem.name: expected a string")
    return PmiProblem(n, objective, tuple(blocks), box=box,
                      known_optimum=None if known is None else float(known), name=name)


def load_problem(path: str | Path) -> PmiProblem:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: invalid JSON ({exc})") from exc
    return problem_from_json(data)


def save_problem(p: PmiProblem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(p.to_json(), indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- sampling

def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def sample_feasible(
    p: PmiProblem,
    count: int,
    seed: int = 0,
    *,
    max_draws: int = 10**7,
    batch: int = 20000,
    tol: float = FEASIBILITY_TOL,
) -> np.ndarray:
    """Rejection-sample ``count`` points of K from the problem's box."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = _rng(seed)
    lo = np.array([iv[0] for iv in p.box])
    hi = np.array([iv[1] for iv in p.box])
    kept: list[np.ndarray] = []
    have = 0
    drawn = 0
    while have < count and drawn < max_draws:
        m = min(batch, max_draws - drawn)
        pts = lo + (hi - lo) * rng.random((m, p.n))
        drawn += m
        ok = p.min_eigenvalues(pts) >= -tol
        if ok.any():
            kept.append(pts[ok])
            have += int(ok.sum())
    if have < count:
        rate = have / max(drawn, 1)
        if rate < 1e-6:
            raise EmptySetError(f"set appears empty or thin: {have} feasible of {drawn} draws")
        raise EmptySetError(f"only {have} feasible points after {drawn} draws (rate {rate:.2e})")
    return np.concatenate(kept)[:count]


# ---------------------------------------------------------------- scaling

@dataclass(frozen=True)
class ScalingReport:
    bounds: tuple[float, ...]
    factors: tuple[float, ...]
    methods: tuple[str, ...]
    notes: tuple[str, ...] = field(default=())


def scale_for_contraction(
    p: PmiProblem,
    overrides: Mapping[int, float] | Sequence[float | None] | None = None,
    *,
    samples: int = 10**5,
    seed: int = 0,
    inflate: float = 1.05,
) -> tuple[PmiProblem, ScalingReport]:
    """Divide each block by an upper bound of its largest eigenvalue on K.

    With ``overrides`` (block index -> bound) the user bound is used as is.
    Otherwise the bound is the sampled maximum times ``inflate``, which only
    yields a valid certificate if the estimate really bounds the spectrum.
    Linear problems are returned unchanged.
    """
    t = len(p.blocks)
    if p.kind is ProblemKind.LINEAR:
        return p, ScalingReport((1.0,) * t, (1.0,) * t, ("none",) * t)
    if overrides is None:
        ov: dict[int, float] = {}
    elif isinstance(overrides, Mapping):
        ov = dict(overrides)
    else:
        ov = {i: v for i, v in enumerate(overrides) if v is not None}
    for i, v in ov.items():
        if not v > 0:
            raise ValueError(f"scaling bound for block {i} must be positive, got {v}")
    pts = None
    bounds, methods, notes = [], [], []
    for i, b in enumerate(p.blocks):
        if i in ov:
            bounds.append(float(ov[i]))
            methods.append("user-supplied")
            continue
        if pts is None:
            pts = sample_feasible(p, samples, seed)
        lam = float(np.linalg.eigvalsh(b.matrix.evaluate_many(pts))[:, -1].max())
        est = inflate * lam if lam > 0 else 1.0
        msg = (f"block {i}: largest eigenvalue estimated from {samples} samples as {lam:.6g}; "
               f"using {est:.6g}; certificates are valid only if this bounds the spectrum on K")
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
        bounds.append(est)
        methods.append("sample-based")
    blocks = tuple(Block(b.matrix * (1.0 / s)) for b, s in zip(p.blocks, bounds))
    report = ScalingReport(tuple(bounds), tuple(1.0 / s for s in bounds), tuple(methods), tuple(notes))
    return replace(p, blocks=blocks), report
