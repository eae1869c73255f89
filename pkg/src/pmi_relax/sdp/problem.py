"""Block-structured SDP in equality form with free variables.

    minimize    sum_j <C_j, X_j> + c_free . r
    subject to  sum_j <A_{c,j}, X_j> + B_c . r = b_c     for every row c
                X_j PSD,  r free
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class SdpBlock:
    size: int
    A: np.ndarray                     # (N, s, s), symmetric slices
    C: np.ndarray | None = None       # (s, s); None means zero
    label: str = ""

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 3 or self.A.shape[1:] != (self.size, self.size):
            raise ValueError(f"block {self.label!r}: A must have shape (N, {self.size}, {self.size})")
        if self.C is not None:
            self.C = np.asarray(self.C, dtype=float).reshape(self.size, self.size)

    def objective_matrix(self) -> np.ndarray:
        return np.zeros((self.size, self.size)) if self.C is None else self.C


@dataclass
class SdpProblem:
    blocks: list[SdpBlock]
    b: np.ndarray
    B: np.ndarray | None = None       # (N, nf)
    c_free: np.ndarray | None = None  # (nf,)
    free_names: list[str] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).ravel()
        N = self.b.shape[0]
        if self.B is None:
            self.B = np.zeros((N, 0))
        self.B = np.asarray(self.B, dtype=float).reshape(N, -1)
        nf = self.B.shape[1]
        self.c_free = np.zeros(nf) if self.c_free is None else np.asarray(self.c_free, dtype=float).ravel()
        if self.c_free.shape[0] != nf:
            raise ValueError("c_free length must match the free-variable count")
        if not self.free_names:
            self.free_names = [f"r{i}" for i in range(nf)]
        for blk in self.blocks:
            if blk.A.shape[0] != N:
                raise ValueError(f"block {blk.label!r} has {blk.A.shape[0]} rows, expected {N}")

    @property
    def n_constraints(self) -> int:
        return self.b.shape[0]

    @property
    def n_free(self) -> int:
        return self.B.shape[1]

    @property
    def block_sizes(self) -> list[int]:
        return [blk.size for blk in self.blocks]

    def nbytes(self) -> int:
        return sum(blk.A.nbytes for blk in self.blocks) + self.B.nbytes

    def objective_value(self, X: list[np.ndarray], r: np.ndarray) -> float:
        return float(sum(np.vdot(blk.objective_matrix(), x) for blk, x in zip(self.blocks, X))
                     + self.c_free @ r)

    def residual(self, X: list[np.ndarray], r: np.ndarray) -> np.ndarray:
        """``b - A(X) - B r`` for every row."""
        out = self.b - self.B @ r
        for blk, x in zip(self.blocks, X):
            out = out - blk.A.reshape(self.n_constraints, -1) @ np.asarray(x).ravel()
        return out


class SolverStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    NEAR_OPTIMAL = "near_optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    STALLED = "stalled"

    @property
    def ok(self) -> bool:
        return self in (SolverStatus.OPTIMAL, SolverStatus.NEAR_OPTIMAL)


@dataclass
class SolverResult:
    status: SolverStatus
    primal_objective: float
    dual_objective: float
    X: list[np.ndarray]
    r: np.ndarray
    y: np.ndarray
    Z: list[np.ndarray]
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    wall_time: float
    message: str = ""
    presolve: dict[str, Any] = field(default_factory=dict)

    def summary(self) -> str:
        return (f"{self.status.value}: obj {self.primal_objective:.10g} "
                f"(pinf {self.primal_residual:.1e}, dinf {self.dual_residual:.1e}, gap {self.gap:.1e}, "
                f"{self.iterations} it, {self.wall_time:.2f}s)")
