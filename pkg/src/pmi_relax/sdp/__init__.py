"""Semidefinite programming back end: assembly, interior-point solver, SDPA I/O."""

from .assembly import SamplePlan, SamplingError, assemble_by_coeffs, assemble_by_points, plan_samples
from .ipm import IpmOptions, solve_ipm
from .problem import SdpBlock, SdpProblem, SolverResult, SolverStatus
from .sdpa import export_sdpa, read_sdpa

__all__ = [
    "SamplePlan", "SamplingError", "assemble_by_coeffs", "assemble_by_points", "plan_samples",
    "IpmOptions", "solve_ipm", "SdpBlock", "SdpProblem", "SolverResult", "SolverStatus",
    "export_sdpa", "read_sdpa",
]
