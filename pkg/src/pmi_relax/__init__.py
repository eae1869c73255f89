"""Kronecker-power Positivstellensatz relaxations for polynomial matrix inequalities."""

from .cone import ConeForm, ConeSizeError, ConeSpec, build_cone
from .model import PmiProblem, load_problem, save_problem
from .poly import PolyMatrix, Polynomial
from .sdp.relax import RelaxOptions, RelaxOutcome, ResourceLimitError, relax

__version__ = "0.1.0"

__all__ = [
    "ConeForm", "ConeSizeError", "ConeSpec", "build_cone", "PmiProblem", "load_problem", "save_problem",
    "PolyMatrix", "Polynomial", "RelaxOptions", "RelaxOutcome", "ResourceLimitError", "relax",
]
