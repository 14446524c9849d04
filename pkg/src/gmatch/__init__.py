"""Graph matching (Lawler QAP) solvers, cost transforms and benchmark tools."""

from .errors import (
    GraphMatchingError,
    InfeasibleError,
    InvalidLabelingError,
    InvalidProblemError,
    ParseError,
    PreconditionError,
    SizeError,
)
from .model import (
    DUMMY,
    Geometry,
    Labeling,
    Problem,
    RunRecord,
    TracePoint,
    brute_force_solve,
    evaluate,
    is_feasible,
    to_dense,
)

__version__ = "0.1.0"

__all__ = [
    "DUMMY", "Geometry", "Labeling", "Problem", "RunRecord", "TracePoint",
    "brute_force_solve", "evaluate", "is_feasible", "to_dense",
    "GraphMatchingError", "InfeasibleError", "InvalidLabelingError",
    "InvalidProblemError", "ParseError", "PreconditionError", "SizeError",
]
