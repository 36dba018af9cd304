"""
cqrsketch - learned sparse compression of embedding tables

Sketch matrices, k-means factorization, multi-step and dense CQR for least
squares, Monte-Carlo checks of the convergence bound, a streaming CQR
embedding trainer and table-collapse diagnostics.
"""

__version__ = "0.1.0"

# High-level API functions
from .api import run_collapse, run_lstsq, run_train, run_verify
from .core.cluster import KMeansResult, kmeans, product_quantize
from .core.collapse import AssignmentTable, collapse_report
from .core.linalg import rho, singular_values, solve_least_squares
from .core.models import ConvergenceTrace, RunManifest, StepSummary
from .core.sketch import SketchFamily, SketchSpec, SparseHashMatrix
from .core.solver import (
    LeastSquaresProblem,
    SolverKind,
    SolverVariant,
    dense_cqr,
    make_problem,
    multi_step_cqr,
)
from .core.theory import BoundParams, theorem_bound
from .core.training import CompressedTable, SyntheticStream, TrainConfig, train
from .parsers.table_parser import AssignmentTableParser
from .utils.validation import CQRValidationError, ValidationReport
from .writers.csv_writer import CSVWriter

# Public API
__all__ = [
    # Version
    "__version__",
    # Sketches and clustering
    "SketchFamily",
    "SketchSpec",
    "SparseHashMatrix",
    "KMeansResult",
    "kmeans",
    "product_quantize",
    # Linear algebra
    "rho",
    "singular_values",
    "solve_least_squares",
    # Solvers and bounds
    "LeastSquaresProblem",
    "SolverKind",
    "SolverVariant",
    "make_problem",
    "multi_step_cqr",
    "dense_cqr",
    "BoundParams",
    "theorem_bound",
    # Training
    "CompressedTable",
    "SyntheticStream",
    "TrainConfig",
    "train",
    # Collapse
    "AssignmentTable",
    "AssignmentTableParser",
    "collapse_report",
    # Results and IO
    "ConvergenceTrace",
    "StepSummary",
    "RunManifest",
    "CSVWriter",
    # Validation
    "CQRValidationError",
    "ValidationReport",
    # High-level API functions
    "run_lstsq",
    "run_verify",
    "run_train",
    "run_collapse",
]
