"""Upper bounds on the joint spectral radius from sparse SOS relaxations."""

from .driver import (
    BisectionError,
    BoundOptions,
    SolverIndeterminateError,
    bisect,
    compute_bound,
    dense_bound,
    sparse_bound,
    sparsejsr,
    support_restricted_bound,
)
from .matio import (
    BoundReport,
    MatrixSet,
    MatrixSetError,
    control_set,
    dump_matrix_set,
    load_matrix_set,
    load_report,
    random_sparse_set,
    save_report,
)
from .sdpsolve import SolverOptions, Status, solve_feasibility, verify_certificate
from .spectral import product_lower_bound, spectral_radius

__all__ = [
    "BisectionError",
    "BoundOptions",
    "BoundReport",
    "MatrixSet",
    "MatrixSetError",
    "SolverIndeterminateError",
    "SolverOptions",
    "Status",
    "bisect",
    "compute_bound",
    "control_set",
    "dense_bound",
    "dump_matrix_set",
    "load_matrix_set",
    "load_report",
    "product_lower_bound",
    "random_sparse_set",
    "save_report",
    "solve_feasibility",
    "sparse_bound",
    "sparsejsr",
    "spectral_radius",
    "support_restricted_bound",
    "verify_certificate",
]
