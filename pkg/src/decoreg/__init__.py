"""Feature-split sparse regression with design decorrelation.

The core pipeline standardizes a regression problem, whitens its row Gram,
partitions columns across independent lasso workers, merges their
coefficients, and optionally re-estimates the selected support by ridge.
`datagen` draws the synthetic benchmark designs, `experiments` runs
replication sweeps to CSV, and `decoreg.service` / `decoreg.cli` expose the
whole thing over HTTP and the command line.
"""

from .datagen import Dataset, ModelSpec, export_csv, generate, import_csv
from .deco import (
    METHODS,
    DecoConfig,
    FitResult,
    Partition,
    partition_columns,
    run_deco,
    run_method,
)
from .experiments import (
    ExperimentConfig,
    load_config,
    run_diagnostics,
    run_experiment,
)
from .lasso import cd_fit, ebic_select, kkt_check, lambda_grid, lasso_path
from .linalg import center_scale, ridge_solve, spd_inv_sqrt, sym_eig
from .metrics import DiagnosticsReport, Metrics, compute_metrics, design_diagnostics

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DecoConfig",
    "DiagnosticsReport",
    "ExperimentConfig",
    "FitResult",
    "METHODS",
    "Metrics",
    "ModelSpec",
    "Partition",
    "cd_fit",
    "center_scale",
    "compute_metrics",
    "design_diagnostics",
    "ebic_select",
    "export_csv",
    "generate",
    "import_csv",
    "kkt_check",
    "lambda_grid",
    "lasso_path",
    "load_config",
    "partition_columns",
    "ridge_solve",
    "run_deco",
    "run_diagnostics",
    "run_experiment",
    "run_method",
    "spd_inv_sqrt",
    "sym_eig",
    "__version__",
]
