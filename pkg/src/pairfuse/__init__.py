"""Subgroup discovery in regression by concave pairwise fusion of intercepts.

Typical use::

    from pairfuse import make_dataset, PenaltySpec, solution_path, select_lambda
    ds = make_dataset(y, X)
    path = select_lambda(solution_path(ds, PenaltySpec("MCP")), ds)
    part = path.best.partition
"""

__version__ = "0.1.0"

from .core import (PENALTY_FAMILIES, Dataset, FusionFit, PairFuseError, PenaltySpec,
                   SolverConfig, SubgroupPartition, Truth, make_dataset, make_partition)
from .penalty import penalty_value, prox_eta, soft_threshold
from .admm import fit, precompute
from .pathsel import (PathResult, extract_partition, lambda_grid, modified_bic,
                      select_lambda, solution_path)
from .inference import (InferenceReport, confidence_interval, infer, oracle_fit,
                        test_group_difference, test_heterogeneity)
from .metrics import davies_bouldin, rand_index, rmse_beta, rmse_mu
from .simulate import MethodSpec, StudySpec, gen_example, run_study

__all__ = [
    "PENALTY_FAMILIES", "Dataset", "FusionFit", "PairFuseError", "PenaltySpec", "SolverConfig",
    "SubgroupPartition", "Truth", "make_dataset", "make_partition",
    "penalty_value", "prox_eta", "soft_threshold", "fit", "precompute",
    "PathResult", "extract_partition", "lambda_grid", "modified_bic", "select_lambda",
    "solution_path", "InferenceReport", "confidence_interval", "infer", "oracle_fit",
    "test_group_difference", "test_heterogeneity", "davies_bouldin", "rand_index",
    "rmse_beta", "rmse_mu", "MethodSpec", "StudySpec", "gen_example", "run_study",
]
