"""Multi-graph regularized deep matrix factorization for association completion."""

from .data import (
    AssociationDataset,
    FeatureProfile,
    SimilarityMatrix,
    SimilaritySet,
    load_association_csv,
    load_profile_csv,
    load_similarity_csv,
)
from .evaluation import (
    EvalReport,
    FoldSplit,
    auc,
    aupr,
    run_ablation,
    run_cv,
    run_loocv,
    split_axis,
    split_entries,
    topk_metrics,
)
from .graphs import (
    build_laplacian,
    combine_laplacians,
    cosine_similarity,
    laplacian,
    sparsify_pnn,
)
from .linalg import (
    SymEigen,
    TruncatedSvd,
    solve_sylvester_sym,
    spd_inverse,
    sym_eigen,
    truncated_svd,
)
from .solver import (
    FactorSet,
    FitResult,
    HyperParams,
    SolveTrace,
    fit,
    init_factors,
    objective,
    update_middle,
    update_u1,
    update_v,
    update_x,
)

__all__ = [
    "AssociationDataset",
    "FeatureProfile",
    "SimilarityMatrix",
    "SimilaritySet",
    "load_association_csv",
    "load_profile_csv",
    "load_similarity_csv",
    "EvalReport",
    "FoldSplit",
    "auc",
    "aupr",
    "run_ablation",
    "run_cv",
    "run_loocv",
    "split_axis",
    "split_entries",
    "topk_metrics",
    "build_laplacian",
    "combine_laplacians",
    "cosine_similarity",
    "laplacian",
    "sparsify_pnn",
    "SymEigen",
    "TruncatedSvd",
    "solve_sylvester_sym",
    "spd_inverse",
    "sym_eigen",
    "truncated_svd",
    "FactorSet",
    "FitResult",
    "HyperParams",
    "SolveTrace",
    "fit",
    "init_factors",
    "objective",
    "update_middle",
    "update_u1",
    "update_v",
    "update_x",
]

__version__ = "0.1.0"
