"""Spectrally self-regularized graph neural networks in plain numpy.

Polynomial graph filter banks with a parallel spectral path that evaluates
each layer's frequency responses on the eigenvalues of the shift operator.
Training can pull the largest response of every layer toward one, which
keeps the learned filters stable under small perturbations of the graph.
"""

from .data import (
    Dataset,
    Sample,
    build_movie_graph,
    load_movielens,
    movie_dataset,
    source_localization_dataset,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    NumericError,
    SpecGNNError,
)
from .graph import (
    Graph,
    PermutationMap,
    knn_sparsify,
    normalize_shift,
    permute_graph,
    permute_signal,
    perturb,
    sbm_generate,
)
from .linalg import EigenDecomposition, gft, inverse_gft, jacobi_eigh, operator_norm
from .model import (
    FilterBank,
    ModelParams,
    filter_apply,
    gnn_forward,
    init_params,
    spectral_outputs,
    spectral_response,
    stability_constant,
    trunk,
)
from .training import Adam, LossSpec, SGD, TrainConfig, finite_diff_check, objective, train

__version__ = "0.1.0"

__all__ = [
    "Adam", "ConfigError", "ConvergenceError", "DataError", "Dataset",
    "EigenDecomposition", "FilterBank", "Graph", "LossSpec", "ModelParams",
    "NumericError", "PermutationMap", "SGD", "Sample", "SpecGNNError",
    "TrainConfig", "build_movie_graph", "filter_apply", "finite_diff_check",
    "gft", "gnn_forward", "init_params", "inverse_gft", "jacobi_eigh",
    "knn_sparsify", "load_movielens", "movie_dataset", "normalize_shift",
    "objective", "operator_norm", "permute_graph", "permute_signal", "perturb",
    "sbm_generate", "source_localization_dataset", "spectral_outputs",
    "spectral_response", "stability_constant", "train", "trunk",
]
