"""Two-phase spectrum-preserving graph sparsification and spectral clustering.

Phase 1 keeps a spanning tree plus the spectrally most critical off-tree
edges (ranked by approximate generalized-eigenvector embedding, recovered
until the bottom Laplacian eigenvalues stabilize). Phase 2 rescales the
surviving edge weights by constrained SGD to tighten the spectral match.
Eigenvectors computed on the sparsifier are smoothed against the original
graph with a weighted-Jacobi low-pass filter before k-means.
"""

from .cluster import KMeansResult, kmeans, spectral_cluster
from .dataio import (
    Dataset,
    load_dense_csv,
    load_graph,
    load_libsvm,
    save_graph,
    standardize,
)
from .eig import SpectralEmbedding, bottom_eigenpairs, eigenvalue_variation_ratio, filter_eigenvectors
from .evaluate import AccuracyReport, averaged_run, clustering_accuracy
from .graph import EdgeVector, WeightedGraph, build_knn_graph, connected_components
from .pipeline import PipelineConfig, PipelineResult, run_compare, run_pipeline
from .scale import ScalingState, SgdParams, initial_scale, sgd_scale
from .sparsify import (
    GeneralizedEigenEstimate,
    PencilMetrics,
    Sparsifier,
    condition_metrics,
    edge_criticality,
    generalized_power_iterate,
    recover_off_tree_edges,
)
from .tree import SpanningTree, build_spanning_tree, total_stretch, tree_path_resistance

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "Dataset",
    "EdgeVector",
    "GeneralizedEigenEstimate",
    "KMeansResult",
    "PencilMetrics",
    "PipelineConfig",
    "PipelineResult",
    "ScalingState",
    "SgdParams",
    "SpanningTree",
    "Sparsifier",
    "SpectralEmbedding",
    "WeightedGraph",
    "averaged_run",
    "bottom_eigenpairs",
    "build_knn_graph",
    "build_spanning_tree",
    "clustering_accuracy",
    "condition_metrics",
    "connected_components",
    "edge_criticality",
    "eigenvalue_variation_ratio",
    "filter_eigenvectors",
    "generalized_power_iterate",
    "initial_scale",
    "kmeans",
    "load_dense_csv",
    "load_graph",
    "load_libsvm",
    "recover_off_tree_edges",
    "run_compare",
    "run_pipeline",
    "save_graph",
    "sgd_scale",
    "spectral_cluster",
    "standardize",
    "total_stretch",
    "tree_path_resistance",
    "__version__",
]
