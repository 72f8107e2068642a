"""modrec: recover Java module structure from fully-qualified class names.

The pipeline embeds class names lexically (or consumes external vectors),
reduces them under a cosine neighborhood, clusters densities hierarchically,
and repairs singleton modules and split packages. Architectures are scored
with a2a, homogeneity/completeness, and modularization quality.
"""

from .clustering import ClusterAssignment, CondensedTree, cluster, mutual_reachability
from .corpus import (
    Architecture,
    ClassEntity,
    CorpusManifest,
    extract_ground_truth,
    load_name_list,
    scan_sources,
)
from .embedding import (
    EmbeddingMatrix,
    TokenizedName,
    embed_lexical,
    granularity_view,
    load_external_embeddings,
    tokenize,
)
from .errors import InputError, InvariantViolation
from .metrics import (
    ContingencyTable,
    DependencyGraph,
    TransformCost,
    a2a,
    contingency,
    h_c_scores,
    load_dependencies,
    mq,
)
from .pipeline import PipelineConfig, RecoveryResult, RunReport, evaluate, recover, report_table
from .reduction import KnnGraph, ReducedMatrix, ReductionParams, knn_graph, reduce
from .repair import build_ctfidf, finalize, merge_singletons, repair, resolve_split_packages
from .synthetic import SyntheticSpec, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "ClassEntity",
    "ClusterAssignment",
    "CondensedTree",
    "ContingencyTable",
    "CorpusManifest",
    "DependencyGraph",
    "EmbeddingMatrix",
    "InputError",
    "InvariantViolation",
    "KnnGraph",
    "PipelineConfig",
    "RecoveryResult",
    "ReducedMatrix",
    "ReductionParams",
    "RunReport",
    "SyntheticSpec",
    "TokenizedName",
    "TransformCost",
    "a2a",
    "build_ctfidf",
    "cluster",
    "contingency",
    "embed_lexical",
    "evaluate",
    "extract_ground_truth",
    "finalize",
    "gen_synthetic",
    "granularity_view",
    "h_c_scores",
    "knn_graph",
    "load_dependencies",
    "load_external_embeddings",
    "load_name_list",
    "merge_singletons",
    "mq",
    "mutual_reachability",
    "recover",
    "reduce",
    "repair",
    "report_table",
    "resolve_split_packages",
    "scan_sources",
    "tokenize",
]
