"""Fit distance matrices by ultrametrics and tree metrics, minimizing L1 error."""

from .core import (
    DistanceMatrix,
    EdgeSet,
    FittedTree,
    HierarchySequence,
    Partition,
    UltrametricTree,
    WeightedTree,
    clique_edges,
    is_ultrametric,
    lp_norm_error,
    sym_diff_size,
)
from .corrclust import corr_cluster, corr_cluster_cost
from .hca import fit_hca, fit_hca_report
from .hcc import fit_hcc
from .io import parse_matrix, parse_newick, write_newick
from .lp import HccInstance, build_lp, cost_edges, lp_cost, solve_lp
from .treemetric import fit_tree_metric
from .ultrametric import fit_ultrametric

__all__ = [
    "DistanceMatrix",
    "EdgeSet",
    "FittedTree",
    "HccInstance",
    "HierarchySequence",
    "Partition",
    "UltrametricTree",
    "WeightedTree",
    "build_lp",
    "clique_edges",
    "corr_cluster",
    "corr_cluster_cost",
    "cost_edges",
    "fit_hca",
    "fit_hca_report",
    "fit_hcc",
    "fit_tree_metric",
    "fit_ultrametric",
    "is_ultrametric",
    "lp_cost",
    "lp_norm_error",
    "parse_matrix",
    "parse_newick",
    "solve_lp",
    "sym_diff_size",
    "write_newick",
]

__version__ = "0.1.0"
