"""Embedding spanning oriented trees in dense digraphs.

A library implementing a randomized, always-verified pipeline that embeds
oriented trees with bounded in-/out-degree into digraphs whose minimum
semidegree exceeds half the host size: guide-set steered random core
embeddings, skew-bounded bipartite matchings, a nested tree decomposition,
connector-buffer path attachment, and switching-based absorption for the
spanning endgame.
"""

from .digraph import (
    Digraph,
    Sign,
    check_inherited_degree,
    gen_semidegree_digraph,
    min_semidegree,
    neighbors,
    sample_disjoint_subsets,
)
from .decompose import TreeDecomposition, check_decomposition, decompose
from .embedder import (
    AbsorberState,
    PhaseFailure,
    build_absorber,
    complete_absorption,
    embed_almost_spanning,
    embed_spanning,
    embed_stars,
    attach_path_trees,
    embed_core_with_leaf_sets,
)
from .embedding import Embedding
from .guides import GuideEntry, GuideSystem, XYLabeling, build_guide, build_xy_labeling, restrict_guides
from .matching import (
    BipartitePattern,
    Matching,
    embed_small_forest,
    embed_tree_copies,
    find_perfect_matching,
    hall_violator,
    is_skew_bounded,
    matching_from_skew,
    max_matching,
)
from .oracle import TrialConfig, TrialReport, brute_force_contains, run_trials, verify_embedding
from .params import ParamSchedule, almost_defaults, spanning_defaults
from .trees import (
    BarePath,
    OrientedTree,
    PrefixOrdering,
    canonical_rooted_form,
    find_bare_paths,
    find_independent_leaves,
    gen_random_tree,
    max_semidegree,
    prefix_order,
    split_tree,
)

__version__ = "0.1.0"
