"""Spectral graph convolution for directed graphs.

The propagation operator symmetrizes the Perron-conjugated random-walk
transition matrix of a strongly connected, self-looped digraph; a small numpy
engine trains two/three-layer convolution models on top of it.
"""

from .errors import ConvergenceError, DGCNError, NumericError, ParseError, ShapeError, ValidationError
from .graph import (
    DirectedGraph,
    NodeData,
    add_self_loops,
    is_strongly_connected,
    largest_scc_subgraph,
    load_edgelist,
    load_node_data,
    strongly_connected_components,
    write_edgelist,
)
from .nn import ModelParams, adam_step, backward, forward, glorot_init, masked_cross_entropy, sgd_step
from .pipeline import (
    ExperimentResult,
    TrainConfig,
    build_features,
    compare,
    confidence_interval,
    evaluate,
    run_experiment,
    split_nodes,
    train,
)
from .spectral import (
    PerronVector,
    TransitionMatrix,
    baseline_sym_propagation,
    dgcn_propagation,
    directed_laplacian,
    perron_vector,
    propagation_matrix,
    transition_matrix,
)

__version__ = "0.1.0"
