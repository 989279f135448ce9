"""rho: semi-supervised graph anomaly detection with adaptive spectral filters.

The package trains a two-view detector on a graph with node features and a
small set of labeled normal nodes. Each view propagates encoded features
through trainable frequency-response filters of the self-looped normalized
Laplacian (one coefficient per layer cross-channel, one per channel per
layer channel-wise), pulls labeled normals toward per-view centers, and
aligns the views with a contrastive objective. Anomaly scores are distances
to the centers.
"""

from .data import (Dataset, Split, SynthSpec, inject_contamination,
                   load_dataset, read_binary_features, regime_spec,
                   sample_split, save_dataset, synth_dataset,
                   write_binary_features)
from .evaluation import ScoreTable, anomaly_scores, auprc, auroc
from .exceptions import (CapExceededError, DivergenceError, GenerationError,
                         InputError, NonFiniteError, RhoError,
                         UndefinedMetricError)
from .graph import (Graph, HomophilyReport, SparseSymOp, build_graph,
                    laplacian_apply, laplacian_operator, node_homophily)
from .model import (ACTIVATIONS, ForwardState, ModelConfig, ModelParams,
                    compute_centers, encode, forward, init_params,
                    load_checkpoint, project, propagate_ccr, propagate_cwr,
                    save_checkpoint)
from .seeding import derive_seed
from .spectral import (FrequencyResponse, SpectralCoefficients,
                       SpectralDecomposition, apply_node_filter,
                       decoupled_frequency_loss, eigendecompose,
                       filter_equivalence_error, filter_response_curve,
                       fourier, inverse_fourier, optimal_filter_response)
from .training import (LossBreakdown, OptimizerState, TrainConfig,
                       TrainingLog, adam_step, backward, fit, init_optimizer,
                       loss_gna, loss_one_class, total_loss)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS", "CapExceededError", "Dataset", "DivergenceError",
    "ForwardState", "FrequencyResponse", "GenerationError", "Graph",
    "HomophilyReport", "InputError", "LossBreakdown", "ModelConfig",
    "ModelParams", "NonFiniteError", "OptimizerState", "RhoError",
    "ScoreTable", "SparseSymOp", "SpectralCoefficients",
    "SpectralDecomposition", "Split", "SynthSpec", "TrainConfig",
    "TrainingLog", "UndefinedMetricError", "adam_step", "anomaly_scores",
    "apply_node_filter", "auprc", "auroc", "backward", "build_graph",
    "compute_centers", "decoupled_frequency_loss", "derive_seed", "encode",
    "eigendecompose", "filter_equivalence_error", "filter_response_curve",
    "fit", "forward", "fourier", "init_optimizer", "init_params",
    "inject_contamination", "inverse_fourier", "laplacian_apply",
    "laplacian_operator", "load_checkpoint", "load_dataset", "loss_gna",
    "loss_one_class", "node_homophily", "optimal_filter_response", "project",
    "propagate_ccr", "propagate_cwr", "read_binary_features", "regime_spec",
    "sample_split", "save_checkpoint", "save_dataset", "synth_dataset",
    "total_loss", "write_binary_features",
]
