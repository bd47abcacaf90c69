"""Desk-scale simulator of federated learning with collaborative label-noise
filtering, relabeling, and predictive-consistency sample re-selection."""

from .config import RunConfig, ConfigError
from .data import LabeledDataset, make_blobs, train_test_split
from .federation import (ClientState, Environment, RunResult, ServerState, fedavg_aggregate,
                         final_filtering_accuracy, prepare_environment, run_experiment,
                         run_protocol, select_clients)
from .metrics import RoundRecord, filtering_accuracy, test_accuracy, training_stability
from .model import (MixedSample, ModelParams, batch_loss, cross_entropy, forward_logits,
                    init_params, local_train, mixup_pair, per_sample_losses, predict_proba)
from .noise_filter import (FilterBank, GmmFit, GmmParams, aggregate_filters, filter_split,
                           fit_local_gmm, gmm_posterior_clean, relabel)
from .partition import (NoiseAssignment, PartitionPlan, inject_noise, partition_dirichlet,
                        partition_iid)
from .rng import RngStream
from .sampler import ClientBias, choose_training_set, debias_logits, reselect, update_bias

__version__ = "0.1.0"

__all__ = [
    "ClientBias", "ClientState", "ConfigError", "Environment", "FilterBank", "GmmFit",
    "GmmParams", "LabeledDataset", "MixedSample", "ModelParams", "NoiseAssignment",
    "PartitionPlan", "RngStream", "RoundRecord", "RunConfig", "RunResult", "ServerState",
    "aggregate_filters", "batch_loss", "choose_training_set", "cross_entropy",
    "debias_logits", "fedavg_aggregate", "filter_split", "filtering_accuracy",
    "final_filtering_accuracy", "fit_local_gmm", "forward_logits", "gmm_posterior_clean",
    "init_params", "inject_noise", "local_train", "make_blobs", "mixup_pair",
    "partition_dirichlet", "partition_iid", "per_sample_losses", "predict_proba",
    "prepare_environment", "relabel", "reselect", "run_experiment", "run_protocol",
    "select_clients", "test_accuracy", "train_test_split", "training_stability",
    "update_bias",
]
