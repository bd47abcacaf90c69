"""The federated training loop: warm-up, per-round client work, aggregation,
filter-bank maintenance, and the baseline/ablation variants."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig
from .data import LabeledDataset, make_blobs, round_half_up, train_test_split
from .metrics import ParticipantStats, RoundRecord, filtering_accuracy, test_accuracy, training_stability
from .model import ModelParams, TrainState, init_params, local_train, per_sample_losses, train_epoch
from .noise_filter import (FilterBank, GmmParams, aggregate_filters, average_filter_params,
                           cold_start_filter, filter_split, fit_local_gmm, relabel)
from .partition import NoiseAssignment, PartitionPlan, inject_noise, partition_dirichlet, partition_iid
from .rng import RngStream
from .sampler import ClientBias, choose_training_set, reselect, update_bias


@dataclass
class ClientState:
    """A client's local data and the state it persists between rounds."""

    client_id: int
    data: LabeledDataset
    bias: ClientBias
    delta_hat: float = 0.0
    true_delta: float = 0.0

    @property
    def num_samples(self) -> int:
        return len(self.data)


@dataclass
class ServerState:
    model: ModelParams
    global_filter: GmmParams
    bank: FilterBank
    round_index: int = 0


@dataclass
class Environment:
    """Everything derived from the seed before any training happens."""

    train_dataset: LabeledDataset
    test_dataset: LabeledDataset
    plan: PartitionPlan
    client_datasets: list[LabeledDataset]
    noise: NoiseAssignment


@dataclass
class RunResult:
    entries: list[dict]
    summary: dict
    server: ServerState
    clients: list[ClientState]
    env: Environment


@dataclass
class _ClientRoundResult:
    client_id: int
    model: ModelParams
    stats: ParticipantStats
    fitted_filter: GmmParams | None = None
    new_bias: ClientBias | None = None


def select_clients(num_clients: int, fraction: float, rng: RngStream,
                   eligible: list[int] | None = None) -> list[int]:
    """Uniform sample without replacement of round(fraction * K) clients."""
    size = round_half_up(fraction * num_clients)
    size = max(1, min(size, num_clients))
    pool = np.arange(num_clients) if eligible is None else np.asarray(sorted(eligible))
    size = min(size, len(pool))
    if size < 1:
        raise ValueError("no eligible clients to select")
    chosen = rng.generator().choice(pool, size=size, replace=False)
    return sorted(int(c) for c in chosen)


def fedavg_aggregate(models: list[tuple[ModelParams, int]]) -> ModelParams:
    """Sample-count weighted parameter average over the round's participants."""
    total = sum(n for _, n in models)
    if total <= 0:
        raise ValueError("total sample weight must be positive")
    first = models[0][0]
    weights = [np.zeros_like(w) for w in first.weights]
    biases = [np.zeros_like(b) for b in first.biases]
    for params, n in models:
        if n == 0:
            continue
        share = n / total
        for layer in range(len(weights)):
            weights[layer] += share * params.weights[layer]
            biases[layer] += share * params.biases[layer]
    return ModelParams(tuple(weights), tuple(biases))


def warmup_round_count(config: RunConfig) -> int:
    """Iteration budget converted to rounds: ceil(warmup_iterations / fraction)."""
    if config.warmup_iterations <= 0:
        return 0
    return math.ceil(config.warmup_iterations / config.client_fraction - 1e-9)


def prepare_environment(config: RunConfig) -> Environment:
    root = RngStream.from_seed(config.seed)
    full = make_blobs(config.num_samples, config.num_classes, config.feature_dim,
                      config.class_separation, root.child("blobs"))
    train, test = train_test_split(full, config.test_fraction, root.child("split"))
    if config.partition_mode == "iid":
        plan = partition_iid(train, config.num_clients, root.child("partition"))
    else:
        plan = partition_dirichlet(train, config.num_clients, config.dirichlet_p,
                                   config.dirichlet_alpha, root.child("partition"))
    client_datasets, noise = inject_noise(plan, train, config.noise_client_prob,
                                          config.noise_lower_bound, root.child("noise"))
    return Environment(train, test, plan, client_datasets, noise)


def init_states(env: Environment, config: RunConfig,
                root: RngStream) -> tuple[ServerState, list[ClientState]]:
    model = init_params(config.feature_dim, config.model_hidden_sizes,
                        config.num_classes, root.child("model_init"))
    sizes = [len(ds) for ds in env.client_datasets]
    bank = FilterBank.cold_start(config.num_clients, config.num_classes, sizes)
    server = ServerState(model, cold_start_filter(config.num_classes), bank, 0)
    clients = [
        ClientState(k, env.client_datasets[k], ClientBias.uniform(config.num_classes),
                    0.0, env.noise.client_noise_levels[k])
        for k in range(config.num_clients)
    ]
    return server, clients


def _eligible_ids(clients: list[ClientState]) -> list[int]:
    ids = [c.client_id for c in clients if c.num_samples > 0]
    if not ids:
        raise ValueError("every client is empty; nothing to train")
    return ids


def _map_clients(jobs, worker, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


def run_warmup_round(server: ServerState, clients: list[ClientState], config: RunConfig,
                     rng: RngStream, test_set: LabeledDataset, workers: int = 1) -> tuple[ServerState, RoundRecord]:
    """MixUp-only training on raw client data; the filter bank stays untouched."""
    started = time.perf_counter()
    t = server.round_index + 1
    participants = select_clients(config.num_clients, config.client_fraction,
                                  rng.child("select", t), _eligible_ids(clients))

    def work(k: int) -> _ClientRoundResult:
        client = clients[k]
        trained = local_train(server.model, client.data.features, client.data.given_labels,
                              config, rng.child("train", t, k))
        stats = ParticipantStats(k, client.num_samples, client.true_delta)
        return _ClientRoundResult(k, trained, stats)

    results = _map_clients(participants, work, workers)
    new_model = fedavg_aggregate([(r.model, clients[r.client_id].num_samples) for r in results])
    stability = training_stability([r.model for r in results], server.model)
    record = RoundRecord(t, "warmup", test_accuracy(new_model, test_set), stability,
                         [r.stats for r in results], time.perf_counter() - started)
    return ServerState(new_model, server.global_filter, server.bank, t), record


def _client_round(client: ClientState, server: ServerState, config: RunConfig,
                  rng: RngStream, t: int) -> _ClientRoundResult:
    """Steps 2-4 for one selected client under the full filtering protocol."""
    data = client.data
    features, given = data.features, data.given_labels

    if config.algorithm_variant == "feddiv_local_filter":
        split_filter = server.bank.entries[client.client_id].params
    else:
        split_filter = server.global_filter

    losses = _filter_losses(server.model, data, config)
    clean_idx, noisy_idx, delta_hat = filter_split(losses, split_filter,
                                                   config.clean_posterior_threshold)
    predicted_clean = np.zeros(len(data), dtype=bool)
    predicted_clean[clean_idx] = True
    filter_acc = filtering_accuracy(predicted_clean, data.clean_mask)

    relabeled_count = 0
    cand_features = features[clean_idx]
    cand_labels = given[clean_idx]
    cand_true = data.true_labels[clean_idx]
    if delta_hat > config.noisy_client_threshold and len(noisy_idx):
        kept, pseudo = relabel(server.model, features[noisy_idx], config.relabel_threshold)
        relabeled_count = len(kept)
        if relabeled_count:
            cand_features = np.concatenate([cand_features, features[noisy_idx[kept]]])
            cand_labels = np.concatenate([cand_labels, pseudo])
            cand_true = np.concatenate([cand_true, data.true_labels[noisy_idx[kept]]])

    state = TrainState(server.model)
    train_stream = rng.child("train", t, client.client_id)
    starved_epochs = 0
    reselected_count = None
    use_reselection = delta_hat >= config.noisy_client_threshold
    last_features, last_labels, last_true = features, given, data.true_labels
    for epoch in range(config.local_epochs):
        if use_reselection:
            kept = reselect(cand_features, server.model, state.params(), client.bias,
                            config.debias_factor)
            reselected_count = len(kept)
            epoch_features = cand_features[kept]
            epoch_labels = cand_labels[kept]
            last_features, last_labels, last_true = epoch_features, epoch_labels, cand_true[kept]
        else:
            epoch_features, epoch_labels = choose_training_set(
                delta_hat, (cand_features, cand_labels), (features, given),
                config.noisy_client_threshold)
        if len(epoch_features) == 0:
            starved_epochs += 1
            continue
        train_epoch(state, epoch_features, epoch_labels, config,
                    train_stream.child("epoch", epoch))
    trained = state.params()

    new_bias = update_bias(client.bias, trained, features, config.bias_momentum)
    fit = fit_local_gmm(_filter_losses(trained, data, config), split_filter,
                        config.em_max_iters, config.em_tolerance)

    confusion = None
    if t in config.confusion_dump_rounds and len(last_features):
        matrix = np.zeros((config.num_classes, config.num_classes), dtype=np.int64)
        np.add.at(matrix, (last_true, last_labels), 1)
        confusion = matrix.tolist()

    stats = ParticipantStats(
        client.client_id, client.num_samples, client.true_delta,
        estimated_noise_level=delta_hat,
        filtering_accuracy=filter_acc,
        clean_count=len(clean_idx),
        noisy_count=len(noisy_idx),
        relabeled_count=relabeled_count,
        reselected_count=reselected_count,
        starved_epochs=starved_epochs,
        starved_round=starved_epochs == config.local_epochs,
        filter_params=fit.params,
        confusion=confusion,
    )
    return _ClientRoundResult(client.client_id, trained, stats, fit.params, new_bias)


def _filter_losses(model: ModelParams, data: LabeledDataset, config: RunConfig) -> np.ndarray:
    losses = per_sample_losses(model, data.features, data.given_labels)
    if config.normalize_losses and np.ptp(losses) > 0:
        losses = (losses - losses.min()) / np.ptp(losses)
    return losses


def run_round(server: ServerState, clients: list[ClientState], config: RunConfig,
              rng: RngStream, test_set: LabeledDataset,
              workers: int = 1) -> tuple[ServerState, RoundRecord]:
    """One full communication round under the configured variant."""
    started = time.perf_counter()
    t = server.round_index + 1
    participants = select_clients(config.num_clients, config.client_fraction,
                                  rng.child("select", t), _eligible_ids(clients))

    baseline = config.algorithm_variant == "fedavg_baseline"

    def work(k: int) -> _ClientRoundResult:
        client = clients[k]
        if baseline:
            trained = local_train(server.model, client.data.features,
                                  client.data.given_labels, config, rng.child("train", t, k))
            return _ClientRoundResult(k, trained,
                                      ParticipantStats(k, client.num_samples, client.true_delta))
        return _client_round(client, server, config, rng, t)

    results = _map_clients(participants, work, workers)

    new_model = fedavg_aggregate([(r.model, clients[r.client_id].num_samples) for r in results])
    stability = training_stability([r.model for r in results], server.model)

    new_filter = server.global_filter
    if not baseline:
        for r in results:
            server.bank.update(r.client_id, r.fitted_filter, t)
            clients[r.client_id].bias = r.new_bias
            clients[r.client_id].delta_hat = r.stats.estimated_noise_level
        if config.algorithm_variant == "feddiv":
            new_filter = aggregate_filters(server.bank)
        elif config.algorithm_variant == "feddiv_degraded":
            new_filter = average_filter_params(
                [(r.fitted_filter, clients[r.client_id].num_samples) for r in results])
        # feddiv_local_filter: the shared filter is never consulted

    record = RoundRecord(t, "train", test_accuracy(new_model, test_set), stability,
                         [r.stats for r in results], time.perf_counter() - started)
    return ServerState(new_model, new_filter, server.bank, t), record


def run_protocol(env: Environment, config: RunConfig, workers: int = 1) -> RunResult:
    """Warm-up plus the configured number of training rounds over a prepared environment."""
    root = RngStream.from_seed(config.seed)
    server, clients = init_states(env, config, root)

    records = [RoundRecord(0, "init", test_accuracy(server.model, env.test_dataset))]
    for _ in range(warmup_round_count(config)):
        server, record = run_warmup_round(server, clients, config, root, env.test_dataset, workers)
        records.append(record)
    for _ in range(config.total_rounds):
        server, record = run_round(server, clients, config, root, env.test_dataset, workers)
        records.append(record)

    summary = build_summary(config, env, records)
    entries = build_entries(config, env, records, summary)
    return RunResult(entries, summary, server, clients, env)


def run_experiment(config: RunConfig, workers: int = 1) -> RunResult:
    """Build data, partition, noise; then run the full protocol. Deterministic in the seed."""
    config.validate()
    return run_protocol(prepare_environment(config), config, workers)


def build_summary(config: RunConfig, env: Environment, records: list[RoundRecord]) -> dict:
    import hashlib
    import json

    accuracies = [(r.round_index, r.test_accuracy) for r in records]
    best_round, best_acc = max(accuracies, key=lambda item: (item[1], -item[0]))
    filter_values = [p.filtering_accuracy for r in records if r.phase == "train"
                     for p in r.participants if p.filtering_accuracy is not None]
    mismatch = [float((ds.given_labels != ds.true_labels).mean()) if len(ds) else 0.0
                for ds in env.client_datasets]
    config_blob = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    return {
        "seed": config.seed,
        "algorithm_variant": config.algorithm_variant,
        "config_hash": hashlib.sha256(config_blob).hexdigest(),
        "best_test_accuracy": best_acc,
        "best_round": best_round,
        "final_test_accuracy": records[-1].test_accuracy,
        "rounds_recorded": len(records),
        "mean_filtering_accuracy": float(np.mean(filter_values)) if filter_values else None,
        "client_noise_levels": [float(v) for v in env.noise.client_noise_levels],
        "realized_mismatch_rates": mismatch,
        "total_starved_epochs": int(sum(p.starved_epochs for r in records for p in r.participants)),
    }


def build_entries(config: RunConfig, env: Environment, records: list[RoundRecord],
                  summary: dict) -> list[dict]:
    from .runlog import config_echo_entry, final_summary_entry, noise_summary_entry, \
        partition_summary_entry, round_record_entry

    entries = [config_echo_entry(config), partition_summary_entry(env, config),
               noise_summary_entry(env)]
    entries.extend(round_record_entry(r) for r in records)
    entries.append(final_summary_entry(summary))
    return entries


def final_filtering_accuracy(server: ServerState, clients: list[ClientState],
                             config: RunConfig) -> dict[int, float]:
    """Filtering accuracy for every non-empty client under the final server state."""
    out: dict[int, float] = {}
    for client in clients:
        if client.num_samples == 0:
            continue
        if config.algorithm_variant == "feddiv_local_filter":
            split_filter = server.bank.entries[client.client_id].params
        else:
            split_filter = server.global_filter
        losses = _filter_losses(server.model, client.data, config)
        clean_idx, _, _ = filter_split(losses, split_filter, config.clean_posterior_threshold)
        predicted = np.zeros(client.num_samples, dtype=bool)
        predicted[clean_idx] = True
        out[client.client_id] = filtering_accuracy(predicted, client.data.clean_mask)
    return out
