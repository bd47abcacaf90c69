"""Client data partitioning (IID and Dirichlet non-IID) and label noise injection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, largest_remainder_counts, round_half_up
from .rng import RngStream

MAX_INDICATOR_REDRAWS = 1000


@dataclass(frozen=True)
class PartitionPlan:
    """Disjoint per-client index lists into the source dataset.

    ``indicator`` (C x K class-presence matrix) and ``proportions`` (per-class
    shares over the clients holding that class) are populated for non-IID
    partitions only.
    """

    client_indices: tuple[np.ndarray, ...]
    indicator: np.ndarray | None = None
    proportions: tuple[np.ndarray, ...] | None = None

    @property
    def num_clients(self) -> int:
        return len(self.client_indices)

    def client_sizes(self) -> list[int]:
        return [len(idx) for idx in self.client_indices]


@dataclass(frozen=True)
class NoiseAssignment:
    """Drawn noise level and corrupted sample positions for every client."""

    client_noise_levels: tuple[float, ...]
    corrupted_indices: tuple[np.ndarray, ...]


def partition_iid(dataset: LabeledDataset, num_clients: int, rng: RngStream) -> PartitionPlan:
    """Deal each class evenly across clients; per-class remainders go round-robin."""
    if num_clients < 1:
        raise ValueError("num_clients must be >= 1")
    counts = np.bincount(dataset.true_labels, minlength=dataset.num_classes)
    for c in range(dataset.num_classes):
        if counts[c] < num_clients:
            raise ValueError(f"class {c} has fewer samples than clients ({counts[c]} < {num_clients})")
    g = rng.generator()
    assigned: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
    offset = 0
    for c in range(dataset.num_classes):
        members = g.permutation(np.flatnonzero(dataset.true_labels == c))
        base = len(members) // num_clients
        extra = len(members) % num_clients
        per_client = np.full(num_clients, base, dtype=np.int64)
        for i in range(extra):
            per_client[(offset + i) % num_clients] += 1
        offset = (offset + extra) % num_clients
        start = 0
        for k in range(num_clients):
            assigned[k].append(members[start:start + per_client[k]])
            start += per_client[k]
    client_indices = tuple(np.sort(np.concatenate(parts)) for parts in assigned)
    return PartitionPlan(client_indices)


def partition_dirichlet(dataset: LabeledDataset, num_clients: int, p: float,
                        alpha_dir: float, rng: RngStream) -> PartitionPlan:
    """Bernoulli class-presence indicator plus Dirichlet-proportioned class shares."""
    if num_clients < 1:
        raise ValueError("num_clients must be >= 1")
    if not (0.0 < p <= 1.0):
        raise ValueError("p must lie in (0, 1]")
    if alpha_dir <= 0:
        raise ValueError("alpha_dir must be > 0")
    g = rng.generator()
    C = dataset.num_classes
    indicator = np.zeros((C, num_clients), dtype=bool)
    for c in range(C):
        for attempt in range(MAX_INDICATOR_REDRAWS + 1):
            row = g.random(num_clients) < p
            if row.any():
                indicator[c] = row
                break
        else:
            raise RuntimeError(f"class {c}: indicator row empty after {MAX_INDICATOR_REDRAWS} redraws")
    assigned: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
    proportions: list[np.ndarray] = []
    for c in range(C):
        members = g.permutation(np.flatnonzero(dataset.true_labels == c))
        holders = np.flatnonzero(indicator[c])
        q = g.dirichlet(np.full(len(holders), alpha_dir))
        proportions.append(q)
        counts = largest_remainder_counts(q * len(members), len(members))
        start = 0
        for k, take in zip(holders, counts):
            assigned[k].append(members[start:start + take])
            start += take
    client_indices = tuple(
        np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
        for parts in assigned
    )
    return PartitionPlan(client_indices, indicator, tuple(proportions))


def inject_noise(plan: PartitionPlan, dataset: LabeledDataset, rho: float, tau: float,
                 rng: RngStream) -> tuple[list[LabeledDataset], NoiseAssignment]:
    """Corrupt each client's labels at a level drawn from the two-point noise model.

    With probability rho a client draws its noise level from U(tau, 1),
    otherwise it stays clean.  Exactly round(level * n_k) positions are
    redrawn uniformly over all classes (the true label is a permitted
    outcome), and the clean mask is recomputed from actual equality.
    """
    if not (0.0 <= rho <= 1.0):
        raise ValueError("rho must lie in [0, 1]")
    if not (0.0 <= tau < 1.0):
        raise ValueError("tau must lie in [0, 1)")
    client_datasets: list[LabeledDataset] = []
    levels: list[float] = []
    corrupted: list[np.ndarray] = []
    for k in range(plan.num_clients):
        sub = dataset.subset(plan.client_indices[k])
        g = rng.child("client", k).generator()
        level = 0.0
        if g.random() < rho:
            level = float(g.uniform(tau, 1.0))
        count = round_half_up(level * len(sub))
        positions = np.sort(g.choice(len(sub), size=count, replace=False)) if count else np.empty(0, dtype=np.int64)
        given = sub.given_labels.copy()
        if count:
            given[positions] = g.integers(0, dataset.num_classes, size=count)
        client_datasets.append(LabeledDataset(
            sub.features, given, sub.true_labels, given == sub.true_labels, sub.num_classes))
        levels.append(level)
        corrupted.append(positions.astype(np.int64))
    return client_datasets, NoiseAssignment(tuple(levels), tuple(corrupted))
