"""Labeled datasets and synthetic Gaussian-blob generation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream


def round_half_up(x: float) -> int:
    """Round a non-negative value to the nearest integer, halves up."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class LabeledDataset:
    """Feature vectors with given labels plus evaluation-only ground truth.

    ``true_labels`` and ``clean_mask`` exist so experiments can score label
    quality; the training path never reads them.
    """

    features: np.ndarray      # (n, d) float64
    given_labels: np.ndarray  # (n,) int64
    true_labels: np.ndarray   # (n,) int64
    clean_mask: np.ndarray    # (n,) bool
    num_classes: int

    def __post_init__(self):
        n = len(self.features)
        if not (len(self.given_labels) == len(self.true_labels) == len(self.clean_mask) == n):
            raise ValueError("dataset arrays must have equal length")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        for labels in (self.given_labels, self.true_labels):
            if n and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ValueError("label index out of range")
        if not np.array_equal(self.clean_mask, self.given_labels == self.true_labels):
            raise ValueError("clean_mask must equal given_labels == true_labels")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_labels(cls, features, given_labels, true_labels, num_classes: int) -> "LabeledDataset":
        features = np.asarray(features, dtype=np.float64)
        given = np.asarray(given_labels, dtype=np.int64)
        true = np.asarray(true_labels, dtype=np.int64)
        return cls(features, given, true, given == true, num_classes)

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.features[idx],
            self.given_labels[idx],
            self.true_labels[idx],
            self.clean_mask[idx],
            self.num_classes,
        )


def class_centers(num_classes: int, dim: int, separation: float) -> np.ndarray:
    """Cluster centers with pairwise distance at least ``separation``.

    Centers sit on a circle in the first two dimensions (adjacent chord equal
    to the separation), or on a line when dim == 1.
    """
    centers = np.zeros((num_classes, dim))
    if num_classes == 1:
        return centers
    if dim == 1:
        centers[:, 0] = np.arange(num_classes) * separation
        return centers
    radius = separation / (2.0 * math.sin(math.pi / num_classes))
    angles = 2.0 * math.pi * np.arange(num_classes) / num_classes
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return centers


def make_blobs(num_samples: int, num_classes: int, dim: int,
               class_separation: float, rng: RngStream) -> LabeledDataset:
    """Isotropic unit-variance Gaussian clusters, one per class, all labels clean.

    Class counts differ by at most one; sample order is shuffled.
    """
    if num_samples < num_classes:
        raise ValueError("num_samples must be at least num_classes")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    g = rng.generator()
    counts = np.full(num_classes, num_samples // num_classes, dtype=np.int64)
    counts[: num_samples % num_classes] += 1
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), counts)
    centers = class_centers(num_classes, dim, class_separation)
    features = centers[labels] + g.standard_normal((num_samples, dim))
    perm = g.permutation(num_samples)
    return LabeledDataset.from_labels(features[perm], labels[perm], labels[perm], num_classes)


def train_test_split(dataset: LabeledDataset, test_fraction: float,
                     rng: RngStream) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint, exhaustive split stratified by true label.

    Test size is round(n * test_fraction); per-class test counts match the
    proportional share up to largest-remainder rounding.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset must be non-empty")
    target = round_half_up(n * test_fraction)
    if target <= 0 or target >= n:
        raise ValueError("test_fraction produces an empty train or test set")
    quotas = np.bincount(dataset.true_labels, minlength=dataset.num_classes) * test_fraction
    counts = largest_remainder_counts(quotas, target)
    g = rng.generator()
    test_idx: list[np.ndarray] = []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.true_labels == c)
        take = counts[c]
        if take > len(members):
            raise ValueError("test_fraction produces an empty train or test set")
        chosen = g.permutation(members)[:take]
        test_idx.append(chosen)
    test_indices = np.sort(np.concatenate(test_idx)) if test_idx else np.empty(0, dtype=np.int64)
    mask = np.zeros(n, dtype=bool)
    mask[test_indices] = True
    train_indices = np.flatnonzero(~mask)
    if len(train_indices) == 0 or len(test_indices) == 0:
        raise ValueError("test_fraction produces an empty train or test set")
    return dataset.subset(train_indices), dataset.subset(test_indices)


def largest_remainder_counts(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to ``total``, each within one of its real quota."""
    quotas = np.asarray(quotas, dtype=np.float64)
    base = np.floor(quotas).astype(np.int64)
    remainder = int(total - base.sum())
    if remainder < 0:
        # quotas overshoot the target (floating slack); trim from the smallest fractions
        order = np.argsort(quotas - base, kind="stable")
        for i in order[: -remainder]:
            base[i] -= 1
        return base
    order = np.argsort(-(quotas - base), kind="stable")
    for i in order[:remainder]:
        base[i] += 1
    return base
