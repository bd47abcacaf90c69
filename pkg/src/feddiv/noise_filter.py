"""Collaborative label-noise filtering.

Each client fits a two-component Gaussian mixture over its per-sample losses;
the server caches every client's latest fit and averages the parameters,
sample-count weighted, into a shared filter.  Samples whose posterior for the
small-loss component clears a threshold count as clean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, predict_proba

VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class GmmParams:
    """Two-component mixture over scalar losses; component 0 has the smaller mean."""

    means: tuple[float, float]
    variances: tuple[float, float]
    weights: tuple[float, float]

    def __post_init__(self):
        if abs(self.weights[0] + self.weights[1] - 1.0) > 1e-9:
            raise ValueError("mixing weights must sum to 1")
        if not all(-1e-12 <= w <= 1.0 + 1e-12 for w in self.weights):
            raise ValueError("mixing weights must lie in [0, 1]")
        if not all(v >= VARIANCE_FLOOR * (1.0 - 1e-9) for v in self.variances):
            raise ValueError("variances must respect the variance floor")
        if self.means[0] > self.means[1]:
            raise ValueError("components must be ordered by mean")

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.array(self.means), np.array(self.variances), np.array(self.weights))

    def to_payload(self) -> dict:
        return {"means": list(self.means), "variances": list(self.variances),
                "weights": list(self.weights)}


@dataclass(frozen=True)
class GmmFit:
    """Result of one local mixture fit."""

    params: GmmParams
    iterations: int
    degenerate: bool
    log_likelihoods: tuple[float, ...]


@dataclass
class FilterBankEntry:
    params: GmmParams
    num_samples: int
    updated_round: int


@dataclass
class FilterBank:
    """Server-side cache of every client's latest filter parameters."""

    entries: list[FilterBankEntry] = field(default_factory=list)

    @classmethod
    def cold_start(cls, num_clients: int, num_classes: int,
                   client_sizes: list[int]) -> "FilterBank":
        params = cold_start_filter(num_classes)
        return cls([FilterBankEntry(params, client_sizes[k], -1) for k in range(num_clients)])

    def update(self, client_id: int, params: GmmParams, round_index: int) -> None:
        entry = self.entries[client_id]
        entry.params = params
        entry.updated_round = round_index


def cold_start_filter(num_classes: int) -> GmmParams:
    """Initial filter anchored to the uniform-prediction loss scale log(C)."""
    base = math.log(num_classes)
    return GmmParams((0.5 * base, 2.0 * base), (1.0, 1.0), (0.5, 0.5))


def _component_log_density(losses: np.ndarray, means: np.ndarray,
                           variances: np.ndarray) -> np.ndarray:
    diff = losses[:, None] - means[None, :]
    return -0.5 * (np.log(2.0 * np.pi * variances)[None, :] + diff ** 2 / variances[None, :])


def _log_weighted(losses: np.ndarray, means, variances, weights) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_pi = np.log(np.clip(weights, 0.0, None))
    return log_pi[None, :] + _component_log_density(losses, means, variances)


def gmm_posterior_clean(loss, filter_params: GmmParams):
    """Posterior probability of the small-loss ("clean") component, in [0, 1]."""
    losses = np.atleast_1d(np.asarray(loss, dtype=np.float64))
    means, variances, weights = filter_params.as_arrays()
    logw = _log_weighted(losses, means, variances, weights)
    peak = logw.max(axis=1, keepdims=True)
    log_norm = peak[:, 0] + np.log(np.exp(logw - peak).sum(axis=1))
    posterior = np.clip(np.exp(logw[:, 0] - log_norm), 0.0, 1.0)
    return float(posterior[0]) if np.isscalar(loss) or np.ndim(loss) == 0 else posterior


def fit_local_gmm(losses, init: GmmParams, max_iters: int = 100,
                  tolerance: float = 1e-6) -> GmmFit:
    """EM fit of the two-component mixture, warm-started from ``init``.

    Stops when the largest parameter change drops below ``tolerance`` or after
    ``max_iters`` iterations; the returned components are ordered by mean.
    Identical losses short-circuit to a degenerate single-component fit.
    """
    losses = np.asarray(losses, dtype=np.float64)
    n = len(losses)
    if n == 0:
        raise ValueError("losses must be non-empty")
    if np.ptp(losses) == 0.0:
        value = float(losses[0])
        params = GmmParams((value, value), (VARIANCE_FLOOR, VARIANCE_FLOOR), (1.0, 0.0))
        return GmmFit(params, 0, True, ())
    means, variances, weights = init.as_arrays()
    trace: list[float] = []
    iterations = 0
    for _ in range(max_iters):
        logw = _log_weighted(losses, means, variances, weights)
        peak = logw.max(axis=1, keepdims=True)
        log_norm = peak[:, 0] + np.log(np.exp(logw - peak).sum(axis=1))
        trace.append(float(log_norm.sum()))
        gamma = np.exp(logw - log_norm[:, None])
        mass = gamma.sum(axis=0)
        new_means = means.copy()
        new_variances = variances.copy()
        new_weights = mass / n
        for g in (0, 1):
            if mass[g] > 1e-12:
                new_means[g] = float((gamma[:, g] * losses).sum() / mass[g])
                variance = float((gamma[:, g] * (losses - new_means[g]) ** 2).sum() / mass[g])
                new_variances[g] = max(variance, VARIANCE_FLOOR)
        delta = max(np.abs(new_means - means).max(),
                    np.abs(new_variances - variances).max(),
                    np.abs(new_weights - weights).max())
        means, variances, weights = new_means, new_variances, new_weights
        iterations += 1
        if delta < tolerance:
            break
    logw = _log_weighted(losses, means, variances, weights)
    peak = logw.max(axis=1, keepdims=True)
    trace.append(float((peak[:, 0] + np.log(np.exp(logw - peak).sum(axis=1))).sum()))
    order = np.argsort(means, kind="stable")
    params = GmmParams(tuple(float(means[g]) for g in order),
                       tuple(float(variances[g]) for g in order),
                       tuple(float(weights[g]) for g in order))
    return GmmFit(params, iterations, False, tuple(trace))


def average_filter_params(pairs: list[tuple[GmmParams, int]]) -> GmmParams:
    """Sample-count weighted component-wise average; zero-count entries drop out."""
    total = sum(n for _, n in pairs)
    if total <= 0:
        raise ValueError("total sample weight must be positive")
    means = np.zeros(2)
    variances = np.zeros(2)
    weights = np.zeros(2)
    for params, n in pairs:
        if n == 0:
            continue
        share = n / total
        m, v, w = params.as_arrays()
        means += share * m
        variances += share * v
        weights += share * w
    return GmmParams(tuple(means), tuple(variances), tuple(weights))


def aggregate_filters(bank: FilterBank) -> GmmParams:
    """Average every cached client filter into the shared filter."""
    return average_filter_params([(e.params, e.num_samples) for e in bank.entries])


def filter_split(losses, filter_params: GmmParams,
                 threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray, float]:
    """Partition sample positions into clean/noisy and estimate the noise level."""
    losses = np.asarray(losses, dtype=np.float64)
    posterior = np.atleast_1d(gmm_posterior_clean(losses, filter_params))
    clean = np.flatnonzero(posterior >= threshold)
    noisy = np.flatnonzero(posterior < threshold)
    delta_hat = len(noisy) / len(losses) if len(losses) else 0.0
    return clean, noisy, float(delta_hat)


def relabel(model: ModelParams, features, zeta: float) -> tuple[np.ndarray, np.ndarray]:
    """Keep samples the model predicts with confidence >= zeta; returns
    (kept positions, pseudo-labels)."""
    features = np.asarray(features, dtype=np.float64)
    if len(features) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    probs = predict_proba(model, features)
    confidence = probs.max(axis=1)
    kept = np.flatnonzero(confidence >= zeta)
    pseudo = probs[kept].argmax(axis=1).astype(np.int64)
    return kept, pseudo
