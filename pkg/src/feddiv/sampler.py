"""Predictive-consistency sample re-selection with counterfactual de-biasing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, forward_logits, predict_proba

BIAS_CLAMP = 1e-12


@dataclass(frozen=True)
class ClientBias:
    """Client-cached average prediction vector over all classes."""

    probs: np.ndarray

    def __post_init__(self):
        if self.probs.min() < -1e-12 or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("bias must be a probability vector")

    @classmethod
    def uniform(cls, num_classes: int) -> "ClientBias":
        return cls(np.full(num_classes, 1.0 / num_classes))


def debias_logits(logits, bias: ClientBias, xi: float) -> np.ndarray:
    """Subtract the log of the cached class bias, scaled by the de-bias factor."""
    logits = np.asarray(logits, dtype=np.float64)
    return logits - xi * np.log(np.clip(bias.probs, BIAS_CLAMP, None))


def reselect(features, global_model: ModelParams, local_model: ModelParams,
             bias: ClientBias, xi: float) -> np.ndarray:
    """Positions where the global pseudo-label matches the de-biased local one."""
    features = np.asarray(features, dtype=np.float64)
    if len(features) == 0:
        return np.empty(0, dtype=np.int64)
    global_pred = forward_logits(global_model, features).argmax(axis=1)
    local_pred = debias_logits(forward_logits(local_model, features), bias, xi).argmax(axis=1)
    return np.flatnonzero(global_pred == local_pred)


def choose_training_set(delta_hat: float, reselected, original, threshold: float = 0.1):
    """Noisy clients (estimated level >= threshold) train on the re-selected set."""
    return reselected if delta_hat >= threshold else original


def update_bias(bias: ClientBias, model: ModelParams, features,
                momentum: float) -> ClientBias:
    """Momentum update toward the model's mean prediction over the client data."""
    features = np.asarray(features, dtype=np.float64)
    if len(features) == 0:
        raise ValueError("client data must be non-empty")
    mean_pred = predict_proba(model, features).mean(axis=0)
    return ClientBias(momentum * bias.probs + (1.0 - momentum) * mean_pred)
