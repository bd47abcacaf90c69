"""Evaluation quantities and per-round records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset
from .model import ModelParams, forward_logits, params_to_vector
from .noise_filter import GmmParams


def filtering_accuracy(predicted_clean, clean_mask) -> float:
    """Fraction of samples whose predicted clean/noisy status matches ground truth."""
    predicted = np.asarray(predicted_clean, dtype=bool)
    truth = np.asarray(clean_mask, dtype=bool)
    if predicted.shape != truth.shape:
        raise ValueError("prediction and mask lengths differ")
    if len(predicted) == 0:
        return 1.0
    return float((predicted == truth).mean())


def test_accuracy(model: ModelParams, dataset: LabeledDataset) -> float:
    if len(dataset) == 0:
        raise ValueError("test set must be non-empty")
    predictions = forward_logits(model, dataset.features).argmax(axis=1)
    return float((predictions == dataset.true_labels).mean())


def training_stability(local_models: list[ModelParams], global_model: ModelParams) -> float:
    """Mean squared L2 distance between participants' models and the global model."""
    if not local_models:
        raise ValueError("need at least one local model")
    reference = params_to_vector(global_model)
    total = 0.0
    for local in local_models:
        vector = params_to_vector(local)
        if vector.shape != reference.shape:
            raise ValueError("model shapes do not match")
        diff = vector - reference
        total += float(diff @ diff)
    return total / len(local_models)


@dataclass
class ParticipantStats:
    """Per-client measurements from one round; filter fields stay None for the
    plain-averaging baseline."""

    client_id: int
    num_samples: int
    true_noise_level: float
    estimated_noise_level: float | None = None
    filtering_accuracy: float | None = None
    clean_count: int | None = None
    noisy_count: int | None = None
    relabeled_count: int | None = None
    reselected_count: int | None = None
    starved_epochs: int = 0
    starved_round: bool = False
    filter_params: GmmParams | None = None
    confusion: list[list[int]] | None = None

    def to_payload(self) -> dict:
        return {
            "client": self.client_id,
            "num_samples": self.num_samples,
            "true_noise_level": self.true_noise_level,
            "estimated_noise_level": self.estimated_noise_level,
            "filtering_accuracy": self.filtering_accuracy,
            "clean_count": self.clean_count,
            "noisy_count": self.noisy_count,
            "relabeled_count": self.relabeled_count,
            "reselected_count": self.reselected_count,
            "starved_epochs": self.starved_epochs,
            "starved_round": self.starved_round,
            "filter": self.filter_params.to_payload() if self.filter_params else None,
            "confusion": self.confusion,
        }


@dataclass
class RoundRecord:
    """One training (or warm-up, or initial-evaluation) round.

    ``duration_seconds`` is measured wall-clock time; it is deliberately left
    out of the serialized log so identical runs produce identical bytes.
    """

    round_index: int
    phase: str  # "init" | "warmup" | "train"
    test_accuracy: float
    training_stability: float | None = None
    participants: list[ParticipantStats] = field(default_factory=list)
    duration_seconds: float = 0.0

    def to_payload(self) -> dict:
        return {
            "round": self.round_index,
            "phase": self.phase,
            "test_accuracy": self.test_accuracy,
            "training_stability": self.training_stability,
            "participants": [p.to_payload() for p in self.participants],
        }
