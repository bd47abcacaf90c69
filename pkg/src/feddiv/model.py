"""Feed-forward softmax classifier with analytic gradients and MixUp training.

The network is a small MLP (tanh hidden layers) over double-precision numpy
arrays.  All public operations accept a single feature vector or a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .rng import RngStream


@dataclass(frozen=True)
class ModelParams:
    """Immutable weight matrices and bias vectors, input layer first."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must pair up")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: bias shape does not match weight columns")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input size does not chain from previous layer")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all()
                   for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class MixedSample:
    """A MixUp-interpolated feature vector and its soft target distribution."""

    features: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        if self.target.min() < -1e-12 or abs(self.target.sum() - 1.0) > 1e-9:
            raise ValueError("mixed target must be a probability vector")


def init_params(input_dim: int, hidden_sizes: tuple[int, ...], num_classes: int,
                rng: RngStream) -> ModelParams:
    """Random scaled-normal weights, zero biases."""
    g = rng.generator()
    sizes = [input_dim, *hidden_sizes, num_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(g.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(tuple(weights), tuple(biases))


def zeros_like_params(params: ModelParams) -> ModelParams:
    return ModelParams(tuple(np.zeros_like(w) for w in params.weights),
                       tuple(np.zeros_like(b) for b in params.biases))


def params_to_vector(params: ModelParams) -> np.ndarray:
    parts = [w.ravel() for w in params.weights] + [b.ravel() for b in params.biases]
    return np.concatenate(parts)


def vector_to_params(vector: np.ndarray, template: ModelParams) -> ModelParams:
    weights, biases = [], []
    pos = 0
    for w in template.weights:
        weights.append(vector[pos:pos + w.size].reshape(w.shape).copy())
        pos += w.size
    for b in template.biases:
        biases.append(vector[pos:pos + b.size].reshape(b.shape).copy())
        pos += b.size
    return ModelParams(tuple(weights), tuple(biases))


def _as_batch(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(f"expected feature dimension {params.input_dim}, got shape {x.shape}")
    return x, single


def _forward(weights, biases, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns (logits, activations); activations[i] is the input to layer i."""
    activations = [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.tanh(a @ w + b)
        activations.append(a)
    logits = a @ weights[-1] + biases[-1]
    return logits, activations


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def forward_logits(params: ModelParams, x) -> np.ndarray:
    batch, single = _as_batch(params, x)
    logits, _ = _forward(params.weights, params.biases, batch)
    return logits[0] if single else logits


def predict_proba(params: ModelParams, x) -> np.ndarray:
    """Softmax probabilities, computed with max-subtraction for stability."""
    logits = forward_logits(params, x)
    probs = np.exp(_log_softmax(logits))
    return probs / probs.sum(axis=-1, keepdims=True)


def cross_entropy(params: ModelParams, x, y: int) -> float:
    if not 0 <= y < params.num_classes:
        raise ValueError(f"label {y} out of range for {params.num_classes} classes")
    batch, _ = _as_batch(params, x)
    logits, _ = _forward(params.weights, params.biases, batch)
    return float(-_log_softmax(logits)[0, y])


def per_sample_losses(params: ModelParams, features, labels) -> np.ndarray:
    """Cross-entropy of every (x, y) pair, order-aligned with the inputs."""
    batch, _ = _as_batch(params, features)
    if len(batch) == 0:
        raise ValueError("dataset must be non-empty")
    labels = np.asarray(labels, dtype=np.int64)
    logits, _ = _forward(params.weights, params.biases, batch)
    logp = _log_softmax(logits)
    return -logp[np.arange(len(batch)), labels]


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    return np.eye(num_classes)[np.asarray(labels, dtype=np.int64)]


def mixup_pair(xi, yi: int, xj, yj: int, lam: float, num_classes: int) -> MixedSample:
    """Linear interpolation of two samples and their one-hot labels."""
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    if xi.shape != xj.shape:
        raise ValueError("mixup pair must share a feature dimension")
    if not (0 <= yi < num_classes and 0 <= yj < num_classes):
        raise ValueError("label out of range")
    target = lam * one_hot(np.array([yi]), num_classes)[0] + (1.0 - lam) * one_hot(np.array([yj]), num_classes)[0]
    return MixedSample(lam * xi + (1.0 - lam) * xj, target)


def _loss_and_grads(weights, biases, x: np.ndarray, targets: np.ndarray,
                    eta: float) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Summed soft-target cross-entropy plus the uniform-prior penalty, with gradients."""
    logits, activations = _forward(weights, biases, x)
    logp = _log_softmax(logits)
    probs = np.exp(logp)
    loss = float(-(targets * logp).sum())
    dlogits = probs - targets
    if eta != 0.0:
        batch_size, num_classes = probs.shape
        q = probs.mean(axis=0)
        uniform = 1.0 / num_classes
        loss += eta * float((uniform * (np.log(uniform) - np.log(q))).sum())
        dreg_dq = -uniform / q
        inner = probs @ dreg_dq
        dlogits = dlogits + (eta / batch_size) * probs * (dreg_dq[None, :] - inner[:, None])
    grad_w: list[np.ndarray] = [np.empty(0)] * len(weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(weights)
    delta = dlogits
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (1.0 - activations[layer] ** 2)
    return loss, grad_w, grad_b


def batch_loss(params: ModelParams, batch: list[MixedSample], eta: float) -> tuple[float, ModelParams]:
    """Training objective over a mini-batch of mixed samples and its exact gradient."""
    if not batch:
        raise ValueError("batch must be non-empty")
    x = np.stack([s.features for s in batch])
    targets = np.stack([s.target for s in batch])
    loss, grad_w, grad_b = _loss_and_grads(params.weights, params.biases, x, targets, eta)
    return loss, ModelParams(tuple(grad_w), tuple(grad_b))


class TrainState:
    """Mutable parameters plus SGD momentum buffers for one local training session."""

    def __init__(self, params: ModelParams):
        self.weights = [w.copy() for w in params.weights]
        self.biases = [b.copy() for b in params.biases]
        self.vel_w = [np.zeros_like(w) for w in params.weights]
        self.vel_b = [np.zeros_like(b) for b in params.biases]

    def params(self) -> ModelParams:
        return ModelParams(tuple(w.copy() for w in self.weights),
                           tuple(b.copy() for b in self.biases))


def train_epoch(state: TrainState, features: np.ndarray, labels: np.ndarray,
                config: RunConfig, rng: RngStream) -> float:
    """One shuffled pass of MixUp mini-batch SGD; returns the summed epoch loss."""
    n = len(features)
    if n == 0:
        raise ValueError("training data must be non-empty")
    g = rng.generator()
    targets = one_hot(labels, config.num_classes)
    order = g.permutation(n)
    epoch_loss = 0.0
    for start in range(0, n, config.batch_size):
        idx = order[start:start + config.batch_size]
        xb = features[idx]
        yb = targets[idx]
        partner = g.permutation(len(idx))
        lam = float(g.beta(config.mixup_alpha, config.mixup_alpha))
        x_mix = lam * xb + (1.0 - lam) * xb[partner]
        y_mix = lam * yb + (1.0 - lam) * yb[partner]
        loss, grad_w, grad_b = _loss_and_grads(state.weights, state.biases, x_mix, y_mix,
                                               config.reg_weight)
        epoch_loss += loss
        for layer in range(len(state.weights)):
            state.vel_w[layer] = config.sgd_momentum * state.vel_w[layer] + grad_w[layer]
            state.vel_b[layer] = config.sgd_momentum * state.vel_b[layer] + grad_b[layer]
            state.weights[layer] -= config.learning_rate * state.vel_w[layer]
            state.biases[layer] -= config.learning_rate * state.vel_b[layer]
    if not np.isfinite(epoch_loss):
        raise FloatingPointError("non-finite training loss; lower the learning rate")
    return epoch_loss


def local_train(params: ModelParams, features, labels, config: RunConfig,
                rng: RngStream) -> ModelParams:
    """Run the configured number of local epochs and return the updated model."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) == 0:
        raise ValueError("training data must be non-empty")
    state = TrainState(params)
    for epoch in range(config.local_epochs):
        train_epoch(state, features, labels, config, rng.child("epoch", epoch))
    result = state.params()
    if not result.all_finite():
        raise FloatingPointError("non-finite parameters after local training")
    return result
