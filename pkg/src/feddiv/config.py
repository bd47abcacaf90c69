"""Run configuration: field definitions, JSON loading, and validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any

VARIANTS = ("feddiv", "feddiv_degraded", "feddiv_local_filter", "fedavg_baseline")
PARTITION_MODES = ("iid", "dirichlet")


class ConfigError(ValueError):
    """Invalid configuration semantics; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    # synthetic dataset
    num_samples: int = 5000
    num_classes: int = 4
    feature_dim: int = 2
    class_separation: float = 6.0
    test_fraction: float = 0.2
    # federation
    num_clients: int = 20
    client_fraction: float = 0.25
    total_rounds: int = 60
    warmup_iterations: int = 2
    local_epochs: int = 5
    batch_size: int = 10
    learning_rate: float = 0.03
    sgd_momentum: float = 0.5
    # label noise model
    noise_client_prob: float = 0.6
    noise_lower_bound: float = 0.5
    # filtering, relabeling, re-selection
    relabel_threshold: float = 0.75
    debias_factor: float = 0.5
    bias_momentum: float = 0.2
    mixup_alpha: float = 1.0
    reg_weight: float = 0.0
    noisy_client_threshold: float = 0.1
    clean_posterior_threshold: float = 0.5
    normalize_losses: bool = False
    # partitioning
    partition_mode: str = "iid"
    dirichlet_p: float = 0.7
    dirichlet_alpha: float = 1.0
    # algorithm and model
    algorithm_variant: str = "feddiv"
    model_hidden_sizes: tuple[int, ...] = (32,)
    em_max_iters: int = 100
    em_tolerance: float = 1e-6
    seed: int = 0
    confusion_dump_rounds: tuple[int, ...] = ()

    def validate(self) -> None:
        def need(cond: bool, field: str, message: str) -> None:
            if not cond:
                raise ConfigError(field, message)

        need(self.num_classes >= 2, "num_classes", "need at least 2 classes")
        need(self.num_samples >= self.num_classes, "num_samples", "need at least one sample per class")
        need(self.feature_dim >= 1, "feature_dim", "must be >= 1")
        need(self.class_separation >= 0, "class_separation", "must be >= 0")
        need(0.0 < self.test_fraction < 1.0, "test_fraction", "must lie in (0, 1)")
        need(self.num_clients >= 1, "num_clients", "must be >= 1")
        need(0.0 < self.client_fraction <= 1.0, "client_fraction", "must lie in (0, 1]")
        need(self.client_fraction * self.num_clients >= 1.0 - 1e-12, "client_fraction",
             "client_fraction * num_clients must be >= 1")
        need(self.total_rounds >= 0, "total_rounds", "must be >= 0")
        need(self.warmup_iterations >= 0, "warmup_iterations", "must be >= 0")
        need(self.local_epochs >= 0, "local_epochs", "must be >= 0")
        need(self.batch_size >= 1, "batch_size", "must be >= 1")
        need(self.learning_rate >= 0, "learning_rate", "must be >= 0")
        need(0.0 <= self.sgd_momentum < 1.0, "sgd_momentum", "must lie in [0, 1)")
        need(0.0 <= self.noise_client_prob <= 1.0, "noise_client_prob", "must lie in [0, 1]")
        need(0.0 <= self.noise_lower_bound < 1.0, "noise_lower_bound", "must lie in [0, 1)")
        need(0.0 <= self.relabel_threshold <= 1.0, "relabel_threshold", "must lie in [0, 1]")
        need(0.0 <= self.bias_momentum <= 1.0, "bias_momentum", "must lie in [0, 1]")
        need(self.mixup_alpha > 0, "mixup_alpha", "must be > 0")
        need(self.reg_weight >= 0, "reg_weight", "must be >= 0")
        need(0.0 <= self.noisy_client_threshold <= 1.0, "noisy_client_threshold", "must lie in [0, 1]")
        need(0.0 <= self.clean_posterior_threshold <= 1.0, "clean_posterior_threshold", "must lie in [0, 1]")
        need(self.partition_mode in PARTITION_MODES, "partition_mode",
             f"must be one of {', '.join(PARTITION_MODES)}")
        need(0.0 < self.dirichlet_p <= 1.0, "dirichlet_p", "must lie in (0, 1]")
        need(self.dirichlet_alpha > 0, "dirichlet_alpha", "must be > 0")
        need(self.algorithm_variant in VARIANTS, "algorithm_variant",
             f"must be one of {', '.join(VARIANTS)}")
        need(len(self.model_hidden_sizes) >= 0 and all(h >= 1 for h in self.model_hidden_sizes),
             "model_hidden_sizes", "hidden sizes must be >= 1")
        need(self.em_max_iters >= 1, "em_max_iters", "must be >= 1")
        need(self.em_tolerance > 0, "em_tolerance", "must be > 0")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown configuration field")
        values: dict[str, Any] = {}
        for name, value in raw.items():
            values[name] = _coerce(name, value, known[name].type)
        config = cls(**values)
        config.validate()
        return config


_INT_TUPLE_TYPES = ("tuple[int, ...]",)


def _coerce(name: str, value: Any, annotation: Any) -> Any:
    kind = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", str(annotation))
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected a boolean, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    if kind in _INT_TUPLE_TYPES:
        if not isinstance(value, (list, tuple)) or any(isinstance(v, bool) or not isinstance(v, int) for v in value):
            raise ConfigError(name, f"expected a list of integers, got {value!r}")
        return tuple(value)
    raise ConfigError(name, f"unsupported field type {kind}")


def load_config_file(path: str) -> dict[str, Any]:
    """Read a JSON config file; raises OSError / json.JSONDecodeError on parse problems."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise json.JSONDecodeError("top-level config must be a JSON object", "", 0)
    return raw


def apply_overrides(raw: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``key=value`` override strings on top of a parsed config dict."""
    merged = dict(raw)
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(item, "override must take the form key=value")
        try:
            merged[key] = json.loads(text)
        except json.JSONDecodeError:
            merged[key] = text
    return merged
