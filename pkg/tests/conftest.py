import numpy as np
import pytest

from feddiv import ModelParams, RngStream


def random_params(g: np.random.Generator, dim: int, hidden: tuple[int, ...],
                  num_classes: int, scale: float = 0.5) -> ModelParams:
    sizes = [dim, *hidden, num_classes]
    weights = tuple(g.normal(0.0, scale, size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:]))
    biases = tuple(g.normal(0.0, scale, size=b) for b in sizes[1:])
    return ModelParams(weights, biases)


@pytest.fixture
def stream():
    return RngStream.from_seed(12345)
