import numpy as np
import pytest

from feddiv import LabeledDataset, ModelParams, filtering_accuracy, training_stability
from feddiv.metrics import test_accuracy as accuracy_on
from feddiv.model import params_to_vector
from conftest import random_params


class TestFilteringAccuracy:
    def test_perfect_and_inverted(self):
        mask = np.array([True, False, True, True])
        assert filtering_accuracy(mask, mask) == 1.0
        assert filtering_accuracy(~mask, mask) == 0.0

    def test_random_predictions_near_half(self):
        g = np.random.default_rng(0)
        mask = np.concatenate([np.ones(5000, dtype=bool), np.zeros(5000, dtype=bool)])
        predictions = g.random(10000) < 0.5
        assert abs(filtering_accuracy(predictions, mask) - 0.5) <= 0.02

    def test_status_based_not_label_based(self):
        # only the clean/noisy status matters, never which class a label is
        mask = np.array([True, True, False])
        assert filtering_accuracy([True, True, False], mask) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            filtering_accuracy([True], [True, False])


class TestTestAccuracy:
    def balanced_set(self):
        feats = np.zeros((4, 2))
        labels = np.array([0, 0, 1, 1])
        return LabeledDataset(feats, labels, labels, np.ones(4, dtype=bool), 2)

    def test_uniform_model_tie_breaks_to_class_zero(self):
        params = ModelParams((np.zeros((2, 2)),), (np.zeros(2),))
        assert accuracy_on(params, self.balanced_set()) == 0.5

    def test_perfect_model(self):
        feats = np.array([[1.0, 0.0], [0.0, 1.0]])
        labels = np.array([0, 1])
        ds = LabeledDataset(feats, labels, labels, np.ones(2, dtype=bool), 2)
        params = ModelParams((np.eye(2) * 5,), (np.zeros(2),))
        assert accuracy_on(params, ds) == 1.0

    def test_linear_model_on_separated_blobs(self, stream):
        from feddiv import make_blobs
        from feddiv.data import class_centers
        ds = make_blobs(500, 3, 2, 8.0, stream.child("blobs"))
        centers = class_centers(3, 2, 8.0)
        # nearest-centroid as a linear softmax model: w = 2c, b = -|c|^2
        params = ModelParams((centers.T * 2.0,), (-(centers ** 2).sum(axis=1),))
        assert accuracy_on(params, ds) >= 0.99

    def test_empty_set_rejected(self):
        params = ModelParams((np.zeros((2, 2)),), (np.zeros(2),))
        empty = LabeledDataset(np.empty((0, 2)), np.empty(0, dtype=np.int64),
                               np.empty(0, dtype=np.int64), np.empty(0, dtype=bool), 2)
        with pytest.raises(ValueError):
            accuracy_on(params, empty)


class TestTrainingStability:
    def test_identical_models_zero(self):
        g = np.random.default_rng(1)
        params = random_params(g, 3, (4,), 2)
        assert training_stability([params, params], params) == 0.0

    def test_single_parameter_difference(self):
        g = np.random.default_rng(2)
        base = random_params(g, 2, (3,), 2)
        weights = tuple(w.copy() for w in base.weights)
        weights[0][0, 0] += 2.0
        bumped = ModelParams(weights, base.biases)
        assert abs(training_stability([bumped, base], base) - 4.0 / 2) < 1e-12

    def test_matches_flatten_oracle(self):
        g = np.random.default_rng(3)
        reference = random_params(g, 3, (5,), 4)
        locals_ = [random_params(g, 3, (5,), 4) for _ in range(6)]
        expected = np.mean([np.sum((params_to_vector(m) - params_to_vector(reference)) ** 2)
                            for m in locals_])
        assert abs(training_stability(locals_, reference) - expected) < 1e-12

    def test_shape_mismatch_rejected(self):
        g = np.random.default_rng(4)
        a = random_params(g, 2, (3,), 2)
        b = random_params(g, 2, (4,), 2)
        with pytest.raises(ValueError):
            training_stability([b], a)
