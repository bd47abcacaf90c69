import math

import numpy as np
import pytest

from feddiv import (ClientBias, ModelParams, choose_training_set, debias_logits, reselect,
                    update_bias)
from conftest import random_params


class TestDebias:
    def test_zero_factor_identity(self):
        logits = np.array([1.0, -2.0, 0.5])
        bias = ClientBias(np.array([0.7, 0.2, 0.1]))
        assert np.array_equal(debias_logits(logits, bias, 0.0), logits)

    def test_uniform_bias_preserves_argmax(self):
        g = np.random.default_rng(0)
        bias = ClientBias.uniform(5)
        for _ in range(20):
            logits = g.normal(size=5)
            shifted = debias_logits(logits, bias, 1.3)
            assert shifted.argmax() == logits.argmax()
            assert np.allclose(shifted - logits, shifted[0] - logits[0])

    def test_minority_class_boosted(self):
        logits = np.array([2.0, 2.0])
        bias = ClientBias(np.array([0.9, 0.1]))
        debiased = debias_logits(logits, bias, 0.5)
        expected = np.array([2.0 - 0.5 * math.log(0.9), 2.0 - 0.5 * math.log(0.1)])
        assert np.allclose(debiased, expected, atol=1e-12)
        assert debiased.argmax() == 1

    def test_zero_bias_entry_clamped(self):
        debiased = debias_logits(np.zeros(2), ClientBias(np.array([1.0, 0.0])), 0.5)
        assert np.isfinite(debiased).all()


class TestReselect:
    def test_self_agreement_keeps_all(self):
        g = np.random.default_rng(1)
        params = random_params(g, 3, (4,), 3)
        features = g.normal(size=(12, 3))
        kept = reselect(features, params, params, ClientBias.uniform(3), 0.5)
        assert kept.tolist() == list(range(12))

    def test_total_disagreement_empty(self):
        up = ModelParams((np.array([[5.0, -5.0]]),), (np.zeros(2),))
        down = ModelParams((np.array([[-5.0, 5.0]]),), (np.zeros(2),))
        features = np.array([[1.0], [2.0], [-1.0]])
        kept = reselect(features, up, down, ClientBias.uniform(2), 0.5)
        assert len(kept) == 0

    def test_output_subset_of_candidates(self):
        g = np.random.default_rng(2)
        a = random_params(g, 2, (4,), 3)
        b = random_params(g, 2, (4,), 3)
        features = g.normal(size=(30, 2))
        kept = reselect(features, a, b, ClientBias.uniform(3), 0.5)
        assert ((0 <= kept) & (kept < 30)).all()
        assert len(np.unique(kept)) == len(kept)

    def test_uniform_bias_equals_zero_factor(self):
        g = np.random.default_rng(3)
        a = random_params(g, 2, (4,), 4)
        b = random_params(g, 2, (4,), 4)
        features = g.normal(size=(25, 2))
        bias = ClientBias.uniform(4)
        for xi in (0.0, 0.5, 2.0):
            assert np.array_equal(reselect(features, a, b, bias, xi),
                                  reselect(features, a, b, bias, 0.0))

    def test_empty_candidates(self):
        g = np.random.default_rng(4)
        params = random_params(g, 2, (), 2)
        assert len(reselect(np.empty((0, 2)), params, params, ClientBias.uniform(2), 0.5)) == 0


class TestChooseTrainingSet:
    def test_clean_branch(self):
        assert choose_training_set(0.0, "reselected", "original") == "original"

    def test_noisy_branch(self):
        assert choose_training_set(0.5, "reselected", "original") == "reselected"

    def test_boundary_uses_reselected(self):
        assert choose_training_set(0.1, "reselected", "original") == "reselected"


class TestUpdateBias:
    def test_full_momentum_keeps_old(self):
        g = np.random.default_rng(5)
        params = random_params(g, 2, (3,), 3)
        old = ClientBias(np.array([0.5, 0.3, 0.2]))
        new = update_bias(old, params, g.normal(size=(10, 2)), 1.0)
        assert np.allclose(new.probs, old.probs, atol=1e-12)

    def test_zero_momentum_equals_mean_prediction(self):
        g = np.random.default_rng(6)
        params = random_params(g, 2, (3,), 3)
        features = g.normal(size=(10, 2))
        from feddiv import predict_proba
        new = update_bias(ClientBias.uniform(3), params, features, 0.0)
        assert np.allclose(new.probs, predict_proba(params, features).mean(axis=0), atol=1e-12)

    def test_uniform_fixed_point(self):
        params = ModelParams((np.zeros((2, 4)),), (np.zeros(4),))
        new = update_bias(ClientBias.uniform(4), params, np.ones((5, 2)), 0.3)
        assert np.allclose(new.probs, 0.25, atol=1e-12)

    def test_output_on_simplex(self):
        g = np.random.default_rng(7)
        for _ in range(20):
            params = random_params(g, 3, (5,), 4, scale=2.0)
            start = g.dirichlet(np.ones(4))
            new = update_bias(ClientBias(start), params, g.normal(size=(8, 3)),
                              float(g.uniform(0, 1)))
            assert new.probs.min() >= 0
            assert abs(new.probs.sum() - 1.0) < 1e-9

    def test_empty_data_rejected(self):
        params = ModelParams((np.zeros((2, 2)),), (np.zeros(2),))
        with pytest.raises(ValueError):
            update_bias(ClientBias.uniform(2), params, np.empty((0, 2)), 0.5)
