import math

import numpy as np
import pytest

from feddiv import (GmmParams, ModelParams, RngStream, aggregate_filters, filter_split,
                    fit_local_gmm, gmm_posterior_clean, relabel)
from feddiv.noise_filter import (VARIANCE_FLOOR, FilterBank, FilterBankEntry,
                                 average_filter_params, cold_start_filter)


def make_filter(means=(0.2, 2.0), variances=(0.05, 0.3), weights=(0.7, 0.3)):
    return GmmParams(tuple(means), tuple(variances), tuple(weights))


class TestPosterior:
    def test_identical_components_give_half(self):
        f = make_filter((1.0, 1.0), (0.5, 0.5), (0.5, 0.5))
        for loss in (0.0, 1.0, 10.0):
            assert abs(gmm_posterior_clean(loss, f) - 0.5) < 1e-12

    def test_degenerate_prior(self):
        f = make_filter((0.0, 5.0), (1.0, 1.0), (1.0, 0.0))
        for loss in (0.0, 5.0, 100.0):
            assert gmm_posterior_clean(loss, f) == 1.0

    def test_separated_components(self):
        f = make_filter((0.0, 1.0), (0.01, 0.01), (0.5, 0.5))
        assert gmm_posterior_clean(0.0, f) > 0.999

    def test_bounds_over_random_inputs(self):
        g = np.random.default_rng(0)
        for _ in range(200):
            mu = np.sort(g.uniform(0, 5, 2))
            var = g.uniform(VARIANCE_FLOOR, 3.0, 2)
            w1 = g.uniform(0, 1)
            f = make_filter(mu, var, (w1, 1 - w1))
            p = gmm_posterior_clean(float(g.uniform(-10, 20)), f)
            assert 0.0 <= p <= 1.0

    def test_vectorized(self):
        f = make_filter()
        out = gmm_posterior_clean(np.array([0.2, 2.0]), f)
        assert out.shape == (2,)
        assert out[0] > 0.9 > out[1]


class TestFitLocalGmm:
    def test_recovers_known_mixture(self):
        g = np.random.default_rng(42)
        low = g.normal(0.2, 0.05, 1400)
        high = g.normal(2.0, 0.3, 600)
        losses = np.concatenate([low, high])
        fit = fit_local_gmm(losses, cold_start_filter(10), 100, 1e-6)
        assert abs(fit.params.means[0] - 0.2) < 0.05
        assert abs(fit.params.means[1] - 2.0) < 0.05
        assert abs(fit.params.weights[0] - 0.7) < 0.05
        assert not fit.degenerate

    def test_converges_fast_from_optimum(self):
        losses = np.array([0.0, 0.0, 1.0, 1.0])
        init = GmmParams((0.0, 1.0), (VARIANCE_FLOOR, VARIANCE_FLOOR), (0.5, 0.5))
        fit = fit_local_gmm(losses, init, 100, 1e-6)
        assert fit.iterations <= 2
        assert abs(fit.params.means[0]) < 1e-9
        assert abs(fit.params.means[1] - 1.0) < 1e-9

    def test_identical_losses_degenerate(self):
        fit = fit_local_gmm(np.full(50, 0.5), cold_start_filter(4), 100, 1e-6)
        assert fit.degenerate
        assert fit.params.means == (0.5, 0.5)
        assert fit.params.weights == (1.0, 0.0)

    def test_loglik_never_decreases(self):
        g = np.random.default_rng(1)
        for trial in range(20):
            losses = np.abs(g.normal(g.uniform(0, 3), g.uniform(0.05, 1.0),
                                     int(g.integers(5, 300))))
            init = cold_start_filter(int(g.integers(2, 20)))
            fit = fit_local_gmm(losses, init, 50, 1e-8)
            if fit.degenerate:
                continue
            trace = np.array(fit.log_likelihoods)
            assert (np.diff(trace) >= -1e-9).all(), f"trial {trial}: {trace}"

    def test_components_ordered(self):
        g = np.random.default_rng(2)
        for _ in range(20):
            losses = g.exponential(1.0, 100)
            fit = fit_local_gmm(losses, cold_start_filter(5), 50, 1e-6)
            assert fit.params.means[0] <= fit.params.means[1]

    def test_empty_losses_rejected(self):
        with pytest.raises(ValueError):
            fit_local_gmm(np.empty(0), cold_start_filter(4))


class TestAggregateFilters:
    def bank_from(self, pairs):
        return FilterBank([FilterBankEntry(p, n, 0) for p, n in pairs])

    def test_identical_filters_idempotent(self):
        f = make_filter()
        out = aggregate_filters(self.bank_from([(f, 10), (f, 3), (f, 99)]))
        assert out.means == f.means
        assert out.variances == f.variances
        assert out.weights == f.weights

    def test_two_client_arithmetic(self):
        a = make_filter((0.0, 1.0), (1.0, 1.0), (0.5, 0.5))
        b = make_filter((0.4, 1.0), (1.0, 1.0), (0.5, 0.5))
        out = aggregate_filters(self.bank_from([(a, 1), (b, 3)]))
        assert abs(out.means[0] - 0.3) < 1e-12

    def test_zero_weight_clients_ignored(self):
        a = make_filter((0.0, 1.0), (1.0, 1.0), (0.5, 0.5))
        b = make_filter((9.0, 10.0), (2.0, 2.0), (0.1, 0.9))
        out = aggregate_filters(self.bank_from([(a, 5), (b, 0)]))
        assert out.means == a.means

    def test_all_zero_weights_rejected(self):
        with pytest.raises(ValueError):
            aggregate_filters(self.bank_from([(make_filter(), 0)]))

    def test_random_banks_simplex_and_envelope(self):
        g = np.random.default_rng(3)
        for _ in range(50):
            pairs = []
            for _ in range(int(g.integers(1, 8))):
                mu = np.sort(g.uniform(0, 4, 2))
                var = g.uniform(0.01, 2.0, 2)
                w1 = g.uniform(0, 1)
                pairs.append((make_filter(mu, var, (w1, 1 - w1)), int(g.integers(1, 100))))
            out = aggregate_filters(self.bank_from(pairs))
            assert abs(out.weights[0] + out.weights[1] - 1.0) < 1e-12
            for attr in ("means", "variances", "weights"):
                for comp in (0, 1):
                    values = [getattr(p, attr)[comp] for p, _ in pairs]
                    assert min(values) - 1e-12 <= getattr(out, attr)[comp] <= max(values) + 1e-12


class TestFilterSplit:
    def test_all_clean_prior(self):
        f = make_filter((0.0, 5.0), (1.0, 1.0), (1.0, 0.0))
        clean, noisy, delta = filter_split(np.linspace(0, 10, 20), f)
        assert len(clean) == 20 and len(noisy) == 0 and delta == 0.0

    def test_all_noisy_prior(self):
        f = make_filter((0.0, 5.0), (1.0, 1.0), (0.0, 1.0))
        clean, noisy, delta = filter_split(np.linspace(0, 10, 20), f)
        assert len(clean) == 0 and len(noisy) == 20 and delta == 1.0

    def test_partition_property(self):
        g = np.random.default_rng(4)
        f = make_filter()
        for _ in range(20):
            losses = g.exponential(1.0, int(g.integers(1, 100)))
            clean, noisy, delta = filter_split(losses, f)
            assert len(clean) + len(noisy) == len(losses)
            assert len(np.intersect1d(clean, noisy)) == 0
            assert 0.0 <= delta <= 1.0
            assert abs(delta - len(noisy) / len(losses)) < 1e-12


class TestRelabel:
    def confident_model(self):
        # logits = 8 * x, so predictions are confident away from the origin
        return ModelParams((np.array([[8.0, -8.0]]),), (np.zeros(2),))

    def test_zeta_zero_keeps_all(self):
        kept, pseudo = relabel(self.confident_model(), np.array([[1.0], [-1.0], [0.0]]), 0.0)
        assert len(kept) == 3
        assert pseudo.tolist() == [0, 1, 0]

    def test_zeta_one_keeps_none(self):
        kept, _ = relabel(self.confident_model(), np.array([[0.5], [-0.5]]), 1.0)
        assert len(kept) == 0

    def test_threshold_filters_low_confidence(self):
        kept, pseudo = relabel(self.confident_model(), np.array([[1.0], [0.01], [-1.0]]), 0.9)
        assert kept.tolist() == [0, 2]
        assert pseudo.tolist() == [0, 1]

    def test_empty_input(self):
        kept, pseudo = relabel(self.confident_model(), np.empty((0, 1)), 0.5)
        assert len(kept) == 0 and len(pseudo) == 0


def test_cold_start_filter_scales_with_classes():
    f = cold_start_filter(10)
    assert abs(f.means[0] - 0.5 * math.log(10)) < 1e-12
    assert abs(f.means[1] - 2.0 * math.log(10)) < 1e-12
    assert f.weights == (0.5, 0.5)


def test_average_filter_params_matches_brute_force():
    g = np.random.default_rng(5)
    for _ in range(30):
        pairs = []
        for _ in range(int(g.integers(1, 6))):
            mu = np.sort(g.uniform(0, 4, 2))
            var = g.uniform(0.01, 2.0, 2)
            w1 = g.uniform(0, 1)
            pairs.append((make_filter(mu, var, (w1, 1 - w1)), int(g.integers(0, 50)) + 1))
        out = average_filter_params(pairs)
        total = sum(n for _, n in pairs)
        for comp in (0, 1):
            expected = sum(p.means[comp] * n for p, n in pairs) / total
            assert abs(out.means[comp] - expected) < 1e-12
