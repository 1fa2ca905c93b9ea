"""
Tests for quantum/photon_source.py: Poisson statistics and PNS splitting.
"""
import math

import numpy as np
import pytest

from quantum.photon_source import (
    SourceConfig,
    multi_photon_fraction,
    pns_split,
    poisson_pmf,
    prob_multi,
    prob_nonvacuum,
    prob_vacuum,
    sample_detected_photon_number,
    sample_photon_number,
    truncation_point,
)


class TestPoissonPmf:
    def test_vacuum(self):
        assert poisson_pmf(0, 0.1) == pytest.approx(math.exp(-0.1))

    def test_single_photon(self):
        assert poisson_pmf(1, 0.2) == pytest.approx(0.2 * math.exp(-0.2))

    def test_tail_beyond_twelve_is_negligible(self):
        assert sum(poisson_pmf(n, 0.2) for n in range(13, 80)) < 1e-12

    def test_sums_to_one(self):
        assert sum(poisson_pmf(n, 3.0) for n in range(0, 60)) == pytest.approx(1.0, abs=1e-12)

    def test_negative_n_is_zero(self):
        assert poisson_pmf(-1, 1.0) == 0.0

    def test_nonpositive_mu_rejected(self):
        with pytest.raises(ValueError):
            poisson_pmf(0, 0.0)

    def test_large_n_does_not_overflow(self):
        assert 0.0 < poisson_pmf(200, 150.0) < 1.0

    def test_truncation_point_past_mode(self):
        n = truncation_point(0.1)
        assert poisson_pmf(n, 0.1) < 1e-16
        assert n > 1


class TestDerivedProbabilities:
    def test_partition(self):
        mu = 0.7
        assert prob_vacuum(mu) + poisson_pmf(1, mu) + prob_multi(mu) == pytest.approx(1.0)

    def test_multi_photon_fraction(self):
        mu = 0.1
        expected = (1 - math.exp(-mu) - mu * math.exp(-mu)) / (1 - math.exp(-mu))
        assert multi_photon_fraction(mu) == pytest.approx(expected)

    def test_small_mu_precision(self):
        assert prob_nonvacuum(1e-12) == pytest.approx(1e-12, rel=1e-9)


class TestSampling:
    def test_mean_photon_number(self, rng):
        draws = [sample_photon_number(0.5, rng) for _ in range(20_000)]
        assert np.mean(draws) == pytest.approx(0.5, abs=4 * math.sqrt(0.5 / 20_000))

    def test_vector_draw_keeps_vacuum(self, rng):
        draws = sample_photon_number(0.5, rng, size=20_000)
        assert draws.shape == (20_000,)
        assert draws.min() == 0
        assert draws.mean() == pytest.approx(0.5, abs=4 * math.sqrt(0.5 / 20_000))
        assert isinstance(sample_photon_number(0.5, rng), int)

    def test_detected_pulses_are_never_vacuum(self, rng):
        draws = sample_detected_photon_number(0.01, rng, size=5_000)
        assert draws.min() >= 1

    def test_detected_mean(self, rng):
        mu = 0.5
        draws = sample_detected_photon_number(mu, rng, size=20_000)
        assert draws.mean() == pytest.approx(mu / (1 - math.exp(-mu)), abs=0.02)

    def test_scalar_draw(self, rng):
        assert isinstance(sample_detected_photon_number(0.1, rng), int)

    def test_source_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            SourceConfig(0.0)


class TestPnsSplit:
    @pytest.mark.parametrize("n, expected", [(0, (0, 0)), (1, (0, 1)), (2, (1, 1)), (3, (1, 2))])
    def test_split(self, n, expected):
        assert pns_split(n) == expected

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            pns_split(-1)
