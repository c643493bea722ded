"""GAN losses and the optimal-discriminator identities."""
import math

import numpy as np
import pytest

from waveanom.errors import ConfigError, DataError
from waveanom.lockgan import (bce_loss, discriminator_loss, generator_loss,
                              jensen_shannon, minimax_value_at_optimum,
                              optimal_discriminator)


def random_distribution(rng, size):
    p = rng.uniform(0.0, 1.0, size)
    return p / p.sum()


class TestBce:
    def test_confident_correct_is_zero(self):
        assert float(bce_loss(np.ones(4), np.ones(4) - 1e-13).data) < 1e-10

    def test_half_certainty_is_ln2(self):
        assert abs(float(bce_loss(np.array([1.0]), np.array([0.5])).data) - math.log(2)) < 1e-12

    def test_matches_logit_form(self, rng):
        # applying the sigmoid then bce equals the explicit logit transcription
        for _ in range(10):
            w = rng.normal(size=3)
            xs = rng.normal(size=(8, 3))
            ys = rng.integers(0, 2, size=8).astype(float)
            logits = xs @ w
            p = 1.0 / (1.0 + np.exp(-logits))
            direct = -np.mean(ys * np.log(1 / (1 + np.exp(-logits)))
                              + (1 - ys) * np.log(1 - 1 / (1 + np.exp(-logits))))
            got = float(bce_loss(ys, p).data)
            assert abs(got - direct) < 1e-10

    def test_shape_mismatch(self):
        from waveanom.errors import ShapeError
        with pytest.raises(ShapeError):
            bce_loss(np.ones(3), np.full(4, 0.5))


class TestDiscriminatorLoss:
    def test_perfect_discrimination_is_zero(self):
        v = float(discriminator_loss(np.ones(4) - 1e-13, np.zeros(4) + 1e-13).data)
        assert abs(v) < 1e-10

    def test_coin_flip_is_ln2(self):
        v = float(discriminator_loss(np.full(3, 0.5), np.full(3, 0.5)).data)
        assert abs(v - math.log(2)) < 1e-12

    def test_random_batches_match_transcription(self, rng):
        for _ in range(20):
            d_real = rng.uniform(0.01, 0.99, size=6)
            d_fake = rng.uniform(0.01, 0.99, size=6)
            want = -0.5 * np.mean(np.log(d_real)) - 0.5 * np.mean(np.log(1 - d_fake))
            assert abs(float(discriminator_loss(d_real, d_fake).data) - want) < 1e-12


class TestGeneratorLoss:
    def test_saturating_at_half(self):
        v = float(generator_loss(np.array([0.5]), "saturating").data)
        assert abs(v - math.log(0.5)) < 1e-12

    def test_nonsaturating_confident(self):
        v = float(generator_loss(np.ones(3) - 1e-13, "nonsaturating").data)
        assert abs(v) < 1e-10

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            generator_loss(np.array([0.5]), "wasserstein")

    def test_both_variants_improve_with_rising_d_fake(self):
        # numerical slope over a grid: both losses decrease as d_fake rises
        grid = np.linspace(0.05, 0.95, 19)
        for variant in ("saturating", "nonsaturating"):
            vals = [float(generator_loss(np.array([p]), variant).data) for p in grid]
            diffs = np.diff(vals)
            assert np.all(diffs < 0), variant


class TestOptimalDiscriminator:
    def test_equal_distributions_half(self, rng):
        p = random_distribution(rng, 6)
        np.testing.assert_allclose(optimal_discriminator(p, p), np.full(6, 0.5))

    def test_generator_missing_mass(self):
        p_data = np.array([0.5, 0.5, 0.0])
        p_g = np.array([0.0, 0.5, 0.5])
        d = optimal_discriminator(p_data, p_g)
        assert d[0] == 1.0 and d[1] == 0.5 and d[2] == 0.0

    def test_two_thirds(self):
        d = optimal_discriminator(np.array([2 / 3, 1 / 3]), np.array([1 / 3, 2 / 3]))
        assert abs(d[0] - 2 / 3) < 1e-12

    def test_zero_over_zero_is_half(self):
        d = optimal_discriminator(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        assert d[0] == 0.5

    def test_negative_mass_rejected(self):
        with pytest.raises(DataError):
            optimal_discriminator(np.array([-0.1, 1.1]), np.array([0.5, 0.5]))


class TestMinimaxValue:
    def test_matched_distributions(self, rng):
        p = random_distribution(rng, 8)
        v = minimax_value_at_optimum(p, p)
        assert abs(v + 2 * math.log(2)) < 1e-12

    def test_disjoint_supports(self):
        p_data = np.array([0.5, 0.5, 0.0, 0.0])
        p_g = np.array([0.0, 0.0, 0.5, 0.5])
        assert abs(minimax_value_at_optimum(p_data, p_g)) < 1e-12

    def test_dual_path_identity(self, rng):
        # direct adversarial value at D* equals 2 JSD - 2 ln 2
        for _ in range(100):
            p_data = random_distribution(rng, int(rng.integers(2, 12)))
            p_g = random_distribution(rng, len(p_data))
            d_star = optimal_discriminator(p_data, p_g)
            mask_d = p_data > 0
            mask_g = p_g > 0
            direct = (p_data[mask_d] * np.log(d_star[mask_d])).sum() + \
                     (p_g[mask_g] * np.log(1.0 - d_star[mask_g])).sum()
            viaJsd = minimax_value_at_optimum(p_data, p_g)
            assert abs(direct - viaJsd) < 1e-10

    def test_jsd_bounds(self, rng):
        p = random_distribution(rng, 5)
        q = random_distribution(rng, 5)
        assert 0.0 <= jensen_shannon(p, q) <= math.log(2) + 1e-12
