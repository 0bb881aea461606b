import numpy as np
import pytest

from core.errors import ShapeError
from inference.estimators import mmse_estimate, posterior_weights, prior_mean, weighted_mean


class TestMmseEstimate:

    def test_conjugate_gaussian_posterior_mean(self, gaussian_model):
        """가우시안 사전분포 샘플 + 가우시안 노이즈 모델 → 닫힌 형태 사후 평균과 0.5 이내."""
        rng = np.random.default_rng(11)
        models = {}
        for _ in range(50):
            mu0 = rng.uniform(50.0, 200.0)
            sigma0 = rng.uniform(1.0, 5.0)
            sigma = float(rng.choice([5.0, 10.0, 20.0]))
            if sigma not in models:
                models[sigma] = gaussian_model(sigma=sigma, bins_s=512, bins_x=512, lo=-128.0, hi=384.0)
            model = models[sigma]

            x = mu0 + rng.normal(0.0, np.hypot(sigma0, sigma))
            x = model.column_centers[np.argmin(np.abs(model.column_centers - x))]
            samples = rng.normal(mu0, sigma0, size=10_000)

            expected = (mu0 * sigma ** 2 + x * sigma0 ** 2) / (sigma0 ** 2 + sigma ** 2)
            assert float(mmse_estimate(samples, x, model)) == pytest.approx(expected, abs=0.5)

    def test_uniform_model_reduces_to_prior_mean(self, uniform_model, rng):
        samples = rng.uniform(0, 255, size=(6, 5, 20))
        x = rng.uniform(0, 255, size=(6, 5))
        np.testing.assert_allclose(mmse_estimate(samples, x, uniform_model), prior_mean(samples), rtol=1e-12)

    def test_estimate_stays_inside_sample_hull(self, random_model, rng):
        samples = rng.uniform(20, 80, size=(50, 7))
        estimate = mmse_estimate(samples, rng.uniform(0, 100, size=50), random_model)
        assert np.all(estimate >= samples.min(axis=-1))
        assert np.all(estimate <= samples.max(axis=-1))

    def test_single_sample(self, random_model):
        np.testing.assert_array_equal(mmse_estimate(np.array([[42.0]]), np.array([10.0]), random_model), [42.0])

    def test_weights_follow_observation(self, gaussian_model):
        model = gaussian_model(sigma=5.0)
        weights = posterior_weights(np.array([90.0, 100.0, 110.0]), 100.5, model)
        assert weights[1] > weights[0] and weights[1] > weights[2]

    def test_weighted_mean_clips_to_hull(self):
        samples = np.array([1.0, 2.0])
        assert weighted_mean(samples, np.array([1.0, 1.0])) == 1.5
        assert weighted_mean(samples, np.array([1e300, 1e-300])) >= 1.0

    def test_missing_sample_axis(self, uniform_model):
        with pytest.raises(ShapeError):
            prior_mean(np.float64(3.0))
        with pytest.raises(ShapeError):
            mmse_estimate(np.zeros((4, 0)), np.zeros(4), uniform_model)


class TestWeightMonotonicity:

    @pytest.mark.parametrize("seed", range(20))
    def test_raising_weight_of_largest_sample(self, seed, random_model):
        rng = np.random.default_rng(seed)
        samples = rng.uniform(0, 100, size=(30, int(rng.integers(2, 16))))
        weights = posterior_weights(samples, rng.uniform(0, 100, size=30), random_model)
        top = samples.argmax(axis=-1)
        rows = np.arange(len(samples))

        previous = weighted_mean(samples, weights)
        for factor in (1.5, 4.0, 1e3):
            boosted = weights.copy()
            boosted[rows, top] *= factor
            current = weighted_mean(samples, boosted)
            assert np.all(current >= previous - 1e-12)
            previous = current
