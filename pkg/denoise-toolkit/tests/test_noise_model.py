import numpy as np
import pytest
from scipy import stats

from core.container import encode_array, write_container
from core.errors import FormatError, NoiseModelError, ShapeError
from noise.noise_model import (
    DENSITY_FLOOR, NOISE_MODEL_MAGIC, NoiseModel, build_histogram, likelihood, likelihood_grad_s,
    load_noise_model, row_mean_observation, save_noise_model,
)


def _row_sums(model: NoiseModel) -> np.ndarray:
    return model.density.sum(axis=1) * model.bin_width_x


class TestBuildHistogram:

    def test_default_bins(self, rng):
        clean = rng.uniform(0, 255, size=(32, 32))
        model = build_histogram([(clean, clean + rng.normal(0, 5, clean.shape))])
        assert model.density.shape == (256, 256)

    def test_rows_normalized_and_floored(self, rng):
        clean = rng.uniform(0, 100, size=(64, 64))
        noisy = clean + rng.normal(0, 3, clean.shape)
        model = build_histogram([(clean, noisy)], bins_s=32, bins_x=48)
        np.testing.assert_allclose(_row_sums(model), 1.0, atol=1e-6)
        assert model.density.min() >= DENSITY_FLOOR * (1 - 1e-9)

    def test_noiseless_pairs_put_mass_on_diagonal(self, rng):
        clean = rng.uniform(0, 64, size=(40, 40))
        model = build_histogram([(clean, clean)], bins_s=16, bins_x=16, value_range=(0, 64))
        for r in np.flatnonzero(model.row_counts):
            assert np.argmax(model.density[r]) == r
            assert model.density[r, r] * model.bin_width_x > 1 - 1e-6

    def test_gaussian_row_matches_analytic_density(self):
        """10⁶ 샘플: 밀도 1e-2 초과 bin 에서 상대 오차 5% 이내."""
        rng = np.random.default_rng(1)
        sigma, lo, hi = 10.0, 0.0, 256.0
        levels = np.array([32.0, 96.0, 160.0, 224.0])
        clean = np.repeat(levels, 1_000_000)
        noisy = clean + rng.normal(0.0, sigma, clean.shape)
        model = build_histogram([(clean, noisy)], bins_s=4, bins_x=256, value_range=(lo, hi))

        edges = np.linspace(lo, hi, 257)
        for r, s in enumerate(levels):
            analytic = np.diff(stats.norm.cdf(edges, s, sigma)) / model.bin_width_x
            mask = analytic > 1e-2
            rel = np.abs(model.density[r, mask] - analytic[mask]) / analytic[mask]
            assert rel.max() < 0.05

    def test_empty_rows_copy_nearest(self):
        clean = np.concatenate([np.full(100, 5.0), np.full(100, 75.0)])
        noisy = clean + np.linspace(-2, 2, clean.size)
        model = build_histogram([(clean, noisy)], bins_s=8, bins_x=20, value_range=(0, 80))
        assert model.coverage() == pytest.approx(2 / 8)
        np.testing.assert_array_equal(model.density[1], model.density[0])
        np.testing.assert_array_equal(model.density[6], model.density[7])
        # 행 3 은 행 0 에, 행 4 는 행 7 에 더 가깝다
        np.testing.assert_array_equal(model.density[3], model.density[0])
        np.testing.assert_array_equal(model.density[4], model.density[7])

    def test_degenerate_range(self):
        flat = np.full((4, 4), 3.0)
        with pytest.raises(NoiseModelError, match="degenerate range"):
            build_histogram([(flat, flat)])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            build_histogram([(np.zeros((4, 4)), np.zeros((4, 5)))])

    def test_no_pairs(self):
        with pytest.raises(NoiseModelError):
            build_histogram([])


class TestLikelihood:

    def test_uniform_model_is_constant(self, uniform_model):
        x = np.linspace(0, 255, 50)
        s = np.linspace(-20, 300, 50)
        np.testing.assert_allclose(likelihood(uniform_model, x, s), 1 / 256)
        np.testing.assert_array_equal(likelihood_grad_s(uniform_model, x, s), 0.0)

    def test_row_center_hits_stored_density(self, random_model):
        centers = random_model.row_centers
        x = random_model.column_centers[7]
        np.testing.assert_allclose(likelihood(random_model, x, centers), random_model.density[:, 7], rtol=1e-12)

    def test_midpoint_interpolates(self, random_model):
        centers = random_model.row_centers
        mid = 0.5 * (centers[3] + centers[4])
        x = random_model.column_centers[11]
        expected = 0.5 * (random_model.density[3, 11] + random_model.density[4, 11])
        assert likelihood(random_model, x, mid) == pytest.approx(expected, rel=1e-12)

    def test_constant_beyond_outer_centers(self, random_model):
        x = random_model.column_centers[2]
        top = random_model.row_centers[-1]
        assert likelihood(random_model, x, top + 40) == pytest.approx(random_model.density[-1, 2])
        assert likelihood_grad_s(random_model, x, top + 0.5) == 0.0
        assert likelihood_grad_s(random_model, x, random_model.row_centers[0] - 0.5) == 0.0

    def test_grad_matches_finite_difference(self, random_model, rng):
        spacing = random_model.row_spacing
        centers = random_model.row_centers
        # 매듭점에서 떨어진 내부 s
        s = centers[:-1] + spacing * rng.uniform(0.1, 0.9, size=centers.size - 1)
        x = rng.uniform(random_model.range_min, random_model.range_max, size=s.size)
        h = 1e-3 * spacing
        numeric = (likelihood(random_model, x, s + h) - likelihood(random_model, x, s - h)) / (2 * h)
        analytic = likelihood_grad_s(random_model, x, s)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_grad_matches_finite_difference_random_models(self, seed):
        rng = np.random.default_rng(seed)
        bins_s, bins_x = rng.integers(4, 24, size=2)
        lo = rng.uniform(-50.0, 50.0)
        hi = lo + rng.uniform(10.0, 300.0)
        raw = rng.uniform(0.05, 1.0, size=(bins_s, bins_x))
        model = NoiseModel(density=raw / (raw.sum(axis=1, keepdims=True) * (hi - lo) / bins_x),
                           range_min=lo, range_max=hi)

        rows = rng.integers(0, bins_s - 1, size=30)
        s = model.row_centers[rows] + model.row_spacing * rng.uniform(0.1, 0.9, size=30)
        x = rng.uniform(lo, hi, size=30)
        h = 1e-4 * model.row_spacing
        numeric = (likelihood(model, x, s + h) - likelihood(model, x, s - h)) / (2 * h)
        np.testing.assert_allclose(likelihood_grad_s(model, x, s), numeric, rtol=1e-6, atol=1e-12)

    def test_grad_at_knot_is_right_derivative(self, random_model):
        x = random_model.column_centers[5]
        knot = random_model.row_centers[6]
        expected = (random_model.density[7, 5] - random_model.density[6, 5]) / random_model.row_spacing
        assert likelihood_grad_s(random_model, x, knot) == pytest.approx(expected)

    def test_row_mean_observation_tracks_signal(self, gaussian_model):
        model = gaussian_model(sigma=5.0, bins_s=32, bins_x=256)
        inner = slice(4, 28)
        np.testing.assert_allclose(row_mean_observation(model)[inner], model.row_centers[inner], atol=0.05)


class TestNoiseModelFile:

    def test_round_trip(self, tmp_path, gaussian_model):
        model = gaussian_model()
        save_noise_model(model, tmp_path / "g.nm")
        loaded = load_noise_model(tmp_path / "g.nm")
        np.testing.assert_array_equal(loaded.density, model.density)
        assert (loaded.range_min, loaded.range_max) == (model.range_min, model.range_max)

    def test_truncated_file(self, tmp_path, gaussian_model):
        path = tmp_path / "g.nm"
        save_noise_model(gaussian_model(), path)
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(FormatError):
            load_noise_model(path)

    def test_unnormalized_row_names_row(self, tmp_path):
        bins = 4
        density = np.full((bins, bins), 1.0 / 8.0)
        density[2] *= 0.5
        path = tmp_path / "bad.nm"
        header = {"version": 1, "bins_s": bins, "bins_x": bins, "range_min": 0.0, "range_max": 8.0}
        write_container(path, NOISE_MODEL_MAGIC, header, encode_array(density, "f8"))
        with pytest.raises(NoiseModelError, match="row 2 is not normalized: sums to 0.5"):
            load_noise_model(path)

    def test_density_is_read_only(self, gaussian_model):
        model = gaussian_model(bins_s=8, bins_x=8)
        with pytest.raises(ValueError):
            model.density[0, 0] = 1.0
