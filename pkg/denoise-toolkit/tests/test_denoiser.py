import json

import numpy as np
import pytest

from core.errors import ModeMismatchError, ShapeError, ValidationError
from inference.denoiser import DenoiseMode, denoise_image, write_posterior_dump
from inference.estimators import weighted_mean
from inference.tiling import TilingConfig
from training.config import TrainMode


TILING = TilingConfig(tile=32)


@pytest.fixture
def image(rng):
    return rng.normal(100.0, 25.0, size=(24, 20)).astype(np.float32)


class TestModeGuards:

    def test_direct_mode_rejects_sample_checkpoint(self, tiny_config, make_checkpoint, image):
        with pytest.raises(ModeMismatchError, match="mode mismatch"):
            denoise_image(make_checkpoint(tiny_config), image, TILING, mode=DenoiseMode.N2V_DIRECT)

    @pytest.mark.parametrize("mode", [DenoiseMode.MMSE, DenoiseMode.PRIOR_MEAN])
    def test_sample_modes_reject_n2v_checkpoint(self, tiny_config, make_checkpoint, image, uniform_model, mode):
        ckpt = make_checkpoint(tiny_config, mode=TrainMode.N2V)
        with pytest.raises(ModeMismatchError, match="noise model required"):
            denoise_image(ckpt, image, TILING, mode=mode, noise_model=uniform_model)

    def test_mmse_needs_noise_model(self, tiny_config, make_checkpoint, image):
        with pytest.raises(ValidationError, match="requires a noise model"):
            denoise_image(make_checkpoint(tiny_config), image, TILING, mode=DenoiseMode.MMSE)


class TestDenoiseImage:

    def test_uniform_model_matches_prior_mean(self, tiny_config, make_checkpoint, image, uniform_model):
        ckpt = make_checkpoint(tiny_config)
        mmse = denoise_image(ckpt, image, TILING, mode=DenoiseMode.MMSE, noise_model=uniform_model).image
        prior = denoise_image(ckpt, image, TILING, mode=DenoiseMode.PRIOR_MEAN).image
        assert mmse.dtype == np.float32 and mmse.shape == image.shape
        np.testing.assert_allclose(mmse, prior, rtol=1e-6)

    def test_direct_mode_shape(self, tiny_config, make_checkpoint, image):
        ckpt = make_checkpoint(tiny_config, mode=TrainMode.SUPERVISED)
        result = denoise_image(ckpt, image, TILING, mode=DenoiseMode.N2V_DIRECT)
        assert result.image.shape == image.shape and result.posteriors == []

    def test_repeat_is_identical(self, tiny_config, make_checkpoint, image, random_model):
        ckpt = make_checkpoint(tiny_config)
        a = denoise_image(ckpt, image, TILING, noise_model=random_model).image
        b = denoise_image(ckpt, image, TILING, noise_model=random_model).image
        np.testing.assert_array_equal(a, b)

    def test_posterior_dump_reproduces_estimate(self, tiny_config, make_checkpoint, image, gaussian_model):
        model = gaussian_model(sigma=25.0)
        ckpt = make_checkpoint(tiny_config)
        coords = [(0, 0), (5, 7), (23, 19)]
        result = denoise_image(ckpt, image, TILING, noise_model=model, dump_at=coords)

        assert [(p.row, p.col) for p in result.posteriors] == coords
        for p in result.posteriors:
            assert p.x == float(image[p.row, p.col])
            assert p.samples.shape == p.weights.shape == (3,)
            assert np.all(p.weights > 0)
            assert np.float32(weighted_mean(p.samples, p.weights)) == result.image[p.row, p.col]

    def test_dump_coordinate_outside_image(self, tiny_config, make_checkpoint, image, uniform_model):
        with pytest.raises(ShapeError, match="outside image"):
            denoise_image(make_checkpoint(tiny_config), image, TILING, noise_model=uniform_model,
                          dump_at=[(24, 0)])

    def test_dump_needs_sample_checkpoint(self, tiny_config, make_checkpoint, image):
        ckpt = make_checkpoint(tiny_config, mode=TrainMode.N2V)
        with pytest.raises(ValidationError, match="posterior dump"):
            denoise_image(ckpt, image, TILING, mode=DenoiseMode.N2V_DIRECT, dump_at=[(0, 0)])


class TestPosteriorDumpFile:

    def test_records_appended_per_image(self, tmp_path, tiny_config, make_checkpoint, image, uniform_model):
        ckpt = make_checkpoint(tiny_config)
        result = denoise_image(ckpt, image, TILING, noise_model=uniform_model, dump_at=[(1, 2)])
        path = tmp_path / "posteriors.jsonl"
        write_posterior_dump(result.posteriors, path, "a")
        write_posterior_dump(result.posteriors, path, "b")

        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["image"] for r in records] == ["a", "b"]
        assert records[0]["row"] == 1 and records[0]["col"] == 2
        assert len(records[0]["samples"]) == len(records[0]["weights"]) == 3
