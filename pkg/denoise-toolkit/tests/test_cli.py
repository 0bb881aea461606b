import json

import pytest

from core.config import THREADS_ENV
from core.pipeline_controller import PipelineController
from data.image_io import save_image
from main_denoiser import main
from noise.noise_model import save_noise_model
from training.checkpoint import save_checkpoint


SMALL_SYNTH = ["--size", "32", "--n", "4", "--sigma", "10", "--seed", "3", "--no-progress"]
SMALL_TRAIN = [
    "--epochs", "1", "--steps-per-epoch", "2", "--batch-size", "2", "--patch-size", "16",
    "--n-masked", "8", "--val-batches", "1", "--depth", "1", "--base-features", "2",
    "--samples", "4", "--no-progress",
]


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


@pytest.fixture
def dataset(tmp_path):
    root = tmp_path / "data"
    assert main(["synth", str(root), *SMALL_SYNTH]) == 0
    return root


def _tree_bytes(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestSynthCommand:

    def test_same_seed_byte_identical(self, tmp_path, dataset):
        again = tmp_path / "again"
        assert main(["synth", str(again), *SMALL_SYNTH]) == 0
        assert _tree_bytes(dataset) == _tree_bytes(again)
        assert len(list((dataset / "noisy").iterdir())) == 4

    def test_manifest_replay(self, tmp_path, dataset):
        manifest = json.loads((dataset / "manifest.json").read_text())
        assert manifest["seed"] == 3 and manifest["params"]["sigma"] == 10.0

        replay = tmp_path / "replay"
        assert main(["synth", str(replay), "--from-manifest", str(dataset / "manifest.json")]) == 0
        assert _tree_bytes(dataset) == _tree_bytes(replay)

    def test_invalid_parameter_writes_nothing(self, tmp_path, capsys):
        out = tmp_path / "bad"
        assert main(["synth", str(out), "--sigma", "-1"]) == 1
        assert not out.exists()
        assert "sigma" in capsys.readouterr().err

    def test_existing_output_needs_force(self, dataset):
        assert main(["synth", str(dataset), *SMALL_SYNTH]) == 1
        assert main(["synth", str(dataset), *SMALL_SYNTH, "--force"]) == 0

    def test_config_file_section(self, tmp_path):
        config = tmp_path / "run.ini"
        config.write_text("[synth]\nsize = 16\nn_images = 2\nsigma = 5\n")
        out = tmp_path / "cfg"
        assert main(["synth", str(out), "--config", str(config), "--n", "3"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert (manifest["params"]["size"], manifest["params"]["n_images"]) == (16, 3)


class TestUsageErrors:

    @pytest.mark.parametrize("argv", [[], ["frobnicate"], ["train", "data"], ["denoise", "m.ckpt", "x.raw"]])
    def test_usage_is_validation_error(self, argv):
        assert main(argv) == 1

    def test_unknown_config_key(self, tmp_path, dataset):
        config = tmp_path / "run.ini"
        config.write_text("[train]\nlearning_speed = 3\n")
        argv = ["train", str(dataset), "--mode", "n2v", "--out", str(tmp_path / "m.ckpt"), "--config", str(config)]
        assert main(argv) == 1

    def test_pn2v_without_noise_model(self, tmp_path, dataset, capsys):
        assert main(["train", str(dataset), "--mode", "pn2v", "--out", str(tmp_path / "m.ckpt")]) == 1
        assert "--noise-model" in capsys.readouterr().err
        assert not (tmp_path / "m.ckpt").exists()

    def test_corrupt_checkpoint(self, tmp_path, dataset):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint")
        argv = ["denoise", str(bad), str(dataset / "noisy"), "--out", str(tmp_path / "out"), "--mode", "n2v_direct"]
        assert main(argv) == 2


class TestPipeline:

    def test_n2v_train_denoise_evaluate(self, tmp_path, dataset, capsys):
        ckpt = tmp_path / "n2v.ckpt"
        assert main(["train", str(dataset), "--mode", "n2v", "--out", str(ckpt), *SMALL_TRAIN]) == 0
        assert (tmp_path / "n2v.log.jsonl").exists()

        again = tmp_path / "n2v_again.ckpt"
        assert main(["train", str(dataset), "--mode", "n2v", "--out", str(again), *SMALL_TRAIN]) == 0
        assert ckpt.read_bytes() == again.read_bytes()

        out = tmp_path / "out"
        assert main(["denoise", str(ckpt), str(dataset), "--out", str(out), "--mode", "n2v_direct",
                     "--tile", "32", "--no-progress"]) == 0
        assert sorted(p.name for p in out.iterdir()) == [f"img_{i:03d}.raw" for i in range(4)]

        # n2v 체크포인트는 샘플 기반 추론을 할 수 없다
        assert main(["denoise", str(ckpt), str(dataset), "--out", str(tmp_path / "x"), "--mode", "prior_mean"]) == 1

        capsys.readouterr()
        assert main(["evaluate", str(out), str(dataset / "clean")]) == 0
        assert "mean ± 2SEM" in capsys.readouterr().out
        records = (tmp_path / "out.psnr.jsonl").read_text().splitlines()
        assert len(records) == 4

    def test_pn2v_with_posterior_dump(self, tmp_path, dataset, capsys):
        model = tmp_path / "g.nm"
        assert main(["build-nm", str(dataset), "--out", str(model), "--bins", "64"]) == 0
        summary = capsys.readouterr().out
        assert "커버리지" in summary
        assert "평균 관측 편향" in summary

        ckpt = tmp_path / "pn2v.ckpt"
        assert main(["train", str(dataset), "--mode", "pn2v", "--noise-model", str(model),
                     "--out", str(ckpt), *SMALL_TRAIN]) == 0

        single = tmp_path / "single"
        assert main(["denoise", str(ckpt), str(dataset / "noisy" / "img_001.raw"), "--out", str(single),
                     "--noise-model", str(model), "--tile", "32", "--dump-posterior", "3,4",
                     "--no-progress"]) == 0
        dump = [json.loads(line) for line in (single / "posterior.jsonl").read_text().splitlines()]
        assert len(dump) == 1
        assert (dump[0]["image"], dump[0]["row"], dump[0]["col"]) == ("img_001", 3, 4)
        assert len(dump[0]["samples"]) == 4

        out = tmp_path / "out"
        assert main(["denoise", str(ckpt), str(dataset), "--out", str(out), "--noise-model", str(model),
                     "--tile", "32", "--no-progress"]) == 0
        capsys.readouterr()
        methods = [f"pn2v={out}", f"noisy={dataset / 'noisy'}"]
        records = tmp_path / "compare.jsonl"
        assert main(["compare", str(dataset / "clean"), *methods, "--records", str(records)]) == 0
        table = capsys.readouterr().out.splitlines()
        assert table[0].split() == ["method", "psnr", "si_psnr"]
        assert len(records.read_text().splitlines()) == 2 * 2 * 4

    def test_bad_dump_coordinate_writes_nothing(self, tmp_path, tiny_config, make_checkpoint, uniform_model, rng):
        ckpt, model = tmp_path / "m.ckpt", tmp_path / "u.nm"
        save_checkpoint(make_checkpoint(tiny_config), ckpt)
        save_noise_model(uniform_model, model)
        inputs = tmp_path / "inputs"
        save_image(rng.uniform(0, 255, (40, 40)), inputs / "a_big.raw")
        save_image(rng.uniform(0, 255, (16, 16)), inputs / "b_small.raw")

        out = tmp_path / "out"
        argv = ["denoise", str(ckpt), str(inputs), "--out", str(out), "--noise-model", str(model),
                "--tile", "32", "--dump-posterior", "30,30", "--no-progress"]
        assert main(argv) == 1
        assert not out.exists()

    def test_mismatched_method_directory(self, tmp_path, dataset):
        partial = tmp_path / "partial"
        partial.mkdir()
        (partial / "img_000.raw").write_bytes((dataset / "noisy" / "img_000.raw").read_bytes())
        assert main(["compare", str(dataset / "clean"), f"partial={partial}"]) == 1


class TestRuntimeFailures:

    def test_output_under_a_file(self, tmp_path, capsys):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x")
        assert main(["synth", str(blocker / "out"), "--n", "1", "--size", "8", "--no-progress"]) == 2
        assert "not a directory" in capsys.readouterr().err

    def test_unexpected_exception_exits_2(self, tmp_path, monkeypatch, capsys):
        def explode(*args, **kwargs):
            raise RuntimeError("out of memory")

        monkeypatch.setattr(PipelineController, "synth", explode)
        assert main(["synth", str(tmp_path / "out"), "--n", "1", "--size", "8"]) == 2
        assert "RuntimeError: out of memory" in capsys.readouterr().err
