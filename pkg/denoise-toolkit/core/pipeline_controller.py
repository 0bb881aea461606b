"""
pipeline_controller.py
======================
툴킷의 최상위 컨트롤러.
데이터 합성 → 노이즈 모델 → 학습 → 복원 → 평가 각 단계를 하나로 묶어
CommandRouter 가 호출할 수 있는 작업 단위로 제공한다.

의존성 그래프:
    data.synthetic ─┐
    data.dataset ───┼─ noise.noise_model ─┐
                    ├─ training.trainer ──┼─ inference.denoiser ─ evaluation.report
                    └─────────────────────┘
                  ↕
    모두 → PipelineController ← CommandRouter

규칙:
    - 모든 입력 검증은 파일을 하나라도 쓰기 전에 끝낸다.
    - 결과 요약은 stdout(print), 진행/진단은 logger(stderr).
"""

import json
import logging
import shutil
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch

from core.container import file_digest
from core.errors import FormatError, ValidationError
from data.dataset import CLEAN_DIR, NOISY_DIR, load_dataset_dir, load_image_set, match_pairs
from data.image_io import IMAGE_SUFFIXES, image_shape, list_images, load_image, save_image
from data.synthetic import SynthSpec, synth_dataset
from evaluation.metrics import MetricKind
from evaluation.report import (
    EvalReport, compare_methods, evaluate_set, format_comparison, format_report, write_records,
)
from inference.denoiser import DenoiseMode, check_dump_request, check_mode, denoise_image, write_posterior_dump
from inference.tiling import TilingConfig
from network.unet import UNetConfig
from noise.noise_model import (
    DEFAULT_BINS, NoiseModel, build_histogram, load_noise_model, row_mean_observation, save_noise_model,
)
from training.checkpoint import load_checkpoint, save_checkpoint, verify_noise_model_digest
from training.config import TrainConfig, TrainMode
from training.trainer import TrainResult, effective_net_config, train


logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
POSTERIOR_DUMP_NAME = "posterior.jsonl"


def ensure_writable(path: str | Path, force: bool, is_dir: bool = False) -> Path:
    """
    출력 경로가 이미 차 있으면 --force 없이는 거부한다.

    Raises:
        ValidationError : 기존 파일 / 비어있지 않은 디렉터리
        FormatError     : 상위 경로가 디렉터리가 아니라 만들 수 없음
    """
    path = Path(path)
    parent = next((p for p in path.parents if p.exists()), None)
    if parent is not None and not parent.is_dir():
        raise FormatError(f"cannot create {path}: {parent} is not a directory")
    if is_dir:
        occupied = path.is_dir() and any(path.iterdir())
        if path.exists() and not path.is_dir():
            raise ValidationError(f"output path is not a directory: {path}")
    else:
        occupied = path.exists()
    if occupied and not force:
        raise ValidationError(f"output already exists: {path} (use --force to overwrite)")
    return path


class PipelineController:
    """
    파이프라인 전체를 지휘하는 최상위 컨트롤러 클래스.

    역할:
        1. 스레드 수 설정 (torch intra-op)
        2. 명령별 작업 실행 (synth / build-nm / train / denoise / evaluate / compare)
        3. 결과 요약 출력
    """

    def __init__(self, threads: int = 1, progress: bool = True):
        if threads < 1:
            raise ValidationError(f"threads must be >= 1, got {threads}")
        self.threads = threads
        self.progress = progress
        torch.set_num_threads(threads)
        logger.debug("🏗️ [PipelineController] 초기화 완료 (threads=%d)", threads)

    # ============================================================
    #  synth
    # ============================================================

    def synth(self, spec: SynthSpec, out_dir: str | Path, image_format: str = "raw", force: bool = False) -> Path:
        """clean/, noisy/ 쌍과 manifest.json 을 기록한다."""
        spec.validate()
        suffix = _image_suffix(image_format)
        out_dir = ensure_writable(out_dir, force, is_dir=True)

        cleans, noisies = synth_dataset(spec)
        for sub in (CLEAN_DIR, NOISY_DIR):
            shutil.rmtree(out_dir / sub, ignore_errors=True)
        for idx, (clean, noisy) in enumerate(zip(cleans, noisies)):
            name = f"img_{idx:03d}{suffix}"
            save_image(clean, out_dir / CLEAN_DIR / name)
            save_image(noisy, out_dir / NOISY_DIR / name)

        manifest = {
            "version": MANIFEST_VERSION,
            "seed": spec.seed,
            "format": image_format,
            "params": spec.to_dict(),
        }
        (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"✅ [Synth] {out_dir}: {len(cleans)}쌍 ({spec.to_dict()['kind']}, σ={spec.sigma:g})")
        return out_dir

    @staticmethod
    def spec_from_manifest(manifest_path: str | Path) -> tuple[SynthSpec, str]:
        """manifest.json → (SynthSpec, 이미지 형식)."""
        path = Path(manifest_path)
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
            spec = SynthSpec(**manifest["params"])
            image_format = manifest.get("format", "raw")
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise ValidationError(f"cannot replay manifest {path}: {e}") from e
        spec.validate()
        return spec, image_format

    # ============================================================
    #  build-nm
    # ============================================================

    def build_noise_model(
        self,
        pairs_dir: str | Path,
        out_path: str | Path,
        bins_s: int = DEFAULT_BINS,
        bins_x: int = DEFAULT_BINS,
        value_range: tuple[float, float] | None = None,
        force: bool = False,
    ) -> NoiseModel:
        out_path = ensure_writable(out_path, force)
        image_set = load_image_set(pairs_dir, require_clean=True)
        model = build_histogram(list(zip(image_set.clean, image_set.noisy)), bins_s, bins_x, value_range)
        save_noise_model(model, out_path)

        n_empty = int(np.count_nonzero(model.row_counts == 0))
        covered = model.row_counts > 0
        bias = np.abs(row_mean_observation(model) - model.row_centers)[covered]
        print(f"✅ [NoiseModel] {out_path}: {bins_s}x{bins_x}, 범위 [{model.range_min:.4g}, {model.range_max:.4g}]")
        print(f"   행 커버리지 {100.0 * model.coverage():.1f}% (빈 행 {n_empty}/{bins_s}, 인접 행으로 채움)")
        if bias.size:
            print(f"   평균 관측 편향 max |E[x|s] - s| = {bias.max():.4g} (관측된 행 {bias.size}개)")
        return model

    # ============================================================
    #  train
    # ============================================================

    def train(
        self,
        data_dir: str | Path,
        train_cfg: TrainConfig,
        net_cfg: UNetConfig,
        out_path: str | Path,
        noise_model_path: str | Path | None = None,
        log_path: str | Path | None = None,
        force: bool = False,
    ) -> TrainResult:
        mode = TrainMode(train_cfg.mode)
        if mode is TrainMode.PN2V and noise_model_path is None:
            raise ValidationError("pn2v training requires --noise-model")
        net_cfg = effective_net_config(mode, net_cfg)
        net_cfg.validate()
        train_cfg.validate(net_cfg.size_multiple)

        out_path = Path(out_path)
        log_path = Path(log_path) if log_path else out_path.with_name(out_path.stem + ".log.jsonl")
        ensure_writable(out_path, force)
        ensure_writable(log_path, force)

        splits = load_dataset_dir(data_dir, require_clean=mode is TrainMode.SUPERVISED)
        noise_model = digest = None
        if mode is TrainMode.PN2V:
            noise_model = load_noise_model(noise_model_path)
            digest = file_digest(noise_model_path)

        val = splits.val
        result = train(
            train_cfg,
            net_cfg,
            splits.train.noisy,
            clean=splits.train.clean,
            noise_model=noise_model,
            noise_model_digest=digest,
            val_images=val.noisy if val else None,
            val_clean=val.clean if val else None,
            log_path=log_path,
            progress=self.progress,
        )
        save_checkpoint(result.checkpoint, out_path)
        print(
            f"✅ [Train] {out_path}: mode={mode.value}, 최저 검증 손실 "
            f"{result.checkpoint.best_val:.6f} (epoch {result.best_epoch}/{train_cfg.epochs})"
        )
        print(f"   epoch 로그: {log_path}")
        return result

    # ============================================================
    #  denoise
    # ============================================================

    def denoise(
        self,
        checkpoint_path: str | Path,
        inputs: Sequence[str | Path],
        out_dir: str | Path,
        mode: DenoiseMode = DenoiseMode.MMSE,
        tiling: TilingConfig | None = None,
        noise_model_path: str | Path | None = None,
        dump_at: Sequence[tuple[int, int]] = (),
        image_format: str = "raw",
        force: bool = False,
    ) -> list[Path]:
        mode = DenoiseMode(mode)
        suffix = _image_suffix(image_format)
        checkpoint = load_checkpoint(checkpoint_path)
        noise_model = load_noise_model(noise_model_path) if noise_model_path else None
        check_mode(checkpoint, mode, noise_model)
        tiling = (tiling or TilingConfig()).resolve(checkpoint.net_config)
        paths = _collect_inputs(inputs)
        if dump_at:
            for path in paths:
                try:
                    check_dump_request(mode, dump_at, image_shape(path))
                except ValidationError as e:
                    raise type(e)(f"{path.name}: {e}") from e
        out_dir = ensure_writable(out_dir, force, is_dir=True)
        if noise_model_path:
            verify_noise_model_digest(checkpoint, noise_model_path)

        net = checkpoint.to_network()
        dump_path = out_dir / POSTERIOR_DUMP_NAME
        if dump_at:
            dump_path.unlink(missing_ok=True)

        written = []
        for path in paths:
            try:
                result = denoise_image(
                    checkpoint, load_image(path), tiling, mode, noise_model,
                    dump_at=dump_at, net=net, progress=self.progress,
                )
            except ValidationError as e:
                raise ValidationError(f"{path.name}: {e}") from e
            target = out_dir / f"{path.stem}{suffix}"
            save_image(result.image, target)
            if result.posteriors:
                write_posterior_dump(result.posteriors, dump_path, path.stem)
            written.append(target)

        print(f"✅ [Denoise] {len(written)}장 → {out_dir} (mode={mode.value}, tile={tiling.tile}, overlap={tiling.overlap})")
        if dump_at:
            print(f"   사후분포 덤프: {dump_path}")
        return written

    # ============================================================
    #  evaluate / compare
    # ============================================================

    def evaluate(
        self,
        pred_dir: str | Path,
        gt_dir: str | Path,
        metric: MetricKind = MetricKind.PSNR,
        records_path: str | Path | None = None,
    ) -> EvalReport:
        pairs = match_pairs(pred_dir, gt_dir)
        names = [name for name, _, _ in pairs]
        report = evaluate_set(
            [load_image(p) for _, p, _ in pairs], [load_image(g) for _, _, g in pairs], metric, names
        )
        print(format_report(report))
        if records_path is not None:
            write_records(report.to_records(), records_path)
            logger.info("💾 [Evaluate] 레코드 저장: %s", records_path)
        return report

    def compare(
        self,
        gt_dir: str | Path,
        methods: Mapping[str, str | Path],
        metrics: Sequence[MetricKind] = (MetricKind.PSNR, MetricKind.SI_PSNR),
        records_path: str | Path | None = None,
    ):
        if not methods:
            raise ValidationError("compare requires at least one NAME=DIR method")
        gt_paths = None
        predictions = {}
        for method, pred_dir in methods.items():
            pairs = match_pairs(pred_dir, gt_dir)
            if gt_paths is None:
                gt_paths = [(name, g) for name, _, g in pairs]
            predictions[method] = [load_image(p) for _, p, _ in pairs]

        names = [name for name, _ in gt_paths]
        gts = [load_image(g) for _, g in gt_paths]
        results = compare_methods(gts, predictions, metrics, names)
        print(format_comparison(results))

        if records_path is not None:
            records = [
                {**record, "method": method}
                for method, reports in results.items()
                for report in reports.values()
                for record in report.to_records()
            ]
            write_records(records, records_path)
            logger.info("💾 [Compare] 레코드 저장: %s", records_path)
        return results


def _image_suffix(image_format: str) -> str:
    suffix = f".{image_format.lower().lstrip('.')}"
    if suffix not in IMAGE_SUFFIXES:
        raise ValidationError(f"unsupported image format '{image_format}' (raw or png)")
    return suffix


def _collect_inputs(inputs: Sequence[str | Path]) -> list[Path]:
    """파일/디렉터리 목록 → 이미지 파일 목록 (디렉터리에 noisy/ 가 있으면 그 안을 사용)."""
    paths: list[Path] = []
    for item in inputs:
        item = Path(item)
        if item.is_dir():
            source = item / NOISY_DIR if (item / NOISY_DIR).is_dir() else item
            paths.extend(list_images(source))
        elif item.is_file():
            paths.append(item)
        else:
            raise ValidationError(f"input not found: {item}")
    if not paths:
        raise ValidationError("no input images found")
    stems = [p.stem for p in paths]
    if len(set(stems)) != len(stems):
        raise ValidationError("input images must have distinct names")
    return paths
