"""
denoiser.py
===========
체크포인트로 이미지 전체를 복원한다.

모드:
    mmse       : pn2v 체크포인트 + 노이즈 모델, 샘플의 우도 가중 평균
    prior_mean : pn2v 체크포인트, 샘플의 산술 평균 (관측값 무시)
    n2v_direct : n2v / supervised 체크포인트, 네트워크 출력 1채널을 그대로 역표준화
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from torch import nn

from core.errors import ModeMismatchError, ShapeError, ValidationError
from data.image_io import as_image
from inference.estimators import mmse_estimate, posterior_weights, prior_mean
from inference.tiling import TilingConfig, predict_tiled
from noise.noise_model import NoiseModel
from training.checkpoint import Checkpoint, require_noise_model_mode
from training.config import TrainMode


logger = logging.getLogger(__name__)


class DenoiseMode(str, Enum):
    MMSE = "mmse"
    PRIOR_MEAN = "prior_mean"
    N2V_DIRECT = "n2v_direct"


@dataclass
class PixelPosterior:
    """
    한 픽셀의 사후분포 진단 덤프.

    Attributes:
        row, col : 픽셀 좌표
        x        : 관측값
        samples  : (K,) raw 도메인 샘플
        weights  : (K,) 관측 우도 p(x|s^k) (모두 ≥ density floor)
    """
    row: int
    col: int
    x: float
    samples: np.ndarray
    weights: np.ndarray

    def to_record(self) -> dict:
        return {
            "row": self.row,
            "col": self.col,
            "x": float(self.x),
            "samples": self.samples.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass
class DenoiseResult:
    image: np.ndarray
    posteriors: list[PixelPosterior] = field(default_factory=list)


def check_mode(checkpoint: Checkpoint, mode: DenoiseMode, noise_model: NoiseModel | None):
    """
    Raises:
        ModeMismatchError : 체크포인트 학습 모드와 추론 모드가 맞지 않을 때
        ValidationError   : mmse 인데 노이즈 모델이 없을 때
    """
    mode = DenoiseMode(mode)
    if mode is DenoiseMode.N2V_DIRECT:
        if checkpoint.mode is TrainMode.PN2V:
            raise ModeMismatchError(
                "mode mismatch: n2v_direct requires an n2v or supervised checkpoint "
                "(this checkpoint predicts samples; use mmse or prior_mean)"
            )
        return
    require_noise_model_mode(checkpoint)
    if mode is DenoiseMode.MMSE and noise_model is None:
        raise ValidationError("mmse denoising requires a noise model")


def check_dump_request(mode: DenoiseMode, dump_at: Sequence[tuple[int, int]], shape: tuple[int, int]):
    """사후분포 덤프 요청이 모드와 이미지 크기에 맞는지 확인한다."""
    if dump_at and DenoiseMode(mode) is DenoiseMode.N2V_DIRECT:
        raise ValidationError("posterior dump requires a pn2v checkpoint (mmse or prior_mean)")
    for row, col in dump_at:
        if not (0 <= row < shape[0] and 0 <= col < shape[1]):
            raise ShapeError(f"dump coordinate ({row}, {col}) outside image {tuple(shape)}")


def denoise_image(
    checkpoint: Checkpoint,
    image,
    tiling: TilingConfig | None = None,
    mode: DenoiseMode = DenoiseMode.MMSE,
    noise_model: NoiseModel | None = None,
    dump_at: Sequence[tuple[int, int]] = (),
    net: nn.Module | None = None,
    progress: bool = False,
) -> DenoiseResult:
    """
    Args:
        checkpoint  : 학습된 체크포인트
        image       : (H, W) raw 이미지
        tiling      : 타일 설정 (None → 기본값)
        mode        : 추정 모드
        noise_model : mmse 에 필요
        dump_at     : 사후분포를 덤프할 (row, col) 목록 (mmse/prior_mean)
        net         : 이미 만들어 둔 네트워크 (None → checkpoint.to_network())
        progress    : 타일 진행 표시

    Returns:
        DenoiseResult (raw 도메인 float32 이미지 + 요청한 PixelPosterior)
    """
    mode = DenoiseMode(mode)
    check_mode(checkpoint, mode, noise_model)
    image = as_image(image)
    tiling = (tiling or TilingConfig()).resolve(checkpoint.net_config)
    check_dump_request(mode, dump_at, image.shape)

    net = checkpoint.to_network() if net is None else net
    stats = checkpoint.stats
    standardized = stats.standardize(image.astype(np.float64))
    outputs = predict_tiled(net, standardized, tiling, progress=progress)

    if mode is DenoiseMode.N2V_DIRECT:
        denoised = stats.destandardize(outputs[..., 0].astype(np.float64))
        return DenoiseResult(image=denoised.astype(np.float32))

    samples = np.ascontiguousarray(stats.destandardize(outputs.astype(np.float64)))
    if mode is DenoiseMode.MMSE:
        estimate = mmse_estimate(samples, image, noise_model)
    else:
        estimate = prior_mean(samples)

    posteriors = []
    for row, col in dump_at:
        pixel_samples = samples[row, col].copy()
        x = float(image[row, col])
        weights = (
            posterior_weights(pixel_samples, x, noise_model)
            if noise_model is not None else np.ones_like(pixel_samples)
        )
        posteriors.append(PixelPosterior(row=row, col=col, x=x, samples=pixel_samples, weights=weights))

    logger.debug("✨ [Denoiser] %s 복원 완료: %s", mode.value, image.shape)
    return DenoiseResult(image=estimate.astype(np.float32), posteriors=posteriors)


def write_posterior_dump(posteriors: Sequence[PixelPosterior], path: str | Path, image_name: str = ""):
    """덤프를 JSON lines 로 추가 기록한다 (레코드마다 이미지 이름 포함)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        for posterior in posteriors:
            record = {"image": image_name, **posterior.to_record()}
            fh.write(json.dumps(record) + "\n")
