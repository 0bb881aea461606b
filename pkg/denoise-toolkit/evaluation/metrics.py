"""
metrics.py
==========
PSNR 과 shift/scale 불변 PSNR.

    psnr    = 10·log10(peak² / MSE),  peak 기본값 = gt 의 max − min
    si_psnr = psnr(a·pred + b, gt),   (a, b) 는 Σ(a·pred + b − gt)² 최소해 (닫힌 형식)
"""

import math
from enum import Enum

import numpy as np

from core.errors import ShapeError, ValidationError


# 적합 잔차가 이 값(×peak)² 이하이면 완전 복원으로 보고 +∞ 를 반환
INF_RESIDUAL_SCALE = 16.0 * np.finfo(np.float64).eps


class MetricKind(str, Enum):
    PSNR = "psnr"
    SI_PSNR = "si_psnr"


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction shape {pred.shape} != ground-truth shape {gt.shape}")
    if pred.size == 0:
        raise ShapeError("cannot evaluate empty images")
    return pred, gt


def _peak(gt: np.ndarray, peak: float | None) -> float:
    if peak is not None:
        if not peak > 0:
            raise ValidationError(f"peak must be > 0, got {peak}")
        return float(peak)
    value = float(gt.max() - gt.min())
    if value <= 0:
        raise ValidationError("constant ground truth: pass an explicit peak")
    return value


def _from_mse(mse: float, peak: float) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr(pred, gt, peak: float | None = None) -> float:
    """PSNR (dB). MSE 가 0 이면 +inf."""
    pred, gt = _pair(pred, gt)
    peak = _peak(gt, peak)
    return _from_mse(float(np.mean(np.square(pred - gt))), peak)


def affine_fit(pred, gt) -> tuple[float, float]:
    """gt ≈ a·pred + b 의 최소제곱 (a, b)."""
    pred, gt = _pair(pred, gt)
    centered = pred - pred.mean()
    variance = float(np.sum(centered * centered))
    if variance == 0:
        raise ValidationError("constant prediction: affine fit is singular")
    a = float(np.sum(centered * (gt - gt.mean()))) / variance
    b = float(gt.mean() - a * pred.mean())
    return a, b


def si_psnr(pred, gt, peak: float | None = None) -> float:
    """affine 정렬 후 PSNR. pred 의 affine 변환에 불변."""
    pred, gt = _pair(pred, gt)
    peak = _peak(gt, peak)
    a, b = affine_fit(pred, gt)
    mse = float(np.mean(np.square(a * pred + b - gt)))
    if mse <= (INF_RESIDUAL_SCALE * peak) ** 2:
        return math.inf
    return _from_mse(mse, peak)


METRICS = {
    MetricKind.PSNR: psnr,
    MetricKind.SI_PSNR: si_psnr,
}


def metric_function(kind):
    return METRICS[MetricKind(kind)]
