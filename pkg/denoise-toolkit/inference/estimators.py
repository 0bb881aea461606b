"""
estimators.py
=============
픽셀별 신호 추정.

    mmse_estimate : ŝ = Σ_k p(x|s^k)·s^k / Σ_k p(x|s^k)   (사후분포의 질량 중심)
    prior_mean    : ŝ = (1/K) Σ_k s^k                       (관측 x 무시)

샘플 배열의 마지막 축이 K 이다. 모든 계산은 64-bit, 마지막 축 방향 축약.
"""

import numpy as np

from core.errors import ShapeError
from noise.noise_model import NoiseModel, likelihood


def _as_samples(samples) -> np.ndarray:
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if samples.ndim == 0 or samples.shape[-1] < 1:
        raise ShapeError(f"samples need a trailing K axis with K >= 1, got shape {samples.shape}")
    return samples


def posterior_weights(samples, x, model: NoiseModel) -> np.ndarray:
    """각 샘플의 관측 우도 p(x|s^k). shape = samples.shape."""
    samples = _as_samples(samples)
    x = np.asarray(x, dtype=np.float64)
    return likelihood(model, x[..., None], samples)


def weighted_mean(samples: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """가중 평균. 결과는 [min_k s^k, max_k s^k] 안으로 제한된다."""
    estimate = (weights * samples).sum(axis=-1) / weights.sum(axis=-1)
    return np.clip(estimate, samples.min(axis=-1), samples.max(axis=-1))


def mmse_estimate(samples, x, model: NoiseModel) -> np.ndarray:
    """
    Args:
        samples : (..., K) raw 도메인 샘플
        x       : (...) 관측값
        model   : 노이즈 모델 (density floor 로 분모 0 이 생기지 않음)

    Returns:
        (...) MMSE 추정값
    """
    samples = _as_samples(samples)
    return weighted_mean(samples, posterior_weights(samples, x, model))


def prior_mean(samples) -> np.ndarray:
    """(..., K) 샘플의 산술 평균."""
    return _as_samples(samples).mean(axis=-1)
