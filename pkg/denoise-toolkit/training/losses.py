"""
losses.py
=========
세 가지 학습 목적 함수.

    - pn2v       : −ln( (1/K) Σ_k p(x_i | s_i^k) ) 의 blind-spot 평균
    - n2v        : blind-spot 에서의 (ŝ_i − x_i)² 평균 (표준화 공간)
    - supervised : 전체 픽셀에서의 (ŝ_i − s_i)² 평균 (표준화 공간)

*_objective 함수는 autograd 그래프 안에서 쓰이는 텐서 손실이고,
*_loss 함수는 (스칼라 손실, 입력 예측값에 대한 기울기) 를 돌려주는 독립 API 이다.
"""

import math

import numpy as np
import torch

from core.errors import ShapeError, ValidationError
from data.normalization import NormStats
from noise.noise_model import NoiseModel, likelihood, likelihood_grad_s


# ──────────────────────────────────────────────
#  노이즈 모델 → autograd 연결
# ──────────────────────────────────────────────

class HistogramLikelihood(torch.autograd.Function):
    """
    p(x|s) 를 autograd 에 연결한다. 역전파는 likelihood_grad_s 의
    해석적 미분(매듭점에서는 우미분)을 그대로 사용한다.
    """

    @staticmethod
    def forward(ctx, s_raw: torch.Tensor, x_raw: torch.Tensor, model: NoiseModel) -> torch.Tensor:
        s_np = s_raw.detach().cpu().double().numpy()
        x_np = x_raw.detach().cpu().double().numpy()
        grad = likelihood_grad_s(model, x_np, s_np)
        ctx.save_for_backward(torch.from_numpy(grad).to(s_raw))
        return torch.from_numpy(likelihood(model, x_np, s_np)).to(s_raw)

    @staticmethod
    def backward(ctx, grad_output: torch.Tensor):
        (grad_s,) = ctx.saved_tensors
        return grad_output * grad_s, None, None


# ============================================================
#  그래프 내부용 목적 함수
# ============================================================

def pn2v_objective(
    samples: torch.Tensor, targets: torch.Tensor, model: NoiseModel, stats: NormStats
) -> torch.Tensor:
    """
    Args:
        samples : (N, K) 표준화 공간 샘플
        targets : (N,) raw 관측값 x_i
    """
    if samples.ndim != 2 or targets.shape != samples.shape[:1]:
        raise ShapeError(
            f"pn2v expects samples (N, K) and targets (N,), got {tuple(samples.shape)} / {tuple(targets.shape)}"
        )
    if samples.shape[0] == 0:
        raise ValidationError("pn2v loss needs at least one masked pixel")

    s_raw = samples * stats.std + stats.mean
    x_raw = targets.to(samples.dtype)[:, None].expand_as(s_raw)
    log_p = torch.log(HistogramLikelihood.apply(s_raw, x_raw, model))

    # ln Σ_k p_k 를 max-shift 로 안정화 (logsumexp)
    k = samples.shape[1]
    per_pixel = -(torch.logsumexp(log_p, dim=1) - math.log(k))
    return per_pixel.mean()


def mse_objective(predictions: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """같은 shape 의 예측/타깃 평균 제곱 오차."""
    if predictions.shape != targets.shape:
        raise ShapeError(
            f"prediction shape {tuple(predictions.shape)} != target shape {tuple(targets.shape)}"
        )
    if predictions.numel() == 0:
        raise ValidationError("squared-error loss needs at least one pixel")
    return torch.square(predictions - targets.to(predictions.dtype)).mean()


# ============================================================
#  독립 API: (손실, 기울기)
# ============================================================

def _leaf(values) -> torch.Tensor:
    if isinstance(values, torch.Tensor):
        tensor = values.detach().clone()
    else:
        tensor = torch.as_tensor(np.asarray(values, dtype=np.float64))
    if not torch.all(torch.isfinite(tensor)):
        raise ValidationError("non-finite sample values")
    return tensor.requires_grad_(True)


def _with_grad(objective, predictions, *args) -> tuple[float, torch.Tensor]:
    leaf = _leaf(predictions)
    with torch.enable_grad():
        loss = objective(leaf, *args)
        (grad,) = torch.autograd.grad(loss, leaf)
    return float(loss), grad


def pn2v_loss(samples, targets, model: NoiseModel, stats: NormStats) -> tuple[float, torch.Tensor]:
    """
    샘플 기반 우도 손실과 샘플에 대한 기울기.
    기울기 = −(∂p/∂s · std) / Σ_k p  를 blind-spot 수로 나눈 값.
    """
    return _with_grad(pn2v_objective, samples, torch.as_tensor(targets), model, stats)


def n2v_loss(predictions, targets) -> tuple[float, torch.Tensor]:
    """blind-spot 예측 1개씩과 표준화 관측값의 MSE. 기울기 2(ŝ − x)/N."""
    predictions, targets = torch.as_tensor(predictions), torch.as_tensor(targets)
    if predictions.shape != targets.shape:
        raise ShapeError(f"count mismatch: {predictions.numel()} predictions, {targets.numel()} targets")
    return _with_grad(mse_objective, predictions, targets)


def supervised_loss(predictions, clean) -> tuple[float, torch.Tensor]:
    """전체 픽셀 예측과 clean 신호의 MSE."""
    return _with_grad(mse_objective, predictions, torch.as_tensor(clean))
