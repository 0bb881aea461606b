"""
gradients.py
============
해석적 기울기(autograd) 와 중심 유한차분 기울기를 비교하는 검증 도구.
64-bit 사본 위에서 계산하므로 원본 네트워크는 바뀌지 않는다.
"""

import copy
import logging
import math
from typing import Callable

import torch
from torch import nn

from core.errors import ValidationError


logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
MAX_PARAMETERS = 10_000
DENOMINATOR_FLOOR = 1e-8


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> torch.Tensor:
    """원소별 |a − n| / max(|a|, |n|, 1e-8)."""
    denom = torch.maximum(torch.maximum(analytic.abs(), numeric.abs()),
                          torch.full_like(analytic, DENOMINATOR_FLOOR))
    return (analytic - numeric).abs() / denom


def grad_check(
    net: nn.Module,
    inputs,
    loss_fn: Callable[[torch.Tensor], torch.Tensor],
    step: float = DEFAULT_STEP,
    max_parameters: int = MAX_PARAMETERS,
) -> float:
    """
    모든 파라미터에 대해 해석적 기울기와 중심 유한차분 기울기의 최대 상대 오차를 구한다.

    Args:
        net            : 검사할 네트워크 (64-bit 사본에서 계산)
        inputs         : 네트워크 입력
        loss_fn        : 출력 텐서 → 스칼라 손실
        step           : 유한차분 간격
        max_parameters : 허용 파라미터 수 상한 (계산량 제한)

    Returns:
        최대 상대 오차 (분모 max(|analytic|, |numeric|, 1e-8))

    Raises:
        ValidationError : 파라미터 수 초과, 손실이 유한하지 않을 때
    """
    net64 = copy.deepcopy(net).double()
    x = torch.as_tensor(inputs, dtype=torch.float64)
    params = list(net64.parameters())
    n_params = sum(p.numel() for p in params)
    if n_params > max_parameters:
        raise ValidationError(f"grad_check limited to {max_parameters} parameters, network has {n_params}")

    def evaluate() -> torch.Tensor:
        value = loss_fn(net64(x))
        if not torch.isfinite(value):
            raise ValidationError(f"grad_check: non-finite loss {float(value)}")
        return value

    with torch.enable_grad():
        analytic = torch.autograd.grad(evaluate(), params, allow_unused=True)
    analytic = [torch.zeros_like(p) if g is None else g for g, p in zip(analytic, params)]

    worst = 0.0
    with torch.no_grad():
        for param, grad in zip(params, analytic):
            flat = param.view(-1)
            numeric = torch.empty_like(flat)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + step
                plus = evaluate().item()
                flat[i] = original - step
                minus = evaluate().item()
                flat[i] = original
                numeric[i] = (plus - minus) / (2.0 * step)
            err = relative_error(grad.reshape(-1), numeric)
            worst = max(worst, float(err.max()) if err.numel() else 0.0)

    if not math.isfinite(worst):
        raise ValidationError("grad_check produced a non-finite error")
    logger.debug("🔬 [GradCheck] 파라미터 %d개, 최대 상대 오차 %.3e", n_params, worst)
    return worst
