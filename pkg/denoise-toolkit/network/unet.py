"""
unet.py
=======
픽셀마다 K 개의 신호 샘플을 예측하는 U-Net.

구조 (depth = d, base = c):
    인코더 레벨 l (0..d-1) : [3×3 conv + ReLU] × 2 → 2×2 max-pool   (채널 c·2^l)
    bottleneck             : [3×3 conv + ReLU] × 2                  (채널 c·2^d)
    디코더 레벨 l (d-1..0) : 2× nearest 업샘플 → skip concat → [3×3 conv + ReLU] × 2
    출력                   : 1×1 conv → K 채널

모든 conv 는 zero padding 으로 공간 크기를 유지한다 → blind-spot 좌표가 출력 좌표와 1:1 대응.
"""

import logging
from dataclasses import asdict, dataclass

import torch
from torch import nn

from core.errors import ShapeError, ValidationError


logger = logging.getLogger(__name__)


# ──────────────────────────────────────────────
#  설정
# ──────────────────────────────────────────────

@dataclass
class UNetConfig:
    """
    U-Net 설정. 기본값은 CPU 에서 수 분 내 학습 가능한 데스크 규모.

    Attributes:
        depth         : 인코더/디코더 레벨 수
        in_channels   : 입력 채널 (단일 채널 이미지 → 1)
        out_channels  : 픽셀당 샘플 수 K (n2v / supervised 는 1)
        base_features : 첫 레벨 특징 채널 수
        kernel_size   : conv 커널 한 변 (홀수)
        seed          : 가중치 초기화 시드
    """
    depth: int = 3
    in_channels: int = 1
    out_channels: int = 100
    base_features: int = 16
    kernel_size: int = 3
    seed: int = 0

    # 전체 규모 설정값 (GPU 학습용)
    FULL_SCALE_SAMPLES = 800
    FULL_SCALE_BASE_FEATURES = 64

    @classmethod
    def full_scale(cls, seed: int = 0) -> "UNetConfig":
        """depth 3, base 64, K 800."""
        return cls(depth=3, out_channels=cls.FULL_SCALE_SAMPLES,
                   base_features=cls.FULL_SCALE_BASE_FEATURES, seed=seed)

    def validate(self):
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.in_channels != 1:
            raise ValidationError(f"only single-channel input is supported, got {self.in_channels}")
        if self.out_channels < 1:
            raise ValidationError(f"out_channels (K) must be >= 1, got {self.out_channels}")
        if self.base_features < 1:
            raise ValidationError(f"base_features must be >= 1, got {self.base_features}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValidationError(f"kernel_size must be odd, got {self.kernel_size}")

    @property
    def size_multiple(self) -> int:
        """학습/추론 입력 한 변이 나누어떨어져야 하는 값 (2^depth)."""
        return 2 ** self.depth

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "UNetConfig":
        return cls(**{k: int(v) for k, v in values.items()})


def receptive_field_radius(config: UNetConfig) -> int:
    """
    출력 픽셀 하나에 영향을 주는 입력 범위의 반경 (px).
    레벨 l 의 conv 하나는 (k//2)·2^l, pooling 격자 정렬은 최대 2^d − 1 을 더한다.
    """
    half = config.kernel_size // 2
    per_level = sum(2 * half * 2 ** level for level in range(config.depth))
    bottleneck = 2 * half * 2 ** config.depth
    return 2 * per_level + bottleneck + (2 ** config.depth - 1)


# ──────────────────────────────────────────────
#  네트워크
# ──────────────────────────────────────────────

def _conv_block(in_channels: int, out_channels: int, kernel_size: int) -> nn.Sequential:
    pad = kernel_size // 2
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size, padding=pad),
        nn.ReLU(),
        nn.Conv2d(out_channels, out_channels, kernel_size, padding=pad),
        nn.ReLU(),
    )


class UNet(nn.Module):
    """K 채널 샘플 출력 U-Net. forward 는 상태를 바꾸지 않는 순수 함수."""

    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        widths = [config.base_features * 2 ** level for level in range(config.depth + 1)]

        self.encoders = nn.ModuleList()
        in_ch = config.in_channels
        for level in range(config.depth):
            self.encoders.append(_conv_block(in_ch, widths[level], config.kernel_size))
            in_ch = widths[level]
        self.bottleneck = _conv_block(in_ch, widths[config.depth], config.kernel_size)

        # decoders[l] : 레벨 l 복원 (업샘플된 widths[l+1] + skip widths[l] → widths[l])
        self.decoders = nn.ModuleList(
            _conv_block(widths[level] + widths[level + 1], widths[level], config.kernel_size)
            for level in range(config.depth)
        )
        self.pool = nn.MaxPool2d(2)
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        self.head = nn.Conv2d(widths[0], config.out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for level in reversed(range(self.config.depth)):
            x = self.upsample(x)
            x = self.decoders[level](torch.cat([x, skips[level]], dim=1))
        return self.head(x)


def init_network(config: UNetConfig) -> UNet:
    """
    설정대로 U-Net 을 만들고 He(fan-in) 정규분포로 초기화한다. 편향은 0.
    같은 seed → 비트 단위로 같은 파라미터.
    """
    config.validate()
    net = UNet(config)
    generator = torch.Generator().manual_seed(config.seed)
    with torch.no_grad():
        for module in net.modules():
            if isinstance(module, nn.Conv2d):
                fan_in = module.in_channels * module.kernel_size[0] * module.kernel_size[1]
                module.weight.normal_(0.0, (2.0 / fan_in) ** 0.5, generator=generator)
                module.bias.zero_()
    logger.debug("🧠 [UNet] 초기화: %s, 파라미터 %d개", config, parameter_count(net))
    return net


def parameter_count(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


# ============================================================
#  forward / backward
# ============================================================

def check_input(net: UNet, batch: torch.Tensor):
    """입력이 (B, 1, H, W) 이고 H, W 가 2^depth 의 배수인지 확인한다."""
    multiple = net.config.size_multiple
    if batch.ndim != 4 or batch.shape[1] != net.config.in_channels:
        raise ShapeError(f"expected input of shape (B, 1, H, W), got {tuple(batch.shape)}")
    height, width = batch.shape[-2:]
    if height % multiple or width % multiple:
        raise ShapeError(
            f"spatial size {height}x{width} not divisible by 2^depth = {multiple}"
        )


def _as_input(net: nn.Module, batch) -> torch.Tensor:
    dtype = next(net.parameters()).dtype
    return torch.as_tensor(batch, dtype=dtype)


def forward(net: nn.Module, batch) -> torch.Tensor:
    """(B, 1, H, W) 표준화 입력 → (B, K, H, W) 샘플 텐서 (그래프 없이)."""
    batch = _as_input(net, batch)
    if isinstance(net, UNet):
        check_input(net, batch)
    with torch.no_grad():
        return net(batch)


def backward(
    net: nn.Module, batch, upstream: torch.Tensor, input_grad: bool = False
) -> dict[str, torch.Tensor] | tuple[dict[str, torch.Tensor], torch.Tensor]:
    """
    출력에 대한 upstream 기울기를 파라미터(및 선택적으로 입력)까지 역전파한다.

    Args:
        net        : U-Net
        batch      : forward 와 같은 입력
        upstream   : (B, K, H, W) ∂L/∂출력
        input_grad : True 면 입력 기울기도 함께 반환

    Returns:
        {파라미터 이름: 기울기} (input_grad=True 면 (딕셔너리, 입력 기울기))

    Raises:
        ShapeError : upstream shape 가 forward 출력과 다를 때
    """
    batch = _as_input(net, batch).detach().requires_grad_(input_grad)
    if isinstance(net, UNet):
        check_input(net, batch)
    names, params = zip(*net.named_parameters())

    with torch.enable_grad():
        output = net(batch)
        upstream = torch.as_tensor(upstream, dtype=output.dtype)
        if upstream.shape != output.shape:
            raise ShapeError(
                f"upstream gradient shape {tuple(upstream.shape)} != output shape {tuple(output.shape)}"
            )
        targets = list(params) + ([batch] if input_grad else [])
        grads = torch.autograd.grad(output, targets, grad_outputs=upstream, allow_unused=True)

    grads = [torch.zeros_like(t) if g is None else g for g, t in zip(grads, targets)]
    param_grads = dict(zip(names, grads[:len(names)]))
    if input_grad:
        return param_grads, grads[-1]
    return param_grads
