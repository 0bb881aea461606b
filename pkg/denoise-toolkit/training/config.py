"""
config.py
=========
학습 모드와 학습 설정 (세 모드가 동일한 학습 파라미터를 공유한다).
"""

import logging
from dataclasses import asdict, dataclass
from enum import Enum

from core.errors import ValidationError
from data.masking import DEFAULT_WINDOW, default_mask_count


logger = logging.getLogger(__name__)


class TrainMode(str, Enum):
    """학습 목적 함수"""
    PN2V = "pn2v"                # 샘플 기반 우도 손실 (노이즈 모델 필요)
    N2V = "n2v"                  # blind-spot masked MSE
    SUPERVISED = "supervised"    # clean 타깃 MSE (전체 픽셀)

    @property
    def uses_masking(self) -> bool:
        return self is not TrainMode.SUPERVISED


@dataclass
class TrainConfig:
    """
    학습 설정.

    Attributes:
        mode            : 학습 모드
        epochs          : epoch 수
        steps_per_epoch : epoch 당 최적화 step 수
        batch_size      : 배치당 패치 수
        patch_size      : 패치 한 변 (2^depth 의 배수)
        learning_rate   : Adam 초기 학습률
        plateau_factor  : 검증 손실 정체 시 학습률 배율
        patience        : 정체로 판단하기까지 기다리는 epoch 수
        n_masked        : 패치당 blind-spot 수 (None → 패치 픽셀의 1/64, validate() 에서 결정)
        window          : 치환 이웃 창 한 변
        seed            : 난수 시드
        val_fraction    : 검증 split 비율 (별도 val 세트가 없을 때)
        val_batches     : 고정 검증 배치 수
        augment         : 8방향 이면체 증강 여부
        num_workers     : 배치 생산 워커 수 (워커별 독립 시드 스트림)
    """
    mode: TrainMode = TrainMode.PN2V
    epochs: int = 20
    steps_per_epoch: int = 50
    batch_size: int = 16
    patch_size: int = 64
    learning_rate: float = 4e-4
    plateau_factor: float = 0.5
    patience: int = 3
    n_masked: int | None = None
    window: int = DEFAULT_WINDOW
    seed: int = 0
    val_fraction: float = 0.1
    val_batches: int = 4
    augment: bool = True
    num_workers: int = 1

    # Adam 고정값
    ADAM_BETAS = (0.9, 0.999)
    ADAM_EPS = 1e-8

    def validate(self, size_multiple: int = 1):
        """
        Args:
            size_multiple : 네트워크가 요구하는 패치 배수 (2^depth)
        """
        try:
            self.mode = TrainMode(self.mode)
        except ValueError as e:
            raise ValidationError(f"unknown training mode '{self.mode}'") from e

        for name in ("epochs", "steps_per_epoch", "batch_size", "patch_size",
                     "val_batches", "num_workers", "patience"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate < 0:
            raise ValidationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.learning_rate == 0:
            logger.warning("⚠️ [TrainConfig] learning_rate=0: 파라미터가 갱신되지 않습니다")
        if not 0 < self.plateau_factor < 1:
            raise ValidationError(f"plateau_factor must lie in (0, 1), got {self.plateau_factor}")
        if not 0 <= self.val_fraction < 1:
            raise ValidationError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")
        if self.patch_size % size_multiple:
            raise ValidationError(
                f"patch_size {self.patch_size} not divisible by 2^depth = {size_multiple}"
            )
        if self.n_masked is None:
            self.n_masked = default_mask_count(self.patch_size)
        if self.mode.uses_masking:
            if not 0 < self.n_masked <= self.patch_size ** 2:
                raise ValidationError(f"n_masked must lie in [1, patch_size²], got {self.n_masked}")
            if self.window < 3 or self.window % 2 == 0:
                raise ValidationError(f"window must be odd and >= 3, got {self.window}")

    def to_dict(self) -> dict:
        values = asdict(self)
        values["mode"] = TrainMode(self.mode).value
        return values
