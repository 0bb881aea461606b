"""
normalization.py
================
네트워크 공간(표준화)과 raw 강도 공간 사이의 변환 통계.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.errors import ValidationError


STD_FLOOR = 1e-12


@dataclass(frozen=True)
class NormStats:
    """
    표준화 통계. 네트워크 입력은 (x − mean) / std.

    Attributes:
        mean : raw 강도 평균
        std  : raw 강도 표준편차 (항상 > 0)
    """
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValidationError(f"NormStats.std must be > 0, got {self.std}")

    def standardize(self, values):
        return (np.asarray(values) - self.mean) / self.std

    def destandardize(self, values):
        return np.asarray(values) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": float(self.mean), "std": float(self.std)}


def compute_stats(images: Sequence[np.ndarray]) -> NormStats:
    """
    모든 이미지의 모든 픽셀에 대한 평균/표준편차를 구한다.
    std 가 1e-12 미만이면 1 로 대체한다 (상수 이미지).
    """
    if len(images) == 0:
        raise ValidationError("compute_stats requires at least one image")

    total = 0
    acc = 0.0
    for image in images:
        values = np.asarray(image, dtype=np.float64)
        total += values.size
        acc += values.sum()
    mean = acc / total

    sq = 0.0
    for image in images:
        sq += np.square(np.asarray(image, dtype=np.float64) - mean).sum()
    std = float(np.sqrt(sq / total))
    if std < STD_FLOOR:
        std = 1.0
    return NormStats(mean=float(mean), std=std)
