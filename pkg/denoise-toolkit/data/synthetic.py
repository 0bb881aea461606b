"""
synthetic.py
============
데스크 규모 실험용 합성 (clean, noisy) 데이터 생성 모듈.

노이즈 종류:
    - gaussian         : x = s + N(0, σ²)
    - poisson_gaussian : x = gain·Poisson(s / gain) + N(0, σ²)

추가 옵션:
    - n_average : 같은 clean 에 대한 독립 관측 n 장 평균 (저노이즈 regime 모사)
    - drift     : 관측 이미지마다 (1 + drift·N(0,1)) 배 밝기 요동 (불안정한 획득 모사)
"""

import logging
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from core.errors import ValidationError


logger = logging.getLogger(__name__)


class NoiseKind(str, Enum):
    """노이즈 생성 방식"""
    GAUSSIAN = "gaussian"
    POISSON_GAUSSIAN = "poisson_gaussian"


class Pattern(str, Enum):
    """번들 clean 패턴"""
    SINUSOID = "sinusoid"      # 부드러운 2D 정현파 혼합
    DISKS = "disks"            # 랜덤 원판
    WEDGE = "wedge"            # 전체 강도 범위를 덮는 계단 쐐기 (보정용 테스트 패턴)
    CONSTANT = "constant"      # 상수 (signal_min 과 signal_max 의 중간값)


@dataclass
class SynthSpec:
    """
    합성 데이터셋 명세. 같은 명세(시드 포함) → 바이트 단위로 같은 데이터.

    Attributes:
        kind       : 노이즈 종류
        pattern    : clean 패턴 id
        size       : 정사각 이미지 한 변 (px)
        n_images   : 이미지 수
        sigma      : 가우시안 성분 표준편차 (≥ 0)
        gain       : poisson_gaussian 의 광자당 강도 (> 0)
        n_average  : 평균할 독립 관측 수 (≥ 1)
        drift      : 이미지별 밝기 요동 크기 (≥ 0)
        signal_min : clean 강도 하한
        signal_max : clean 강도 상한
        seed       : 난수 시드
    """
    kind: NoiseKind = NoiseKind.GAUSSIAN
    pattern: Pattern = Pattern.SINUSOID
    size: int = 128
    n_images: int = 20
    sigma: float = 25.0
    gain: float = 1.0
    n_average: int = 1
    drift: float = 0.0
    signal_min: float = 0.0
    signal_max: float = 255.0
    seed: int = 0

    def validate(self):
        """모든 파라미터를 검증한다 (파일을 쓰기 전에 호출)."""
        try:
            kind = NoiseKind(self.kind)
        except ValueError as e:
            raise ValidationError(f"unknown noise kind '{self.kind}'") from e
        try:
            pattern = Pattern(self.pattern)
        except ValueError as e:
            raise ValidationError(f"unknown pattern id '{self.pattern}'") from e
        self.kind, self.pattern = kind, pattern

        if self.size < 1 or self.n_images < 1 or self.n_average < 1:
            raise ValidationError("size, n_images and n_average must be >= 1")
        if not self.sigma >= 0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}")
        if not self.drift >= 0:
            raise ValidationError(f"drift must be >= 0, got {self.drift}")
        if self.kind is NoiseKind.POISSON_GAUSSIAN:
            if not self.gain > 0:
                raise ValidationError(f"gain must be > 0 for poisson_gaussian, got {self.gain}")
            if self.signal_min < 0:
                raise ValidationError("poisson_gaussian requires a non-negative signal")
        if self.signal_max < self.signal_min:
            raise ValidationError("signal_max must be >= signal_min")
        if self.signal_max == self.signal_min and self.pattern is not Pattern.CONSTANT:
            raise ValidationError("signal_max must exceed signal_min for non-constant patterns")

    def to_dict(self) -> dict:
        values = asdict(self)
        values["kind"] = NoiseKind(self.kind).value
        values["pattern"] = Pattern(self.pattern).value
        return values


# ============================================================
#  데이터셋 생성
# ============================================================

def synth_dataset(spec: SynthSpec) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """
    명세에 따라 (clean 리스트, noisy 리스트) 를 만든다.
    이미지마다 독립적인 시드 스트림(SeedSequence.spawn)을 사용한다.
    """
    spec.validate()
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_images)

    cleans, noisies = [], []
    for child in children:
        pattern_rng, noise_rng = (np.random.default_rng(s) for s in child.spawn(2))
        clean = make_pattern(spec.pattern, spec.size, spec.signal_min, spec.signal_max, pattern_rng)
        noisy = corrupt(clean, spec, noise_rng)
        cleans.append(clean.astype(np.float32))
        noisies.append(noisy.astype(np.float32))

    logger.info(
        "🧪 [Synth] %s/%s 이미지 %d장 생성 (size=%d, σ=%g, 평균=%d)",
        NoiseKind(spec.kind).value, Pattern(spec.pattern).value,
        spec.n_images, spec.size, spec.sigma, spec.n_average,
    )
    return cleans, noisies


def corrupt(clean: np.ndarray, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """clean 신호에 명세의 노이즈를 입힌다 (n_average 장 평균, drift 적용)."""
    signal = np.asarray(clean, dtype=np.float64)
    if spec.kind is NoiseKind.POISSON_GAUSSIAN and np.any(signal < 0):
        raise ValidationError("poisson_gaussian requires a non-negative signal")

    acc = np.zeros_like(signal)
    for _ in range(spec.n_average):
        if spec.kind is NoiseKind.POISSON_GAUSSIAN:
            frame = spec.gain * rng.poisson(signal / spec.gain)
        else:
            frame = signal.copy()
        if spec.sigma > 0:
            frame = frame + rng.normal(0.0, spec.sigma, size=signal.shape)
        acc += frame
    noisy = acc / spec.n_average

    if spec.drift > 0:
        noisy = noisy * (1.0 + spec.drift * rng.standard_normal())
    return noisy


# ============================================================
#  clean 패턴
# ============================================================

def make_pattern(pattern, size: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    """패턴 id 에 해당하는 [lo, hi] 범위의 clean 이미지를 만든다."""
    pattern = Pattern(pattern)
    if pattern is Pattern.CONSTANT:
        return np.full((size, size), lo + 0.5 * (hi - lo), dtype=np.float64)
    builder = _PATTERN_BUILDERS[pattern]
    unit = builder(size, rng)
    return lo + unit * (hi - lo)


def _stretch(values: np.ndarray) -> np.ndarray:
    """[0, 1] 로 선형 확장 (상수면 0.5)."""
    span = values.max() - values.min()
    if span == 0:
        return np.full_like(values, 0.5)
    return (values - values.min()) / span


def _sinusoid(size: int, rng: np.random.Generator) -> np.ndarray:
    """주파수 0.5~4 cycle/이미지 인 정현파 3개의 혼합."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    field = np.zeros((size, size))
    for _ in range(3):
        fy, fx = rng.uniform(0.5, 4.0, size=2) * rng.choice([-1.0, 1.0], size=2)
        phase = rng.uniform(0, 2 * np.pi)
        field += rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
    return _stretch(field)


def _disks(size: int, rng: np.random.Generator) -> np.ndarray:
    """배경 0.1 위에 5~15 개의 원판 (나중 원판이 덮어씀)."""
    yy, xx = np.mgrid[0:size, 0:size]
    image = np.full((size, size), 0.1)
    for _ in range(int(rng.integers(5, 16))):
        cy, cx = rng.uniform(0, size, size=2)
        radius = rng.uniform(size / 32, size / 6)
        image[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2] = rng.uniform(0.0, 1.0)
    return image


def _wedge(size: int, rng: np.random.Generator) -> np.ndarray:
    """16 단계 계단 쐐기 (방향은 랜덤)."""
    steps = 16
    levels = np.floor(np.arange(size) * steps / size) / (steps - 1)
    image = np.tile(levels, (size, 1))
    if rng.integers(2):
        image = image.T
    if rng.integers(2):
        image = image[::-1, ::-1]
    return np.ascontiguousarray(image)


_PATTERN_BUILDERS = {
    Pattern.SINUSOID: _sinusoid,
    Pattern.DISKS: _disks,
    Pattern.WEDGE: _wedge,
}
