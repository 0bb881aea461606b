"""
noise_model.py
==============
히스토그램 기반 관측 우도 p(x|s) (노이즈 모델) 의 생성 / 질의 / 미분 / 저장 모듈.

구성:
    - 행(row)    : 깨끗한 신호 s 의 bin  (bins_s 개)
    - 열(column) : 노이즈 관측값 x 의 bin (bins_x 개)
    - density[r][c] : 단위 강도당 확률 밀도, 각 행은 Σ density·bin_width_x = 1

s 방향으로는 행 중심(bin center) 사이를 선형 보간하여
s 에 대해 연속이고 (구간별) 미분 가능한 모델을 만든다.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from core.container import decode_array, encode_array, read_container, write_container
from core.errors import NoiseModelError, ShapeError


logger = logging.getLogger(__name__)

NOISE_MODEL_MAGIC = "PN2V-NOISEMODEL"
NOISE_MODEL_VERSION = 1

DEFAULT_BINS = 256
DENSITY_FLOOR = 1e-10          # 단위 강도당 최소 밀도 (−ln 0 방지)
RANGE_MARGIN = 0.001           # 데이터 범위 자동 계산 시 양쪽 0.1% 여유
ROW_SUM_TOLERANCE = 1e-6


# ──────────────────────────────────────────────
#  데이터 클래스: 노이즈 모델
# ──────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class NoiseModel:
    """
    정규화된 2D 히스토그램 노이즈 모델. 생성 후 불변(immutable)이므로
    여러 워커가 동시에 읽어도 안전하다.

    Attributes:
        density   : (bins_s, bins_x) float64 밀도 행렬
        range_min : 두 축이 공유하는 강도 하한
        range_max : 두 축이 공유하는 강도 상한
        row_counts: 행별 원본 샘플 수 (커버리지 요약용, 없으면 None)
        version   : 파일 형식 태그
    """
    density: np.ndarray
    range_min: float
    range_max: float
    row_counts: np.ndarray | None = field(default=None, compare=False)
    version: int = NOISE_MODEL_VERSION

    def __post_init__(self):
        density = np.array(self.density, dtype=np.float64)
        density.setflags(write=False)
        object.__setattr__(self, "density", density)
        if self.row_counts is not None:
            counts = np.array(self.row_counts, dtype=np.int64)
            counts.setflags(write=False)
            object.__setattr__(self, "row_counts", counts)
        validate_noise_model(self)

    # ──────────── 파생 속성 ────────────
    @property
    def bins_s(self) -> int:
        return self.density.shape[0]

    @property
    def bins_x(self) -> int:
        return self.density.shape[1]

    @property
    def range_width(self) -> float:
        return self.range_max - self.range_min

    @property
    def bin_width_x(self) -> float:
        return self.range_width / self.bins_x

    @property
    def row_spacing(self) -> float:
        """행 중심 사이 간격 (= s 축 bin 폭)."""
        return self.range_width / self.bins_s

    @property
    def row_centers(self) -> np.ndarray:
        return self.range_min + (np.arange(self.bins_s) + 0.5) * self.row_spacing

    @property
    def column_centers(self) -> np.ndarray:
        return self.range_min + (np.arange(self.bins_x) + 0.5) * self.bin_width_x

    def coverage(self) -> float:
        """샘플이 하나 이상 들어온 신호 행의 비율 (row_counts 없으면 1.0)."""
        if self.row_counts is None:
            return 1.0
        return float(np.count_nonzero(self.row_counts)) / self.bins_s


def validate_noise_model(model: NoiseModel):
    """
    불변식을 검사한다.

    Raises:
        NoiseModelError : 범위 역전, 비유한 값, 하한 미만 밀도, 행 정규화 위반 (위반 행 번호 포함)
    """
    if model.density.ndim != 2 or min(model.density.shape) < 1:
        raise NoiseModelError(f"density must be a non-empty 2D matrix, got {model.density.shape}")
    if not model.range_max > model.range_min:
        raise NoiseModelError(
            f"degenerate range: range_min={model.range_min}, range_max={model.range_max}"
        )
    if not np.all(np.isfinite(model.density)):
        raise NoiseModelError("density contains non-finite values")

    low = np.argwhere(model.density < DENSITY_FLOOR * (1.0 - 1e-9))
    if low.size:
        r, c = low[0]
        raise NoiseModelError(f"row {r}: density {model.density[r, c]:.3e} below floor at column {c}")

    row_sums = model.density.sum(axis=1) * model.bin_width_x
    bad = np.flatnonzero(np.abs(row_sums - 1.0) > ROW_SUM_TOLERANCE)
    if bad.size:
        r = int(bad[0])
        raise NoiseModelError(f"row {r} is not normalized: sums to {row_sums[r]:.6g}")


# ============================================================
#  생성
# ============================================================

def build_histogram(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    bins_s: int = DEFAULT_BINS,
    bins_x: int = DEFAULT_BINS,
    value_range: tuple[float, float] | None = None,
) -> NoiseModel:
    """
    (clean, noisy) 이미지 쌍들로부터 2D 히스토그램 노이즈 모델을 만든다.

    처리 흐름:
        1) 범위 결정 (미지정 시 전체 픽셀 값 합집합 + 0.1% 여유)
        2) clean 값 → 행, noisy 값 → 열 로 카운트 누적 (범위 밖 값은 경계 bin 으로)
        3) 행별로 밀도화 (정규화 후 bin_width_x 로 나눔)
        4) 빈 행은 가장 가까운 비어있지 않은 행을 복사
        5) density floor 적용 (행 정규화 유지)

    Raises:
        ShapeError      : 쌍의 shape 불일치
        NoiseModelError : 쌍 없음, 범위 퇴화(min == max), 카운트 0
    """
    if len(pairs) == 0:
        raise NoiseModelError("at least one (clean, noisy) pair is required")
    if bins_s < 1 or bins_x < 1:
        raise NoiseModelError(f"bin counts must be >= 1, got bins_s={bins_s}, bins_x={bins_x}")

    arrays = []
    for idx, (clean, noisy) in enumerate(pairs):
        clean = np.asarray(clean, dtype=np.float64)
        noisy = np.asarray(noisy, dtype=np.float64)
        if clean.shape != noisy.shape:
            raise ShapeError(f"pair {idx}: clean shape {clean.shape} != noisy shape {noisy.shape}")
        arrays.append((clean.ravel(), noisy.ravel()))

    if value_range is None:
        lo = min(min(c.min(initial=np.inf), n.min(initial=np.inf)) for c, n in arrays)
        hi = max(max(c.max(initial=-np.inf), n.max(initial=-np.inf)) for c, n in arrays)
        margin = RANGE_MARGIN * (hi - lo)
        lo, hi = lo - margin, hi + margin
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise NoiseModelError(f"degenerate range: min={lo}, max={hi}")

    # ── 카운트 누적 ──
    counts = np.zeros(bins_s * bins_x, dtype=np.int64)
    for clean, noisy in arrays:
        rows = _bin_index(clean, lo, hi, bins_s)
        cols = _bin_index(noisy, lo, hi, bins_x)
        counts += np.bincount(rows * bins_x + cols, minlength=bins_s * bins_x)
    counts = counts.reshape(bins_s, bins_x)

    row_counts = counts.sum(axis=1)
    if row_counts.sum() == 0:
        raise NoiseModelError("histogram received zero counts")

    density = _counts_to_density(counts, row_counts, (hi - lo) / bins_x, hi - lo)
    model = NoiseModel(density=density, range_min=lo, range_max=hi, row_counts=row_counts)
    logger.info(
        "📊 [NoiseModel] 히스토그램 생성 완료: %dx%d, 범위=[%.4g, %.4g], 행 커버리지=%.1f%%",
        bins_s, bins_x, lo, hi, 100.0 * model.coverage(),
    )
    return model


def _bin_index(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    """값 → bin 인덱스. 범위 밖 값은 양 끝 bin 으로 clamp 한다."""
    idx = np.floor((values - lo) / (hi - lo) * bins)
    return np.clip(idx, 0, bins - 1).astype(np.int64)


def _counts_to_density(
    counts: np.ndarray, row_counts: np.ndarray, bin_width_x: float, range_width: float
) -> np.ndarray:
    """카운트 행렬 → 행 정규화된 밀도 행렬 (빈 행 채움 + floor 적용)."""
    filled = np.flatnonzero(row_counts > 0)
    density = np.zeros(counts.shape, dtype=np.float64)
    density[filled] = counts[filled] / (row_counts[filled, None] * bin_width_x)

    # 빈 행 → 가장 가까운 비어있지 않은 행 복사 (동률이면 인덱스가 작은 행)
    empty = np.flatnonzero(row_counts == 0)
    if empty.size:
        nearest = filled[np.argmin(np.abs(empty[:, None] - filled[None, :]), axis=1)]
        density[empty] = density[nearest]
        logger.debug("🧩 [NoiseModel] 빈 행 %d개를 인접 행으로 채움", empty.size)

    # floor 적용: d' = d·(1 − floor·W) + floor  →  행 합 1 유지, 모든 값 ≥ floor
    mix = DENSITY_FLOOR * range_width
    if mix >= 1.0:
        raise NoiseModelError(f"intensity range {range_width} too wide for density floor")
    return density * (1.0 - mix) + DENSITY_FLOOR


# ============================================================
#  질의 (우도 / s 에 대한 미분)
# ============================================================

def _locate(model: NoiseModel, x, s):
    """(x, s) → (열, 하단 행, 상단 행, 보간 비율, 행 좌표 t)."""
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    col = _bin_index(x, model.range_min, model.range_max, model.bins_x)

    # t: 행 중심 단위 좌표 (t = r 이면 정확히 r 번째 행 중심)
    t = (s - model.range_min) / model.row_spacing - 0.5
    r0 = np.clip(np.floor(t), 0, max(model.bins_s - 2, 0)).astype(np.int64)
    r1 = np.minimum(r0 + 1, model.bins_s - 1)
    frac = np.clip(t - r0, 0.0, 1.0)
    return col, r0, r1, frac, t


def likelihood(model: NoiseModel, x, s) -> np.ndarray:
    """
    관측 우도 p(x|s). x, s 는 브로드캐스트 가능한 스칼라/배열.
    s 방향으로 행 중심 사이 선형 보간, 바깥쪽 행 중심 너머에서는 상수.
    """
    col, r0, r1, frac, _ = _locate(model, x, s)
    d0 = model.density[r0, col]
    d1 = model.density[r1, col]
    return d0 + frac * (d1 - d0)


def likelihood_grad_s(model: NoiseModel, x, s) -> np.ndarray:
    """
    ∂p(x|s)/∂s. 구간 내부에서는 (d[r+1] − d[r]) / row_spacing,
    바깥쪽 행 중심 너머에서는 0, 매듭점(knot)에서는 우미분값.
    """
    col, r0, r1, _, t = _locate(model, x, s)
    slope = (model.density[r1, col] - model.density[r0, col]) / model.row_spacing
    inside = (t >= 0.0) & (t < model.bins_s - 1)
    return np.where(inside, slope, 0.0)


def row_mean_observation(model: NoiseModel) -> np.ndarray:
    """각 행(신호 수준)에서 밀도 가중 평균 관측값 (노이즈 편향 진단용)."""
    weights = model.density * model.bin_width_x
    return weights @ model.column_centers


# ============================================================
#  저장 / 로딩
# ============================================================

def save_noise_model(model: NoiseModel, path: str | Path):
    """노이즈 모델을 컨테이너 파일로 저장한다 (밀도는 64-bit 그대로)."""
    header = {
        "version": model.version,
        "bins_s": model.bins_s,
        "bins_x": model.bins_x,
        "range_min": float(model.range_min),
        "range_max": float(model.range_max),
        "coverage": model.coverage(),
    }
    write_container(path, NOISE_MODEL_MAGIC, header, encode_array(model.density, "f8"))
    logger.info("💾 [NoiseModel] 저장 완료: %s", path)


def load_noise_model(path: str | Path) -> NoiseModel:
    """
    노이즈 모델 파일을 읽는다.

    Raises:
        FormatError     : 읽기 불가, 잘림, 버전 불일치
        NoiseModelError : 불변식 위반 (예: 합이 0.5 인 행 → 해당 행 번호 포함)
    """
    header, payload = read_container(path, NOISE_MODEL_MAGIC, NOISE_MODEL_VERSION)
    shape = (int(header["bins_s"]), int(header["bins_x"]))
    density = decode_array(payload, "f8", shape, str(path))
    try:
        return NoiseModel(
            density=density,
            range_min=float(header["range_min"]),
            range_max=float(header["range_max"]),
        )
    except NoiseModelError as e:
        raise NoiseModelError(f"{path}: {e}") from e
