"""
masking.py
==========
Noise2Void 방식 blind-spot 마스킹.

    1) 층화 격자(stratified grid) + 셀별 균일 jitter 로 blind-spot 위치 선택
    2) 각 blind-spot 값을 주변 window×window 이웃(중심 제외, 패치 경계에서 잘림)
       중 균일하게 고른 픽셀 값으로 치환
    3) 치환 전 원래 관측값을 타깃으로 보관 (표준화 값 + raw 값)

네트워크는 blind-spot 픽셀의 원래 값을 입력으로 절대 보지 못하며,
손실 함수만이 타깃을 통해 그 값을 본다.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from core.errors import ShapeError, ValidationError
from data.normalization import NormStats


DEFAULT_WINDOW = 5
DEFAULT_MASK_FRACTION = 1.0 / 64.0


def default_mask_count(patch_size: int) -> int:
    """패치 픽셀의 약 1/64 (64×64 패치 → 64 개)."""
    return max(1, int(round(patch_size * patch_size * DEFAULT_MASK_FRACTION)))


# ──────────────────────────────────────────────
#  데이터 클래스
# ──────────────────────────────────────────────

@dataclass
class MaskedPatch:
    """
    마스킹된 패치 1개 (MaskedBatch 의 한 항목).

    Attributes:
        inputs               : (H, W) 표준화 입력, blind-spot 은 이웃 값으로 치환됨
        coords               : (n, 2) blind-spot 좌표 (row, col), 중복 없음
        donors               : (n, 2) 치환 값을 가져온 이웃 좌표
        targets              : (n,) 치환 전 raw 관측값 x_i
        targets_standardized : (n,) 치환 전 표준화 값
    """
    inputs: np.ndarray
    coords: np.ndarray
    donors: np.ndarray
    targets: np.ndarray
    targets_standardized: np.ndarray

    @property
    def mask_count(self) -> int:
        return int(self.coords.shape[0])


@dataclass
class MaskedBatch:
    """
    B 개 패치의 묶음.

    Attributes:
        inputs               : (B, H, W) 표준화 입력
        coords               : 패치별 (n_b, 2) 좌표 리스트
        targets              : 패치별 raw 타깃 리스트
        targets_standardized : 패치별 표준화 타깃 리스트
        clean                : (B, H, W) 표준화 clean 패치 (supervised 전용, 없으면 None)
    """
    inputs: np.ndarray
    coords: list[np.ndarray] = field(default_factory=list)
    targets: list[np.ndarray] = field(default_factory=list)
    targets_standardized: list[np.ndarray] = field(default_factory=list)
    clean: np.ndarray | None = None

    @property
    def mask_count(self) -> list[int]:
        return [int(c.shape[0]) for c in self.coords]

    def flat_indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """모든 blind-spot 의 (batch, row, col) 평탄화 인덱스."""
        if not self.coords:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, empty
        batch = np.concatenate(
            [np.full(c.shape[0], b, dtype=np.int64) for b, c in enumerate(self.coords)]
        )
        stacked = np.concatenate(self.coords).astype(np.int64)
        return batch, stacked[:, 0], stacked[:, 1]

    def flat_targets(self) -> np.ndarray:
        return np.concatenate(self.targets) if self.targets else np.zeros(0)

    def flat_targets_standardized(self) -> np.ndarray:
        return (
            np.concatenate(self.targets_standardized)
            if self.targets_standardized else np.zeros(0)
        )


# ============================================================
#  위치 선택
# ============================================================

def stratified_positions(shape: tuple[int, int], n_masked: int, rng: np.random.Generator) -> np.ndarray:
    """
    층화 격자 위에서 셀마다 한 점을 균일 jitter 로 뽑는다.
    셀 한 변 = sqrt(H·W / n_masked) → 기대 개수 ≈ n_masked.
    패치 밖으로 나간 점은 버리고, 같은 픽셀에 겹친 점은 한 번만 남긴다.
    """
    height, width = shape
    if n_masked == 0:
        return np.zeros((0, 2), dtype=np.int64)

    cell = np.sqrt(height * width / n_masked)
    grid_rows = int(np.ceil(height / cell))
    grid_cols = int(np.ceil(width / cell))
    gi, gj = np.meshgrid(np.arange(grid_rows), np.arange(grid_cols), indexing="ij")
    jitter = rng.random((2, grid_rows, grid_cols))
    rows = np.floor((gi + jitter[0]) * cell).astype(np.int64).ravel()
    cols = np.floor((gj + jitter[1]) * cell).astype(np.int64).ravel()

    keep = (rows < height) & (cols < width)
    flat = np.unique(rows[keep] * width + cols[keep])
    return np.stack([flat // width, flat % width], axis=1)


def _window_offsets(window: int) -> np.ndarray:
    half = window // 2
    return np.array(
        [(dy, dx) for dy in range(-half, half + 1) for dx in range(-half, half + 1) if dy or dx],
        dtype=np.int64,
    )


def pick_donors(
    coords: np.ndarray, shape: tuple[int, int], window: int, rng: np.random.Generator
) -> np.ndarray:
    """각 blind-spot 마다 window 안의 (중심 제외, 경계 내부) 이웃 하나를 균일하게 고른다."""
    n = coords.shape[0]
    if n == 0:
        return np.zeros((0, 2), dtype=np.int64)

    candidates = coords[:, None, :] + _window_offsets(window)[None, :, :]
    valid = (
        (candidates[..., 0] >= 0) & (candidates[..., 0] < shape[0])
        & (candidates[..., 1] >= 0) & (candidates[..., 1] < shape[1])
    )
    n_valid = valid.sum(axis=1)
    if np.any(n_valid == 0):
        raise ShapeError(f"patch {shape} too small: a blind-spot has no in-bounds neighbor")

    pick = np.minimum((rng.random(n) * n_valid).astype(np.int64), n_valid - 1)
    rank = np.cumsum(valid, axis=1) - 1
    chosen = np.argmax(valid & (rank == pick[:, None]), axis=1)
    return candidates[np.arange(n), chosen]


# ============================================================
#  마스킹
# ============================================================

def mask_patch(
    patch: np.ndarray,
    n_masked: int,
    window: int,
    rng: np.random.Generator,
    stats: NormStats,
    raw_patch: np.ndarray | None = None,
) -> MaskedPatch:
    """
    표준화된 패치 1개에 blind-spot 마스킹을 적용한다.

    Args:
        patch     : (H, W) 표준화 패치
        n_masked  : 목표 blind-spot 개수 (0 이면 입력 그대로)
        window    : 치환 이웃 창 한 변 (홀수, ≥ 3)
        rng       : np.random.Generator (위치/이웃 선택은 픽셀 값과 무관)
        stats     : 표준화 통계 (raw 타깃 복원용)
        raw_patch : 같은 위치의 raw 패치. 주어지면 raw 타깃을 여기서 그대로 가져온다

    Raises:
        ValidationError : window 가 1 이하/짝수, n_masked 범위 초과
    """
    patch = np.asarray(patch, dtype=np.float32)
    if patch.ndim != 2:
        raise ShapeError(f"mask_patch expects a 2D patch, got shape {patch.shape}")
    if window < 3 or window % 2 == 0:
        raise ValidationError(f"window must be odd and >= 3 (a window of 1 has no donor pixels), got {window}")
    if not 0 <= n_masked <= patch.size:
        raise ValidationError(f"n_masked must lie in [0, {patch.size}], got {n_masked}")

    coords = stratified_positions(patch.shape, n_masked, rng)
    donors = pick_donors(coords, patch.shape, window, rng)

    inputs = patch.copy()
    inputs[coords[:, 0], coords[:, 1]] = patch[donors[:, 0], donors[:, 1]]

    targets_std = patch[coords[:, 0], coords[:, 1]].astype(np.float64)
    if raw_patch is not None:
        targets = np.asarray(raw_patch, dtype=np.float64)[coords[:, 0], coords[:, 1]]
    else:
        targets = stats.destandardize(targets_std)

    return MaskedPatch(
        inputs=inputs,
        coords=coords,
        donors=donors,
        targets=targets,
        targets_standardized=targets_std,
    )


def mask_batch(
    patches: np.ndarray,
    n_masked: int,
    window: int,
    rng: np.random.Generator,
    stats: NormStats,
    raw_patches: Sequence[np.ndarray] | None = None,
) -> MaskedBatch:
    """(B, H, W) 표준화 패치 전체에 mask_patch 를 적용해 MaskedBatch 로 묶는다."""
    entries = [
        mask_patch(p, n_masked, window, rng, stats, None if raw_patches is None else raw_patches[i])
        for i, p in enumerate(patches)
    ]
    return MaskedBatch(
        inputs=np.stack([e.inputs for e in entries]).astype(np.float32),
        coords=[e.coords for e in entries],
        targets=[e.targets for e in entries],
        targets_standardized=[e.targets_standardized for e in entries],
    )
