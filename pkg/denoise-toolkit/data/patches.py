"""
patches.py
==========
학습용 패치 추출 (균일 랜덤 오프셋 + 선택적 8방향 이면체(dihedral) 증강).
"""

from typing import Sequence

import numpy as np

from core.errors import ShapeError


def as_generator(rng_or_seed) -> np.random.Generator:
    """시드(int/SeedSequence) 또는 Generator 를 Generator 로 통일한다."""
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return np.random.default_rng(rng_or_seed)


def extract_patches(
    images: Sequence[np.ndarray],
    patch_size: int,
    count: int,
    rng_seed,
    augment: bool = False,
) -> np.ndarray:
    """
    이미지들에서 축 정렬 정사각 패치를 균일 랜덤 위치로 잘라낸다.

    Args:
        images     : (H, W) 또는 (C, H, W) 배열들. (C, H, W) 는 같은 위치에서
                     함께 잘린다 (예: noisy/clean 쌍을 채널로 쌓은 경우)
        patch_size : 패치 한 변 길이
        count      : 패치 수
        rng_seed   : 시드 또는 np.random.Generator (같은 시드 → 같은 패치열)
        augment    : True 면 패치마다 8방향 이면체 변환 중 하나를 균일하게 적용

    Returns:
        (count, [C,] patch_size, patch_size) float32 배열

    Raises:
        ShapeError : 패치가 어떤 이미지보다 클 때
    """
    if len(images) == 0:
        raise ShapeError("extract_patches requires at least one image")
    if patch_size < 1:
        raise ShapeError(f"patch_size must be >= 1, got {patch_size}")
    for idx, image in enumerate(images):
        height, width = image.shape[-2:]
        if patch_size > min(height, width):
            raise ShapeError(
                f"patch of {patch_size} px larger than image {idx} ({height}x{width})"
            )

    rng = as_generator(rng_seed)
    lead_shape = np.shape(images[0])[:-2]
    patches = np.empty((count, *lead_shape, patch_size, patch_size), dtype=np.float32)

    for i in range(count):
        image = images[int(rng.integers(len(images)))]
        height, width = image.shape[-2:]
        top = int(rng.integers(height - patch_size + 1))
        left = int(rng.integers(width - patch_size + 1))
        patch = image[..., top:top + patch_size, left:left + patch_size]
        if augment:
            patch = _dihedral(patch, int(rng.integers(8)))
        patches[i] = patch
    return patches


def _dihedral(patch: np.ndarray, code: int) -> np.ndarray:
    """code ∈ [0, 8): 하위 2비트 = 90° 회전 횟수, 상위 비트 = 좌우 반전."""
    out = np.rot90(patch, k=code % 4, axes=(-2, -1))
    if code >= 4:
        out = np.flip(out, axis=-1)
    return out
