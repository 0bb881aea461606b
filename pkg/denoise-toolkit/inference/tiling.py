"""
tiling.py
=========
겹침 타일 분할 추론.

    1) 이미지를 reflect padding (위/왼쪽 = overlap, 아래/오른쪽 = 나머지)
    2) 타일 원점 = (i·core, j·core), core = tile − 2·overlap
    3) 각 타일의 내부(core×core) 만 출력에 기록 → 모든 출력 픽셀은 정확히 한 번 생성

tile, overlap 이 모두 2^depth 의 배수이므로 어떤 타일 배치에서도 pooling 격자가 같은
위치에 정렬되고, overlap ≥ 수용 영역 반경이면 결과는 타일 배치와 무관하다.
"""

import logging
import math
import sys
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import torch
from torch import nn
from tqdm import tqdm

from core.errors import ShapeError, ValidationError
from network.unet import UNetConfig, receptive_field_radius


logger = logging.getLogger(__name__)

DEFAULT_TILE = 256
DEFAULT_TILE_BATCH = 4


def default_overlap(net_cfg: UNetConfig) -> int:
    """수용 영역 반경을 2^depth 배수로 올림한 값 (depth 3, 3×3 → 56)."""
    multiple = net_cfg.size_multiple
    return int(math.ceil(receptive_field_radius(net_cfg) / multiple) * multiple)


@dataclass
class TilingConfig:
    """
    Attributes:
        tile       : 타일 한 변 (2^depth 의 배수)
        overlap    : 타일 가장자리에서 버리는 여백 (None → default_overlap)
        batch_size : 한 번에 네트워크에 넣는 타일 수
    """
    tile: int = DEFAULT_TILE
    overlap: int | None = None
    batch_size: int = DEFAULT_TILE_BATCH

    def resolve(self, net_cfg: UNetConfig) -> "TilingConfig":
        """overlap 기본값을 채우고 검증한 사본."""
        resolved = TilingConfig(
            tile=self.tile,
            overlap=default_overlap(net_cfg) if self.overlap is None else self.overlap,
            batch_size=self.batch_size,
        )
        resolved.validate(net_cfg)
        return resolved

    def validate(self, net_cfg: UNetConfig):
        multiple = net_cfg.size_multiple
        radius = receptive_field_radius(net_cfg)
        if self.overlap is None:
            raise ValidationError("overlap unresolved; call resolve() first")
        if self.tile % multiple or self.overlap % multiple:
            raise ValidationError(
                f"tile ({self.tile}) and overlap ({self.overlap}) must be multiples of 2^depth = {multiple}"
            )
        if self.overlap < radius:
            raise ValidationError(
                f"overlap {self.overlap} smaller than receptive-field radius {radius}"
            )
        if self.tile - 2 * self.overlap <= 0:
            raise ValidationError(
                f"tile {self.tile} leaves no interior with overlap {self.overlap}"
            )
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def core(self) -> int:
        return self.tile - 2 * self.overlap


@dataclass(frozen=True)
class Tile:
    """타일 1개. (top, left) 는 padding 된 이미지 좌표, 출력 영역은 원본 이미지 좌표."""
    top: int
    left: int
    out_top: int
    out_left: int
    out_height: int
    out_width: int


def plan_tiles(shape: tuple[int, int], tiling: TilingConfig) -> tuple[list[Tile], tuple[int, int, int, int]]:
    """
    Returns:
        (타일 목록, padding (top, bottom, left, right))
    """
    height, width = shape
    core, overlap = tiling.core, tiling.overlap
    n_rows, n_cols = math.ceil(height / core), math.ceil(width / core)
    padding = (
        overlap, n_rows * core + overlap - height,
        overlap, n_cols * core + overlap - width,
    )
    tiles = [
        Tile(
            top=i * core, left=j * core,
            out_top=i * core, out_left=j * core,
            out_height=min(core, height - i * core), out_width=min(core, width - j * core),
        )
        for i in range(n_rows) for j in range(n_cols)
    ]
    return tiles, padding


def _batched(items: list, size: int) -> Iterator[list]:
    for start in range(0, len(items), size):
        yield items[start:start + size]


def predict_tiled(
    net: nn.Module, image: np.ndarray, tiling: TilingConfig, progress: bool = False
) -> np.ndarray:
    """
    표준화 이미지 (H, W) → 네트워크 출력 (H, W, K) (K 가 마지막, 연속 메모리).
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ShapeError(f"tiled inference expects a 2D image, got shape {image.shape}")
    tiles, (pt, pb, pl, pr) = plan_tiles(image.shape, tiling)
    padded = np.pad(image, ((pt, pb), (pl, pr)), mode="reflect")

    dtype = next(net.parameters()).dtype
    k = None
    output = None
    o, core = tiling.overlap, tiling.core
    net.eval()

    batches = list(_batched(tiles, tiling.batch_size))
    for group in tqdm(batches, desc="tiles", unit="batch", file=sys.stderr, disable=not progress):
        stack = np.stack([padded[t.top:t.top + tiling.tile, t.left:t.left + tiling.tile] for t in group])
        with torch.no_grad():
            result = net(torch.as_tensor(stack[:, None], dtype=dtype)).cpu().numpy()
        if output is None:
            k = result.shape[1]
            output = np.empty((*image.shape, k), dtype=result.dtype)
        for t, tile_out in zip(group, result):
            interior = tile_out[:, o:o + core, o:o + core][:, :t.out_height, :t.out_width]
            output[t.out_top:t.out_top + t.out_height, t.out_left:t.out_left + t.out_width] = \
                np.moveaxis(interior, 0, -1)

    logger.debug("🧩 [Tiling] 타일 %d개 (tile=%d, overlap=%d, K=%d)", len(tiles), tiling.tile, o, k)
    return np.ascontiguousarray(output)
