"""
image_io.py
===========
단일 채널 이미지 입출력 모듈.

지원 형식:
    - .png : 8/16-bit 그레이스케일 (Pillow)
    - .raw : 툴킷 raw 컨테이너 (헤더 {version, height, width} + little-endian float32)

다채널 이미지는 명시적으로 거부한다 (단일 채널 전용).
"""

import logging
import warnings
from pathlib import Path

import numpy as np
from PIL import Image

from core.container import decode_array, encode_array, read_container, write_container
from core.errors import ClippingWarning, ImageFormatError, ShapeError


logger = logging.getLogger(__name__)

RAW_MAGIC = "PN2V-RAWIMAGE"
RAW_VERSION = 1
RAW_SUFFIX = ".raw"
PNG_SUFFIX = ".png"
IMAGE_SUFFIXES = (RAW_SUFFIX, PNG_SUFFIX)

# Pillow 모드 → 단일 채널 여부
_SINGLE_CHANNEL_MODES = {"L", "I", "I;16", "I;16B", "I;16L", "F"}


def as_image(array) -> np.ndarray:
    """
    임의 배열을 ImageArray(2D float32, 유한값) 로 검증/변환한다.

    Raises:
        ShapeError : 2D 가 아니거나 크기가 0, 비유한 값 포함
    """
    image = np.asarray(array, dtype=np.float32)
    if image.ndim != 2 or image.shape[0] < 1 or image.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2D single-channel image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ShapeError("image contains non-finite values")
    return image


# ============================================================
#  읽기
# ============================================================

def load_image(path: str | Path) -> np.ndarray:
    """
    이미지를 읽어 2D float32 배열로 반환한다.
    PNG 정수값은 그대로 실수로 옮긴다 (16-bit 값 1000 → 1000.0).

    Raises:
        ImageFormatError : 미지원 확장자, 다채널 입력
        FormatError      : raw 컨테이너 손상/버전 불일치
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == RAW_SUFFIX:
        header, payload = read_container(path, RAW_MAGIC, RAW_VERSION)
        shape = (int(header["height"]), int(header["width"]))
        return as_image(decode_array(payload, "f4", shape, str(path)))
    if suffix == PNG_SUFFIX:
        return _load_png(path)
    raise ImageFormatError(f"unsupported image format '{suffix}': {path}")


def image_shape(path: str | Path) -> tuple[int, int]:
    """픽셀을 디코딩하지 않고 (H, W) 만 읽는다."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == RAW_SUFFIX:
        header, _ = read_container(path, RAW_MAGIC, RAW_VERSION)
        return int(header["height"]), int(header["width"])
    if suffix == PNG_SUFFIX:
        try:
            with Image.open(path) as img:
                width, height = img.size
        except OSError as e:
            raise ImageFormatError(f"cannot decode {path}: {e}") from e
        return height, width
    raise ImageFormatError(f"unsupported image format '{suffix}': {path}")


def _load_png(path: Path) -> np.ndarray:
    """Pillow 로 PNG 를 읽는다. 다채널(RGB, RGBA, LA, P)은 거부."""
    try:
        with Image.open(path) as img:
            if img.mode not in _SINGLE_CHANNEL_MODES:
                raise ImageFormatError(f"single-channel only: {path} has mode '{img.mode}'")
            array = np.array(img)
    except OSError as e:
        raise ImageFormatError(f"cannot decode {path}: {e}") from e
    if array.ndim != 2:
        raise ImageFormatError(f"single-channel only: {path} has shape {array.shape}")
    return as_image(array.astype(np.float32))


# ============================================================
#  쓰기
# ============================================================

def save_image(image, path: str | Path, bit_depth: int = 16) -> bool:
    """
    이미지를 저장한다. .raw 는 무손실, .png 는 정수 반올림 + 범위 clamp.

    Args:
        image     : 2D 배열
        path      : 출력 경로 (.raw / .png)
        bit_depth : PNG 비트 깊이 (8 또는 16)

    Returns:
        값이 잘린(clipping) 픽셀이 있었으면 True (ClippingWarning 도 발생)
    """
    image = as_image(image)
    path = Path(path)
    suffix = path.suffix.lower()

    if suffix == RAW_SUFFIX:
        header = {"version": RAW_VERSION, "height": image.shape[0], "width": image.shape[1]}
        write_container(path, RAW_MAGIC, header, encode_array(image, "f4"))
        return False

    if suffix != PNG_SUFFIX:
        raise ImageFormatError(f"unsupported image format '{suffix}': {path}")
    if bit_depth not in (8, 16):
        raise ImageFormatError(f"PNG bit depth must be 8 or 16, got {bit_depth}")

    top = 255 if bit_depth == 8 else 65535
    rounded = np.rint(image.astype(np.float64))
    n_clipped = int(np.count_nonzero((rounded < 0) | (rounded > top)))
    if n_clipped:
        message = f"{path}: {n_clipped} pixels clipped to [0, {top}] for {bit_depth}-bit PNG"
        logger.warning("⚠️ [ImageIO] %s", message)
        warnings.warn(message, ClippingWarning, stacklevel=2)

    dtype = np.uint8 if bit_depth == 8 else np.uint16
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.clip(rounded, 0, top).astype(dtype)).save(path)
    return n_clipped > 0


def list_images(directory: str | Path) -> list[Path]:
    """디렉터리 안의 지원 이미지 파일 목록 (이름순)."""
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
