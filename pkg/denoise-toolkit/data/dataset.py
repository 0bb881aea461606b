"""
dataset.py
==========
데이터셋 디렉터리 규약 처리.

허용 구조:
    <root>/clean/, <root>/noisy/                 : 쌍 데이터 (파일 이름으로 매칭)
    <root>/*.png|*.raw                           : noisy 이미지만
    <root>/{train,val,test}/ 각각 위 두 구조 중 하나
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.errors import ValidationError
from data.image_io import list_images, load_image


CLEAN_DIR = "clean"
NOISY_DIR = "noisy"
SPLITS = ("train", "val", "test")


@dataclass
class ImageSet:
    """이름순으로 정렬된 이미지 묶음 (clean 은 쌍 데이터일 때만)."""
    names: list[str] = field(default_factory=list)
    noisy: list[np.ndarray] = field(default_factory=list)
    clean: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.names)

    @property
    def has_clean(self) -> bool:
        return self.clean is not None


@dataclass
class DatasetSplits:
    train: ImageSet
    val: ImageSet | None = None
    test: ImageSet | None = None


def match_pairs(dir_a: str | Path, dir_b: str | Path) -> list[tuple[str, Path, Path]]:
    """
    두 디렉터리의 이미지를 파일 이름(stem)으로 매칭한다.

    Raises:
        ValidationError : 한쪽에만 있는 파일이 있을 때 (이름 목록 포함)
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    for directory in (dir_a, dir_b):
        if not directory.is_dir():
            raise ValidationError(f"directory not found: {directory}")
    map_a = {p.stem: p for p in list_images(dir_a)}
    map_b = {p.stem: p for p in list_images(dir_b)}

    only_a = sorted(set(map_a) - set(map_b))
    only_b = sorted(set(map_b) - set(map_a))
    if only_a or only_b:
        raise ValidationError(
            f"unmatched files: only in {dir_a}: {only_a}; only in {dir_b}: {only_b}"
        )
    if not map_a:
        raise ValidationError(f"no images found in {dir_a}")
    return [(stem, map_a[stem], map_b[stem]) for stem in sorted(map_a)]


def load_image_set(directory: str | Path, require_clean: bool = False) -> ImageSet:
    """한 split 디렉터리를 읽는다 (clean/noisy 하위 폴더 또는 이미지 직접)."""
    directory = Path(directory)
    noisy_dir, clean_dir = directory / NOISY_DIR, directory / CLEAN_DIR

    if noisy_dir.is_dir() and clean_dir.is_dir():
        pairs = match_pairs(clean_dir, noisy_dir)
        return ImageSet(
            names=[name for name, _, _ in pairs],
            noisy=[load_image(n) for _, _, n in pairs],
            clean=[load_image(c) for _, c, _ in pairs],
        )
    if require_clean:
        raise ValidationError(f"{directory}: paired data required (missing {CLEAN_DIR}/ or {NOISY_DIR}/)")

    source = noisy_dir if noisy_dir.is_dir() else directory
    paths = list_images(source) if source.is_dir() else []
    if not paths:
        raise ValidationError(f"no images found in {source}")
    return ImageSet(names=[p.stem for p in paths], noisy=[load_image(p) for p in paths])


def load_dataset_dir(root: str | Path, require_clean: bool = False) -> DatasetSplits:
    """데이터셋 루트를 읽어 split 별 ImageSet 으로 반환한다."""
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"dataset directory not found: {root}")

    if (root / "train").is_dir():
        sets = {
            split: load_image_set(root / split, require_clean)
            for split in SPLITS if (root / split).is_dir()
        }
        return DatasetSplits(train=sets["train"], val=sets.get("val"), test=sets.get("test"))
    return DatasetSplits(train=load_image_set(root, require_clean))
