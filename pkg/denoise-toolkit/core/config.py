"""
config.py
=========
설정 파일(key = value, 명령별 [section]) 로딩과
CLI 플래그 병합을 담당하는 모듈.

우선순위:
    dataclass 기본값  <  설정 파일 값  <  명시적 CLI 플래그
"""

import configparser
import dataclasses
import enum
import os
import types
import typing
from pathlib import Path

from core.errors import ValidationError


THREADS_ENV = "PN2V_THREADS"

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def default_threads() -> int:
    """환경 변수 PN2V_THREADS 로 지정된 기본 스레드 수 (미지정 시 1)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as e:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got '{raw}'") from e
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


def load_config_file(path: str | Path | None, section: str) -> dict[str, str]:
    """
    설정 파일에서 명령(section)에 해당하는 key/value 를 읽는다.

    Returns:
        {key: 문자열 값}. path 가 None 이거나 section 이 없으면 빈 딕셔너리
    """
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")

    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ValidationError(f"{path}: {e}") from e

    unknown_sections = set(parser.sections()) - {section} - _KNOWN_SECTIONS
    if unknown_sections:
        raise ValidationError(f"{path}: unknown sections {sorted(unknown_sections)}")
    if not parser.has_section(section):
        return {}
    return dict(parser.items(section))


_KNOWN_SECTIONS = {"synth", "build-nm", "train", "denoise", "evaluate", "compare"}


def merge_options(cls, file_values: dict, flag_values: dict):
    """
    dataclass 기본값에 파일 값, 플래그 값을 차례로 덮어써 인스턴스를 만든다.

    Args:
        cls         : 대상 dataclass 타입 (TrainConfig, UNetConfig 등)
        file_values : 설정 파일 값 (문자열; 타입 변환 수행)
        flag_values : CLI 에서 명시적으로 준 값 (None 은 '지정 안 함')

    Raises:
        ValidationError : 알 수 없는 키, 변환 불가 값
    """
    hints = typing.get_type_hints(cls)
    field_names = {f.name for f in dataclasses.fields(cls)}

    unknown = set(file_values) - field_names
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")

    values = {}
    for key, raw in file_values.items():
        values[key] = _coerce(raw, hints[key], key)
    for key, value in flag_values.items():
        if value is None:
            continue
        if key not in field_names:
            raise ValidationError(f"unknown {cls.__name__} key: {key}")
        values[key] = _coerce(value, hints[key], key) if isinstance(value, str) else value
    return cls(**values)


def split_known(values: dict, cls) -> tuple[dict, dict]:
    """values 를 (cls 필드에 해당하는 것, 나머지) 로 나눈다."""
    names = {f.name for f in dataclasses.fields(cls)}
    mine = {k: v for k, v in values.items() if k in names}
    rest = {k: v for k, v in values.items() if k not in names}
    return mine, rest


def _coerce(raw: str, annotation, key: str):
    """문자열 설정값을 필드 타입으로 변환한다."""
    origin = typing.get_origin(annotation)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        if raw.strip().lower() in ("", "none", "null"):
            return None
        annotation = args[0]

    text = raw.strip()
    try:
        if annotation is bool:
            lowered = text.lower()
            if lowered in _TRUE_WORDS:
                return True
            if lowered in _FALSE_WORDS:
                return False
            raise ValueError(f"not a boolean: {text}")
        if isinstance(annotation, type) and issubclass(annotation, enum.Enum):
            return annotation(text)
        if annotation in (int, float, str):
            return annotation(text)
    except ValueError as e:
        raise ValidationError(f"invalid value for '{key}': {raw} ({e})") from e
    raise ValidationError(f"'{key}' cannot be set from a config file")
