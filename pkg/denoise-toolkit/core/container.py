"""
container.py
============
노이즈 모델(.nm), raw 이미지(.raw), 체크포인트(.ckpt)가 공유하는
자기 기술형(self-describing) 파일 컨테이너 코덱.

파일 구조 (docs/FILE_FORMATS.md 참조):
    1행  : ASCII magic (예: "PN2V-NOISEMODEL")
    2행  : JSON 헤더 (키 정렬, 개행 없음)
    이후 : little-endian 바이너리 payload
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from core.errors import FormatError


BYTE_ORDER = "little"


def write_container(path: str | Path, magic: str, header: dict, payload: bytes):
    """
    헤더와 payload 를 하나의 파일로 기록한다.

    Args:
        path    : 출력 경로
        magic   : 1행 식별 문자열
        header  : JSON 직렬화 가능한 딕셔너리 (byte_order, payload_bytes 는 자동 추가)
        payload : little-endian 으로 인코딩된 바이트열
    """
    full_header = dict(header)
    full_header["byte_order"] = BYTE_ORDER
    full_header["payload_bytes"] = len(payload)
    header_line = json.dumps(full_header, sort_keys=True, separators=(",", ":"))

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(magic.encode("ascii") + b"\n")
            fh.write(header_line.encode("utf-8") + b"\n")
            fh.write(payload)
    except OSError as e:
        raise FormatError(f"cannot write {path}: {e}") from e


def read_container(path: str | Path, magic: str, version: int) -> tuple[dict, bytes]:
    """
    컨테이너 파일을 읽어 (헤더, payload) 를 반환한다.
    부분적으로만 읽힌 파일은 절대 반환하지 않는다.

    Raises:
        FormatError : 파일 없음, magic 불일치, 헤더 손상, 버전 불일치, payload 잘림
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e

    first_nl = raw.find(b"\n")
    second_nl = raw.find(b"\n", first_nl + 1) if first_nl >= 0 else -1
    if first_nl < 0 or second_nl < 0:
        raise FormatError(f"{path}: truncated header")

    found_magic = raw[:first_nl].decode("ascii", errors="replace")
    if found_magic != magic:
        raise FormatError(f"{path}: expected '{magic}' file, found '{found_magic}'")

    try:
        header = json.loads(raw[first_nl + 1:second_nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: corrupt header ({e})") from e

    if header.get("version") != version:
        raise FormatError(
            f"{path}: version mismatch (file {header.get('version')}, expected {version})"
        )
    if header.get("byte_order") != BYTE_ORDER:
        raise FormatError(f"{path}: unsupported byte order {header.get('byte_order')}")

    payload = raw[second_nl + 1:]
    if len(payload) != header.get("payload_bytes"):
        raise FormatError(
            f"{path}: truncated payload ({len(payload)} of {header.get('payload_bytes')} bytes)"
        )
    return header, payload


def decode_array(payload: bytes, dtype: str, shape: tuple[int, ...], what: str) -> np.ndarray:
    """little-endian payload 를 지정 shape 의 배열로 복원한다 (길이 검증 포함)."""
    le_dtype = np.dtype(dtype).newbyteorder("<")
    expected = int(np.prod(shape, dtype=np.int64)) * le_dtype.itemsize
    if len(payload) != expected:
        raise FormatError(f"{what}: payload holds {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=le_dtype).reshape(shape).astype(dtype)


def encode_array(array: np.ndarray, dtype: str) -> bytes:
    """배열을 little-endian 바이트열로 인코딩한다."""
    return np.ascontiguousarray(array, dtype=np.dtype(dtype).newbyteorder("<")).tobytes()


def file_digest(path: str | Path) -> str:
    """파일 내용의 sha256 16진 digest (체크포인트 ↔ 노이즈 모델 무결성 확인용)."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
