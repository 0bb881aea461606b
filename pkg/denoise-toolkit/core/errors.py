"""
errors.py
=========
툴킷 전역에서 사용하는 예외/경고 클래스 정의 모듈.

CLI 종료 코드 대응:
    - ValidationError 계열 → 1 (작업 시작 전 검증 실패)
    - 그 외 DenoiserError  → 2 (실행 중 실패)
"""


class DenoiserError(Exception):
    """툴킷의 모든 예외의 최상위 클래스."""

    exit_code = 2


# ──────────────────────────────────────────────
#  검증 오류 (exit 1)
# ──────────────────────────────────────────────

class ValidationError(DenoiserError):
    """인자/설정/입력 형태가 사전 조건을 만족하지 않을 때 발생."""

    exit_code = 1


class ShapeError(ValidationError):
    """배열 shape 가 맞지 않을 때 (짝 불일치, 2^depth 배수 아님 등)."""


class ModeMismatchError(ValidationError):
    """체크포인트의 학습 모드와 요청된 추론/학습 모드가 맞지 않을 때."""


# ──────────────────────────────────────────────
#  실행 오류 (exit 2)
# ──────────────────────────────────────────────

class FormatError(DenoiserError):
    """파일이 손상/잘림/버전 불일치로 읽을 수 없을 때."""


class NoiseModelError(DenoiserError):
    """노이즈 모델 생성 실패 또는 불변식(행 정규화 등) 위반."""


class ImageFormatError(DenoiserError):
    """지원하지 않는 이미지 형식 (다채널 포함)."""


class DivergenceError(DenoiserError):
    """학습 중 손실이 유한하지 않게 된 경우."""


class EvaluationError(DenoiserError):
    """평가 실패. 실패한 이미지 인덱스를 함께 보관한다."""

    def __init__(self, message: str, image_index: int | None = None):
        super().__init__(message)
        self.image_index = image_index


# ──────────────────────────────────────────────
#  경고 (작업은 계속 진행)
# ──────────────────────────────────────────────

class NoiseModelDigestWarning(UserWarning):
    """체크포인트에 기록된 노이즈 모델 digest 와 실제 파일이 다를 때."""


class SingleImageSEMWarning(UserWarning):
    """이미지가 1장뿐이라 2·SEM 을 0 으로 보고할 때."""


class ClippingWarning(UserWarning):
    """정수 PNG 저장 시 값 범위를 벗어나 잘린 픽셀이 있을 때."""
