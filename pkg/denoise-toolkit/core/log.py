"""
log.py
======
로깅 설정. 진행 상황/진단 메시지는 stderr, 결과는 stdout(print)으로 분리한다.
"""

import logging
import sys


LOG_FORMAT = "%(asctime)s %(levelname)-7s %(message)s"


def configure_logging(verbose: bool = False):
    """루트 로거에 stderr 핸들러 하나만 설치한다 (중복 호출 안전)."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt="%H:%M:%S"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
