"""
report.py
=========
이미지 세트 평가와 보고서 (평균 ± 2·SEM).

    SEM = 표본 표준편차(n−1) / √n
"""

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from core.errors import DenoiserError, EvaluationError, SingleImageSEMWarning, ValidationError
from evaluation.metrics import MetricKind, metric_function


logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """
    Attributes:
        metric : psnr | si_psnr
        values : 이미지별 값 (dB)
        names  : 이미지 이름 (values 와 같은 순서)
    """
    metric: MetricKind
    values: list[float]
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.metric = MetricKind(self.metric)
        if not self.names:
            self.names = [str(i) for i in range(len(self.values))]

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def two_sem(self) -> float:
        """2 × 평균의 표준오차. n = 1 이거나 값에 inf 가 있으면 0."""
        values = np.asarray(self.values, dtype=np.float64)
        if values.size < 2 or not np.all(np.isfinite(values)):
            return 0.0
        return float(2.0 * values.std(ddof=1) / math.sqrt(values.size))

    def cell(self, digits: int = 2) -> str:
        return f"{self.mean:.{digits}f} ± {self.two_sem:.{digits}f}"

    def to_records(self) -> list[dict]:
        return [
            {"image": name, "value": float(value), "metric": self.metric.value}
            for name, value in zip(self.names, self.values)
        ]


def evaluate_set(
    preds: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    metric=MetricKind.PSNR,
    names: Sequence[str] | None = None,
    peak: float | None = None,
) -> EvalReport:
    """
    Raises:
        ValidationError : 빈 세트, 개수 불일치
        EvaluationError : 이미지별 오류 (image_index 포함)
    """
    if len(preds) == 0:
        raise ValidationError("cannot evaluate an empty image set")
    if len(preds) != len(gts):
        raise ValidationError(f"{len(preds)} predictions but {len(gts)} ground-truth images")

    fn = metric_function(metric)
    values = []
    for index, (pred, gt) in enumerate(zip(preds, gts)):
        try:
            values.append(fn(pred, gt, peak))
        except DenoiserError as e:
            label = names[index] if names else index
            raise EvaluationError(f"image {label}: {e}", image_index=index) from e

    if len(values) == 1:
        message = "only one image: 2·SEM reported as 0"
        logger.warning("⚠️ [Evaluate] %s", message)
        warnings.warn(message, SingleImageSEMWarning, stacklevel=2)
    if not all(math.isfinite(v) for v in values):
        logger.warning("⚠️ [Evaluate] 무한대 값 포함 (완전 복원 이미지) → 2·SEM 0 으로 보고")

    return EvalReport(metric=metric, values=values, names=list(names) if names else [])


# ============================================================
#  출력
# ============================================================

def format_report(report: EvalReport) -> str:
    """이미지별 값 + 요약 행의 정렬된 텍스트 표."""
    width = max([len("image")] + [len(n) for n in report.names])
    lines = [f"{'image':<{width}}  {report.metric.value:>10}"]
    lines.append("-" * len(lines[0]))
    for name, value in zip(report.names, report.values):
        lines.append(f"{name:<{width}}  {value:>10.4f}")
    lines.append("-" * len(lines[0]))
    lines.append(f"{'mean ± 2SEM':<{width}}  {report.cell(4):>10}  (n={report.count})")
    return "\n".join(lines)


def compare_methods(
    gts: Sequence[np.ndarray],
    methods: Mapping[str, Sequence[np.ndarray]],
    metrics: Sequence = (MetricKind.PSNR, MetricKind.SI_PSNR),
    names: Sequence[str] | None = None,
) -> dict[str, dict[MetricKind, EvalReport]]:
    """방법별·지표별 보고서. 방법 순서는 입력 순서를 따른다."""
    return {
        method: {MetricKind(m): evaluate_set(preds, gts, m, names) for m in metrics}
        for method, preds in methods.items()
    }


def format_comparison(results: Mapping[str, Mapping[MetricKind, EvalReport]]) -> str:
    """행 = 방법, 열 = 지표, 칸 = 'mean ± 2SEM'."""
    if not results:
        return ""
    metrics = list(next(iter(results.values())))
    cells = {
        method: [reports[m].cell() for m in metrics] for method, reports in results.items()
    }
    method_width = max(len("method"), *(len(m) for m in cells))
    col_width = max([len(m.value) for m in metrics] + [len(c) for row in cells.values() for c in row])

    header = f"{'method':<{method_width}}  " + "  ".join(f"{m.value:>{col_width}}" for m in metrics)
    lines = [header, "-" * len(header)]
    for method, row in cells.items():
        lines.append(f"{method:<{method_width}}  " + "  ".join(f"{c:>{col_width}}" for c in row))
    return "\n".join(lines)


def write_records(records: Sequence[dict], path: str | Path):
    """기계 판독용 레코드를 JSON lines 로 기록한다 (덮어쓰기)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
