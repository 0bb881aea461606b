"""
batch_producer.py
=================
학습 배치 생산자.

워커 w 는 np.random.default_rng(SeedSequence([seed, w])) 스트림 하나를 소유하고,
전역 step g 는 항상 워커 g % W 가 만든다. 워커마다 단일 스레드 executor 를 쓰므로
각 스트림의 소비 순서가 고정되고, 배치는 step 순서대로 전달된다.
→ 같은 seed, 같은 워커 수 → 같은 배치열.
"""

import logging
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Sequence

import numpy as np

from core.errors import ValidationError
from data.masking import MaskedBatch, mask_batch
from data.normalization import NormStats
from data.patches import extract_patches
from training.config import TrainConfig, TrainMode


logger = logging.getLogger(__name__)

DEFAULT_PREFETCH = 2


def worker_stream(seed: int, worker: int) -> np.random.Generator:
    """워커별 독립 난수 스트림 (stream id = 워커 번호)."""
    return np.random.default_rng(np.random.SeedSequence([seed, worker]))


def make_batch(
    stacked: Sequence[np.ndarray],
    config: TrainConfig,
    stats: NormStats,
    rng: np.random.Generator,
) -> MaskedBatch:
    """
    배치 하나를 만든다.

    Args:
        stacked : 이미지별 (2, H, W) 배열.
                  pn2v/n2v   → [raw noisy, 표준화 noisy]
                  supervised → [표준화 noisy, 표준화 clean]
        config  : 학습 설정 (mode, batch_size, patch_size, n_masked, window, augment)
        stats   : 표준화 통계
        rng     : 이 배치를 만드는 워커의 스트림
    """
    patches = extract_patches(stacked, config.patch_size, config.batch_size, rng, config.augment)
    mode = TrainMode(config.mode)
    if mode is TrainMode.SUPERVISED:
        return MaskedBatch(inputs=patches[:, 0].copy(), clean=patches[:, 1].copy())
    return mask_batch(
        patches[:, 1], config.n_masked, config.window, rng, stats, raw_patches=patches[:, 0]
    )


def stack_inputs(
    images: Sequence[np.ndarray],
    stats: NormStats,
    mode: TrainMode,
    clean: Sequence[np.ndarray] | None = None,
) -> list[np.ndarray]:
    """모드에 맞게 이미지를 (2, H, W) 로 쌓는다 (make_batch 의 입력 형식)."""
    mode = TrainMode(mode)
    if mode is TrainMode.SUPERVISED:
        if clean is None:
            raise ValidationError("supervised training requires paired clean images")
        if len(clean) != len(images):
            raise ValidationError(f"{len(images)} noisy images but {len(clean)} clean images")
        return [
            np.stack([stats.standardize(n), stats.standardize(c)]).astype(np.float32)
            for n, c in zip(images, clean)
        ]
    return [
        np.stack([np.asarray(n, dtype=np.float32), stats.standardize(n)]).astype(np.float32)
        for n in images
    ]


class BatchProducer:
    """
    순서 보장 병렬 배치 생산자 (context manager).

    사용 예:
        with BatchProducer(stacked, config, stats) as producer:
            for step in range(total):
                batch = producer.next_batch()
    """

    def __init__(
        self,
        stacked: Sequence[np.ndarray],
        config: TrainConfig,
        stats: NormStats,
        seed: int | None = None,
        num_workers: int | None = None,
        prefetch: int = DEFAULT_PREFETCH,
    ):
        self.stacked = list(stacked)
        self.config = config
        self.stats = stats
        self.seed = config.seed if seed is None else seed
        self.num_workers = config.num_workers if num_workers is None else num_workers
        if self.num_workers < 1:
            raise ValidationError(f"num_workers must be >= 1, got {self.num_workers}")
        self.prefetch = max(1, prefetch) * self.num_workers

        self._streams = [worker_stream(self.seed, w) for w in range(self.num_workers)]
        self._executors: list[ThreadPoolExecutor] = []
        self._pending: deque[Future] = deque()
        self._submitted = 0
        self._delivered = 0

    # ──────────── 수명 관리 ────────────
    def start(self):
        if self._executors:
            return
        self._executors = [
            ThreadPoolExecutor(max_workers=1, thread_name_prefix=f"batch-{w}")
            for w in range(self.num_workers)
        ]
        self._fill()
        logger.debug("🧵 [BatchProducer] 워커 %d개 시작 (seed=%d)", self.num_workers, self.seed)

    def close(self):
        for future in self._pending:
            future.cancel()
        self._pending.clear()
        for executor in self._executors:
            executor.shutdown(wait=True, cancel_futures=True)
        self._executors = []

    def __enter__(self) -> "BatchProducer":
        self.start()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
        return False

    # ──────────── 배치 전달 ────────────
    def _fill(self):
        while len(self._pending) < self.prefetch:
            worker = self._submitted % self.num_workers
            self._pending.append(
                self._executors[worker].submit(
                    make_batch, self.stacked, self.config, self.stats, self._streams[worker]
                )
            )
            self._submitted += 1

    def next_batch(self) -> MaskedBatch:
        """다음 step 의 배치 (step 순서대로)."""
        if not self._executors:
            self.start()
        batch = self._pending.popleft().result()
        self._delivered += 1
        self._fill()
        return batch

    @property
    def delivered(self) -> int:
        return self._delivered
