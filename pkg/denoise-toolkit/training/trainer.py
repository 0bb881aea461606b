"""
trainer.py
==========
학습 루프.

    패치 샘플링 → (pn2v/n2v) blind-spot 마스킹 → forward → 모드별 손실(타깃 픽셀만)
    → backward → Adam 갱신.  epoch 마다 고정 검증 배치로 검증 손실을 구하고,
    ReduceLROnPlateau 로 학습률을 조정하며, 최저 검증 손실 시점의 파라미터를 보관한다.
"""

import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from tqdm import tqdm

from core.container import encode_array
from core.errors import DivergenceError, ValidationError
from data.masking import MaskedBatch
from data.normalization import NormStats, compute_stats
from network.unet import UNet, UNetConfig, init_network
from noise.noise_model import NoiseModel
from training.batch_producer import BatchProducer, make_batch, stack_inputs, worker_stream
from training.checkpoint import Checkpoint
from training.config import TrainConfig, TrainMode
from training.losses import mse_objective, pn2v_objective


logger = logging.getLogger(__name__)

# 검증 배치 전용 스트림 번호 (워커 스트림 0..W-1 과 겹치지 않음)
VALIDATION_STREAM = 2 ** 31 - 1


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochRecord] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        return self.checkpoint.epoch


# ============================================================
#  입력 준비
# ============================================================

def effective_net_config(mode: TrainMode, net_cfg: UNetConfig) -> UNetConfig:
    """n2v / supervised 는 픽셀당 예측 1개 → K = 1 로 고정."""
    if TrainMode(mode) is TrainMode.PN2V or net_cfg.out_channels == 1:
        return net_cfg
    logger.info("ℹ️ [Trainer] %s 모드: out_channels %d → 1", TrainMode(mode).value, net_cfg.out_channels)
    return replace(net_cfg, out_channels=1)


def split_validation(
    images: Sequence[np.ndarray], clean: Sequence[np.ndarray] | None, fraction: float, seed: int
) -> tuple[list, list | None, list, list | None]:
    """
    seed 로 고정된 순열에서 앞쪽 round(n·fraction) 장(최소 1장)을 검증용으로 뗀다.
    이미지가 1장뿐이거나 fraction 이 0 이면 학습 이미지로 검증한다.
    """
    n = len(images)
    if n < 2 or fraction <= 0:
        logger.warning("⚠️ [Trainer] 별도 검증 이미지 없음 → 학습 이미지로 검증합니다")
        return list(images), None if clean is None else list(clean), list(images), \
            None if clean is None else list(clean)

    order = np.random.default_rng(seed).permutation(n)
    n_val = min(n - 1, max(1, int(round(n * fraction))))
    val_idx, train_idx = sorted(order[:n_val]), sorted(order[n_val:])

    def pick(seq, idx):
        return None if seq is None else [seq[i] for i in idx]

    return pick(images, train_idx), pick(clean, train_idx), pick(images, val_idx), pick(clean, val_idx)


def _fallback_digest(model: NoiseModel) -> str:
    return hashlib.sha256(encode_array(model.density, "f8")).hexdigest()


# ============================================================
#  배치 손실
# ============================================================

def batch_loss(
    net: UNet,
    batch: MaskedBatch,
    mode: TrainMode,
    stats: NormStats,
    noise_model: NoiseModel | None = None,
) -> torch.Tensor:
    """배치 하나의 모드별 손실 (그래프 포함). 손실은 타깃 픽셀에서만 계산된다."""
    dtype = next(net.parameters()).dtype
    output = net(torch.as_tensor(batch.inputs[:, None], dtype=dtype))

    if mode is TrainMode.SUPERVISED:
        return mse_objective(output[:, 0], torch.as_tensor(batch.clean, dtype=dtype))

    b, r, c = (torch.from_numpy(i) for i in batch.flat_indices())
    if mode is TrainMode.PN2V:
        samples = output.permute(0, 2, 3, 1)[b, r, c]              # (N, K)
        targets = torch.from_numpy(batch.flat_targets())
        return pn2v_objective(samples, targets, noise_model, stats)
    return mse_objective(output[b, 0, r, c], torch.from_numpy(batch.flat_targets_standardized()))


# ============================================================
#  학습
# ============================================================

def train(
    train_cfg: TrainConfig,
    net_cfg: UNetConfig,
    images: Sequence[np.ndarray],
    clean: Sequence[np.ndarray] | None = None,
    noise_model: NoiseModel | None = None,
    noise_model_digest: str | None = None,
    val_images: Sequence[np.ndarray] | None = None,
    val_clean: Sequence[np.ndarray] | None = None,
    log_path: str | Path | None = None,
    progress: bool = True,
) -> TrainResult:
    """
    네트워크를 학습하고 최저 검증 손실 체크포인트를 반환한다.

    Args:
        train_cfg          : 학습 설정
        net_cfg            : U-Net 설정 (n2v/supervised 는 K=1 로 강제)
        images             : 학습용 noisy 이미지
        clean              : 쌍 clean 이미지 (supervised 필수)
        noise_model        : 노이즈 모델 (pn2v 필수)
        noise_model_digest : 노이즈 모델 파일 sha256 (체크포인트에 기록)
        val_images         : 별도 검증 이미지 (없으면 val_fraction 으로 분할)
        val_clean          : 검증 clean 이미지 (supervised)
        log_path           : epoch 로그(JSON lines) 경로
        progress           : stderr 진행 표시 여부

    Raises:
        ValidationError : 모드별 필수 입력 누락, 설정 오류
        DivergenceError : 손실이 유한하지 않게 된 경우
    """
    mode = TrainMode(train_cfg.mode)
    net_cfg = effective_net_config(mode, net_cfg)
    net_cfg.validate()
    train_cfg.validate(net_cfg.size_multiple)

    if len(images) == 0:
        raise ValidationError("training requires at least one image")
    if mode is TrainMode.PN2V and noise_model is None:
        raise ValidationError("pn2v training requires a noise model")
    if mode is TrainMode.SUPERVISED and clean is None:
        raise ValidationError("supervised training requires paired clean images")
    if mode is TrainMode.PN2V and noise_model_digest is None:
        noise_model_digest = _fallback_digest(noise_model)

    if val_images is None:
        images, clean, val_images, val_clean = split_validation(
            images, clean if mode is TrainMode.SUPERVISED else None, train_cfg.val_fraction, train_cfg.seed
        )
    elif mode is TrainMode.SUPERVISED and val_clean is None:
        raise ValidationError("supervised validation requires paired clean images")

    stats = compute_stats(images)
    train_stack = stack_inputs(images, stats, mode, clean)
    val_stack = stack_inputs(val_images, stats, mode, val_clean)

    val_rng = worker_stream(train_cfg.seed, VALIDATION_STREAM)
    val_batches = [make_batch(val_stack, train_cfg, stats, val_rng) for _ in range(train_cfg.val_batches)]

    torch.manual_seed(train_cfg.seed)
    net = init_network(net_cfg)
    optimizer = torch.optim.Adam(
        net.parameters(),
        lr=train_cfg.learning_rate,
        betas=TrainConfig.ADAM_BETAS,
        eps=TrainConfig.ADAM_EPS,
    )
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode="min", factor=train_cfg.plateau_factor, patience=train_cfg.patience
    )

    log_file = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log_file = open(log_path, "w", encoding="utf-8")

    logger.info(
        "🚀 [Trainer] 학습 시작: mode=%s, 이미지 %d장(검증 %d장), K=%d, epochs=%d",
        mode.value, len(images), len(val_images), net_cfg.out_channels, train_cfg.epochs,
    )

    history: list[EpochRecord] = []
    best_val = math.inf
    best_state = None
    best_epoch = 0

    try:
        with BatchProducer(train_stack, train_cfg, stats) as producer:
            epochs = tqdm(
                range(1, train_cfg.epochs + 1), desc="train", unit="epoch",
                file=sys.stderr, disable=not progress,
            )
            for epoch in epochs:
                lr = optimizer.param_groups[0]["lr"]
                net.train()
                total = 0.0
                for step in range(train_cfg.steps_per_epoch):
                    batch = producer.next_batch()
                    optimizer.zero_grad(set_to_none=True)
                    loss = batch_loss(net, batch, mode, stats, noise_model)
                    if not torch.isfinite(loss):
                        raise DivergenceError(
                            f"non-finite training loss {float(loss)} at epoch {epoch}, step {step + 1} "
                            f"(lr={lr:g}); try a smaller learning rate"
                        )
                    loss.backward()
                    optimizer.step()
                    total += float(loss)
                train_loss = total / train_cfg.steps_per_epoch

                val_loss = evaluate_loss(net, val_batches, mode, stats, noise_model)
                if not math.isfinite(val_loss):
                    raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
                scheduler.step(val_loss)

                record = EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss, lr=lr)
                history.append(record)
                if log_file is not None:
                    log_file.write(record.to_json() + "\n")
                    log_file.flush()

                if val_loss < best_val:
                    best_val, best_epoch = val_loss, epoch
                    best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}
                epochs.set_postfix(train=f"{train_loss:.4f}", val=f"{val_loss:.4f}")
                logger.debug(
                    "📈 [Trainer] epoch %d: train %.6f, val %.6f, lr %.2e",
                    epoch, train_loss, val_loss, lr,
                )
    finally:
        if log_file is not None:
            log_file.close()

    net.load_state_dict(best_state)
    checkpoint = Checkpoint.from_network(
        net,
        stats=stats,
        mode=mode,
        noise_model_digest=noise_model_digest if mode is TrainMode.PN2V else None,
        epoch=best_epoch,
        best_val=best_val,
        extra={"train_config": train_cfg.to_dict()},
    )
    logger.info("🏁 [Trainer] 학습 완료: 최저 검증 손실 %.6f (epoch %d)", best_val, best_epoch)
    return TrainResult(checkpoint=checkpoint, history=history)


def evaluate_loss(
    net: UNet,
    batches: Sequence[MaskedBatch],
    mode: TrainMode,
    stats: NormStats,
    noise_model: NoiseModel | None = None,
) -> float:
    """고정 배치들에 대한 평균 손실 (파라미터 변경 없음)."""
    net.eval()
    with torch.no_grad():
        losses = [float(batch_loss(net, b, mode, stats, noise_model)) for b in batches]
    return float(np.mean(losses))
