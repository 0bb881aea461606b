"""
checkpoint.py
=============
학습 결과 체크포인트 (.ckpt) 저장/로딩.

헤더 : version, mode, net_config, stats, noise_model_digest, epoch, best_val,
       tensors = [{name, shape}] (payload 순서)
payload : 파라미터 텐서를 tensors 순서대로 이어 붙인 little-endian float32
"""

import logging
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from core.container import decode_array, encode_array, file_digest, read_container, write_container
from core.errors import FormatError, ModeMismatchError, NoiseModelDigestWarning, ValidationError
from data.normalization import NormStats
from network.unet import UNet, UNetConfig
from training.config import TrainMode


logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "PN2V-CHECKPOINT"
CHECKPOINT_VERSION = 1
PARAM_DTYPE = "f4"


@dataclass
class Checkpoint:
    """
    학습된 네트워크 + 재현에 필요한 메타데이터.

    Attributes:
        net_config         : U-Net 설정
        state              : {파라미터 이름: float32 배열} (named_parameters 순서)
        stats              : 학습 데이터 표준화 통계
        mode               : 학습 모드
        noise_model_digest : 학습에 쓴 노이즈 모델 파일 sha256 (pn2v 일 때만)
        epoch              : 최고 검증 손실을 기록한 epoch (1부터)
        best_val           : 최고 검증 손실
    """
    net_config: UNetConfig
    state: "OrderedDict[str, np.ndarray]"
    stats: NormStats
    mode: TrainMode
    noise_model_digest: str | None = None
    epoch: int = 0
    best_val: float = math.inf
    version: int = CHECKPOINT_VERSION
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mode = TrainMode(self.mode)
        if (self.mode is TrainMode.PN2V) != (self.noise_model_digest is not None):
            raise ValidationError(
                f"noise_model_digest must be present iff mode is pn2v (mode={self.mode.value})"
            )
        _check_state(self.net_config, self.state)

    @classmethod
    def from_network(cls, net: UNet, **kwargs) -> "Checkpoint":
        state = OrderedDict(
            (name, p.detach().cpu().numpy().astype(np.float32, copy=True))
            for name, p in net.named_parameters()
        )
        return cls(net_config=net.config, state=state, **kwargs)

    def to_network(self) -> UNet:
        """저장된 파라미터를 담은 U-Net (eval 모드)."""
        net = UNet(self.net_config)
        net.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in self.state.items()})
        return net.eval()


def _expected_shapes(config: UNetConfig) -> "OrderedDict[str, tuple[int, ...]]":
    # meta 디바이스: 메모리 할당/난수 소비 없이 shape 만 얻는다
    with torch.device("meta"):
        template = UNet(config)
    return OrderedDict((name, tuple(p.shape)) for name, p in template.named_parameters())


def _check_state(config: UNetConfig, state: dict):
    expected = _expected_shapes(config)
    if list(state) != list(expected):
        missing = sorted(set(expected) - set(state))
        unexpected = sorted(set(state) - set(expected))
        raise FormatError(
            f"checkpoint parameters do not match network config "
            f"(missing {missing}, unexpected {unexpected})"
        )
    for name, shape in expected.items():
        if tuple(state[name].shape) != shape:
            raise FormatError(
                f"parameter '{name}' has shape {tuple(state[name].shape)}, expected {shape}"
            )


# ============================================================
#  저장 / 로딩
# ============================================================

def save_checkpoint(checkpoint: Checkpoint, path: str | Path):
    header = {
        "version": checkpoint.version,
        "mode": checkpoint.mode.value,
        "net_config": checkpoint.net_config.to_dict(),
        "stats": checkpoint.stats.to_dict(),
        "noise_model_digest": checkpoint.noise_model_digest,
        "epoch": int(checkpoint.epoch),
        "best_val": float(checkpoint.best_val) if math.isfinite(checkpoint.best_val) else None,
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in checkpoint.state.items()],
    }
    if checkpoint.extra:
        header["extra"] = checkpoint.extra
    payload = b"".join(encode_array(v, PARAM_DTYPE) for v in checkpoint.state.values())
    write_container(path, CHECKPOINT_MAGIC, header, payload)
    logger.info("💾 [Checkpoint] 저장 완료: %s (epoch %d)", path, checkpoint.epoch)


def load_checkpoint(path: str | Path) -> Checkpoint:
    """
    Raises:
        FormatError : 손상, 버전 불일치, 파라미터 shape 불일치
    """
    header, payload = read_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    try:
        config = UNetConfig.from_dict(header["net_config"])
        stats = NormStats(**header["stats"])
        specs = [(t["name"], tuple(int(d) for d in t["shape"])) for t in header["tensors"]]
        mode = TrainMode(header["mode"])
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise FormatError(f"{path}: corrupt checkpoint header ({e})") from e

    itemsize = np.dtype(PARAM_DTYPE).itemsize
    sizes = [int(np.prod(shape, dtype=np.int64)) * itemsize for _, shape in specs]
    if sum(sizes) != len(payload):
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, expected {sum(sizes)}")

    state = OrderedDict()
    offset = 0
    for (name, shape), size in zip(specs, sizes):
        state[name] = decode_array(payload[offset:offset + size], PARAM_DTYPE, shape, f"{path}:{name}")
        offset += size

    best_val = header.get("best_val")
    try:
        return Checkpoint(
            net_config=config,
            state=state,
            stats=stats,
            mode=mode,
            noise_model_digest=header.get("noise_model_digest"),
            epoch=int(header.get("epoch", 0)),
            best_val=math.inf if best_val is None else float(best_val),
            extra=header.get("extra", {}),
        )
    except ValidationError as e:
        raise FormatError(f"{path}: {e}") from e


# ============================================================
#  모드 / 노이즈 모델 확인
# ============================================================

def require_noise_model_mode(checkpoint: Checkpoint):
    """노이즈 모델이 필요한 추론(mmse/prior_mean) 에 pn2v 체크포인트인지 확인한다."""
    if checkpoint.mode is not TrainMode.PN2V:
        raise ModeMismatchError(
            f"mode mismatch: noise model required (checkpoint trained as {checkpoint.mode.value})"
        )


def verify_noise_model_digest(checkpoint: Checkpoint, noise_model_path: str | Path) -> bool:
    """
    체크포인트에 기록된 digest 와 실제 노이즈 모델 파일을 비교한다.
    다르면 NoiseModelDigestWarning 을 발생시키고 False 를 반환한다 (중단하지 않음).
    """
    actual = file_digest(noise_model_path)
    if checkpoint.noise_model_digest is None or checkpoint.noise_model_digest == actual:
        return True
    message = (
        f"noise model digest mismatch: checkpoint expects {checkpoint.noise_model_digest[:12]}…, "
        f"{noise_model_path} has {actual[:12]}…"
    )
    logger.warning("⚠️ [Checkpoint] %s", message)
    warnings.warn(message, NoiseModelDigestWarning, stacklevel=2)
    return False
