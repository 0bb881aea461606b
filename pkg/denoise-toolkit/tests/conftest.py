"""
conftest.py
===========
테스트 공용 fixture.
"""

import numpy as np
import pytest
from scipy import stats

from data.normalization import NormStats
from network.unet import UNetConfig, init_network
from noise.noise_model import DENSITY_FLOOR, NoiseModel
from training.checkpoint import Checkpoint
from training.config import TrainMode


def gaussian_density(sigma: float, bins_s: int, bins_x: int, lo: float, hi: float) -> np.ndarray:
    """행 중심 s 에서 N(s, σ²) 를 열 bin 별로 적분한 밀도 (행 정규화 + floor)."""
    width = hi - lo
    centers = lo + (np.arange(bins_s) + 0.5) * width / bins_s
    edges = np.linspace(lo, hi, bins_x + 1)
    mass = stats.norm.cdf(edges[None, 1:], centers[:, None], sigma) - \
        stats.norm.cdf(edges[None, :-1], centers[:, None], sigma)
    mass = mass / mass.sum(axis=1, keepdims=True)
    density = mass / (width / bins_x)
    return density * (1.0 - DENSITY_FLOOR * width) + DENSITY_FLOOR


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def gaussian_model():
    """(σ, bins_s, bins_x, lo, hi) → 가우시안 히스토그램 노이즈 모델."""
    def factory(sigma=10.0, bins_s=256, bins_x=256, lo=0.0, hi=256.0) -> NoiseModel:
        return NoiseModel(density=gaussian_density(sigma, bins_s, bins_x, lo, hi), range_min=lo, range_max=hi)
    return factory


@pytest.fixture
def uniform_model():
    lo, hi, bins = 0.0, 256.0, 64
    return NoiseModel(density=np.full((bins, bins), 1.0 / (hi - lo)), range_min=lo, range_max=hi)


@pytest.fixture
def random_model(rng):
    """양의 난수 밀도를 행 정규화한 모델 (범위 [0, 100], 16×32)."""
    lo, hi, bins_s, bins_x = 0.0, 100.0, 16, 32
    raw = rng.uniform(0.2, 1.0, size=(bins_s, bins_x))
    density = raw / (raw.sum(axis=1, keepdims=True) * (hi - lo) / bins_x)
    return NoiseModel(density=density, range_min=lo, range_max=hi)


@pytest.fixture
def tiny_config():
    return UNetConfig(depth=1, in_channels=1, out_channels=3, base_features=2, seed=0)


@pytest.fixture
def make_checkpoint():
    """(config, mode, stats) → 학습 없이 초기화 파라미터로 만든 체크포인트."""
    def factory(config: UNetConfig, mode=TrainMode.PN2V, norm=NormStats(mean=100.0, std=25.0)) -> Checkpoint:
        mode = TrainMode(mode)
        return Checkpoint.from_network(
            init_network(config),
            stats=norm,
            mode=mode,
            noise_model_digest="0" * 64 if mode is TrainMode.PN2V else None,
            epoch=1,
            best_val=1.0,
        )
    return factory
