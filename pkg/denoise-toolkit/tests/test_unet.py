from dataclasses import replace

import numpy as np
import pytest
import torch

from core.errors import ShapeError, ValidationError
from network.unet import (
    UNetConfig, backward, forward, init_network, parameter_count, receptive_field_radius,
)


class TestUNetConfig:

    def test_parameter_count_of_smallest_net(self):
        config = UNetConfig(depth=1, out_channels=1, base_features=1)
        assert parameter_count(init_network(config)) == 118

    @pytest.mark.parametrize("depth, radius", [(1, 9), (2, 23), (3, 51)])
    def test_receptive_field_radius(self, depth, radius):
        assert receptive_field_radius(UNetConfig(depth=depth)) == radius

    def test_full_scale(self):
        config = UNetConfig.full_scale(seed=3)
        assert (config.depth, config.out_channels, config.base_features, config.seed) == (3, 800, 64, 3)

    @pytest.mark.parametrize("kwargs", [
        {"depth": 0}, {"in_channels": 2}, {"out_channels": 0}, {"base_features": 0}, {"kernel_size": 4},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            UNetConfig(**kwargs).validate()

    def test_dict_round_trip(self, tiny_config):
        assert UNetConfig.from_dict(tiny_config.to_dict()) == tiny_config


class TestInitNetwork:

    def test_same_seed_identical(self, tiny_config):
        a, b = init_network(tiny_config).state_dict(), init_network(tiny_config).state_dict()
        for name in a:
            assert torch.equal(a[name], b[name])

    def test_seed_changes_weights(self, tiny_config):
        other = UNetConfig(**{**tiny_config.to_dict(), "seed": 1})
        a, b = init_network(tiny_config).state_dict(), init_network(other).state_dict()
        assert not torch.equal(a["head.weight"], b["head.weight"])

    def test_biases_zero(self, tiny_config):
        for name, value in init_network(tiny_config).named_parameters():
            if name.endswith("bias"):
                assert torch.count_nonzero(value) == 0

    def test_nearest_neighbor_upsampling(self):
        modules = list(init_network(UNetConfig(depth=3, out_channels=2, base_features=2)).modules())
        assert not any(isinstance(m, torch.nn.ConvTranspose2d) for m in modules)
        upsamplers = [m for m in modules if isinstance(m, torch.nn.Upsample)]
        assert upsamplers and all(m.mode == "nearest" and m.scale_factor == 2 for m in upsamplers)


class TestForwardBackward:

    def test_output_shape(self, tiny_config, rng):
        net = init_network(tiny_config)
        out = forward(net, rng.normal(size=(2, 1, 8, 12)))
        assert out.shape == (2, 3, 8, 12)
        assert out.dtype == torch.float32

    def test_forward_is_pure(self, tiny_config, rng):
        net = init_network(tiny_config)
        x = rng.normal(size=(1, 1, 8, 8))
        torch.testing.assert_close(forward(net, x), forward(net, x), rtol=0, atol=0)

    @pytest.mark.parametrize("shape", [(1, 1, 9, 8), (1, 2, 8, 8), (8, 8)])
    def test_bad_input_shape(self, tiny_config, shape):
        with pytest.raises(ShapeError):
            forward(init_network(tiny_config), np.zeros(shape))

    def test_backward_matches_autograd_sum(self, tiny_config, rng):
        net = init_network(tiny_config).double()
        x = torch.as_tensor(rng.normal(size=(2, 1, 8, 8)))
        grads = backward(net, x, torch.ones(2, 3, 8, 8, dtype=torch.float64))

        expected = torch.autograd.grad(net(x).sum(), list(net.parameters()))
        assert set(grads) == {name for name, _ in net.named_parameters()}
        for (name, _), reference in zip(net.named_parameters(), expected):
            torch.testing.assert_close(grads[name], reference)

    def test_backward_shape_mismatch(self, tiny_config):
        net = init_network(tiny_config)
        with pytest.raises(ShapeError, match="upstream gradient shape"):
            backward(net, np.zeros((1, 1, 8, 8)), torch.ones(1, 1, 8, 8))

    def test_output_pixel_ignores_inputs_beyond_radius(self, rng):
        config = UNetConfig(depth=2, out_channels=1, base_features=2)
        radius = receptive_field_radius(config)
        net = init_network(config).double()
        x = rng.normal(size=(1, 1, 96, 96))
        upstream = torch.zeros(1, 1, 96, 96, dtype=torch.float64)
        upstream[0, 0, 48, 48] = 1.0

        _, input_grad = backward(net, x, upstream, input_grad=True)
        outside = torch.ones(96, 96, dtype=torch.bool)
        outside[48 - radius:48 + radius + 1, 48 - radius:48 + radius + 1] = False
        assert torch.count_nonzero(input_grad[0, 0][outside]) == 0
        assert torch.count_nonzero(input_grad[0, 0][~outside]) > 0


class TestBackwardFiniteDifference:

    @pytest.mark.parametrize("seed", range(20))
    def test_parameter_gradients(self, seed, tiny_config):
        rng = np.random.default_rng(seed)
        net = init_network(replace(tiny_config, seed=seed)).double()
        x = torch.as_tensor(rng.normal(size=(1, 1, 8, 8)))
        upstream = torch.as_tensor(rng.normal(size=(1, 3, 8, 8)))
        grads = backward(net, x, upstream)

        def loss() -> float:
            return float((forward(net, x) * upstream).sum())

        params = dict(net.named_parameters())
        entries = [(name, i) for name, p in params.items() for i in range(p.numel())]
        # ReLU 꺾임점을 넘지 않도록 작은 step, 파라미터는 무작위 20개
        h = 1e-8
        for k in rng.choice(len(entries), size=20, replace=False):
            name, i = entries[k]
            flat = params[name].data.view(-1)
            original = flat[i].item()
            flat[i] = original + h
            plus = loss()
            flat[i] = original - h
            minus = loss()
            flat[i] = original
            numeric = (plus - minus) / (2 * h)
            assert float(grads[name].reshape(-1)[i]) == pytest.approx(numeric, rel=1e-4, abs=1e-5)

