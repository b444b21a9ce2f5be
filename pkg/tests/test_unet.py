import pytest
import torch

from lesionlab.gan.unet import UNetConfig, UNetGenerator, build_unet_nets


def _mask(b=2, res=64):
    m = torch.zeros(b, 1, res, res)
    m[:, :, 10:30, 20:44] = 1.0
    return m


class TestUNetGenerator:
    def test_resolution_preserved(self):
        for res in (32, 64, 128):
            torch.manual_seed(0)
            gen = UNetGenerator(res)
            out = gen(_mask(res=res), torch.randn(2, 1, res, res))
            assert out.shape == (2, 1, res, res)

    def test_output_range(self):
        torch.manual_seed(0)
        gen = UNetGenerator(64)
        out = gen(_mask(), torch.randn(2, 1, 64, 64))
        assert out.min().item() >= -1.0 and out.max().item() <= 1.0

    def test_noise_changes_output(self):
        torch.manual_seed(1)
        gen = UNetGenerator(64).eval()
        m = _mask()
        a = gen(m, torch.full((2, 1, 64, 64), 0.3))
        b = gen(m, torch.full((2, 1, 64, 64), -0.3))
        assert (a - b).abs().max().item() > 0.0

    def test_zero_mask_accepted(self):
        torch.manual_seed(0)
        gen = UNetGenerator(64)
        out = gen(torch.zeros(1, 1, 64, 64), torch.randn(1, 1, 64, 64))
        assert out.shape == (1, 1, 64, 64)

    def test_severed_skips_change_output_same_shape(self):
        torch.manual_seed(2)
        with_skips = UNetGenerator(64, UNetConfig(skip_connections=True)).eval()
        torch.manual_seed(2)
        without = UNetGenerator(64, UNetConfig(skip_connections=False)).eval()
        m, n = _mask(), torch.randn(2, 1, 64, 64)
        a, b = with_skips(m, n), without(m, n)
        assert a.shape == b.shape
        assert (a - b).abs().max().item() > 0.0

    def test_missing_noise_rejected(self):
        gen = UNetGenerator(64)
        with pytest.raises(ValueError):
            gen(_mask())

    def test_dropout_mode_needs_no_noise(self):
        torch.manual_seed(0)
        gen = UNetGenerator(64, UNetConfig(noise_mode="dropout"))
        out = gen(_mask())
        assert out.shape == (2, 1, 64, 64)


class TestUNetCritic:
    def test_scalar_scores(self):
        torch.manual_seed(0)
        _, critic = build_unet_nets(64)
        img = torch.rand(5, 1, 64, 64) * 2 - 1
        assert critic(img, _mask(5)).shape == (5,)

    def test_shape_mismatch_rejected(self):
        _, critic = build_unet_nets(64)
        with pytest.raises(ValueError):
            critic(torch.zeros(2, 1, 64, 64), torch.zeros(2, 1, 32, 32))


def test_depth_is_fixed():
    with pytest.raises(ValueError):
        UNetConfig(depth=3)
