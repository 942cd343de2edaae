import math

import numpy as np
import pytest
import torch

from conftest import micro_generator_config
from revoice.dsp import MelFilterbank, StftConfig, Waveform, mel_spectrogram, stft
from revoice.models.generator import (
    Generator,
    GeneratorConfig,
    SpectralMaskNet,
    SpectralUNet,
    Upsampler,
    UpsamplerConfig,
    WaveUNet,
)
from revoice.models.spectral_ops import TorchMel, TorchStft


class TestConfig:
    def test_upsample_rates_must_match_hop(self):
        with pytest.raises(ValueError, match="hop"):
            GeneratorConfig(
                upsampler=UpsamplerConfig(upsample_rates=(8, 8, 2), upsample_kernels=(16, 16, 4))
            )

    def test_default_rates_product_is_hop(self):
        cfg = GeneratorConfig()
        assert math.prod(cfg.upsampler.upsample_rates) == cfg.stft.hop == 256

    def test_length_multiple(self):
        assert GeneratorConfig().length_multiple == 256

    def test_stage_channels_halve(self):
        up = UpsamplerConfig(initial_channels=128)
        assert [up.stage_channels(i) for i in range(4)] == [64, 32, 16, 8]


class TestTorchSpectralOps:
    def test_stft_matches_numpy(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(8192)
        cfg = StftConfig()
        ref = stft(Waveform(x, 16000), cfg).bins
        got = TorchStft(cfg).transform(torch.from_numpy(x).reshape(1, 1, -1))[0, 0].numpy()
        np.testing.assert_allclose(got, ref, atol=1e-10)

    def test_istft_round_trip(self):
        rng = np.random.default_rng(1)
        x = torch.from_numpy(rng.standard_normal((2, 3, 4096)))
        op = TorchStft(StftConfig())
        rec = op.inverse(op.transform(x), 4096)
        assert torch.max(torch.abs(rec - x)) < 1e-10

    def test_mel_matches_numpy(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(8192) * 0.2
        cfg = StftConfig()
        fb = MelFilterbank(16000, cfg.n_fft)
        ref = mel_spectrogram(Waveform(x, 16000), fb, cfg).values
        got = TorchMel(fb, cfg)(torch.from_numpy(x).unsqueeze(0))[0].numpy()
        np.testing.assert_allclose(got, ref, atol=1e-8)


class TestSpectralUNet:
    def test_shape_preserved(self):
        net = SpectralUNet(GeneratorConfig())
        out = net(torch.randn(2, 80, 64))
        assert out.shape == (2, 80, 64)

    def test_golden_parameter_count(self):
        net = SpectralUNet(GeneratorConfig())  # widths (8, 16, 32, 64), depth 4
        assert sum(p.numel() for p in net.parameters()) == 404881

    def test_zero_output_layer_gives_residual(self):
        net = SpectralUNet(GeneratorConfig())
        with torch.no_grad():
            net.unet.out.weight.zero_()
            net.unet.out.bias.zero_()
        x = torch.randn(1, 80, 32)
        assert torch.equal(net(x), x)


class TestUpsampler:
    def test_output_length(self):
        cfg = GeneratorConfig()
        net = Upsampler(cfg)
        out = net(torch.randn(1, 80, 32))
        assert out.shape == (1, 8, 32 * 256)

    def test_zero_input_zero_biases_gives_zero(self):
        net = Upsampler(GeneratorConfig())
        with torch.no_grad():
            for p_name, p in net.named_parameters():
                if p_name.endswith("bias"):
                    p.zero_()
        out = net(torch.zeros(1, 80, 8))
        assert torch.all(out == 0)


class TestWaveUNet:
    def test_shape_contract(self):
        net = WaveUNet(GeneratorConfig(), in_channels=9)
        out = net(torch.randn(1, 9, 8192))
        assert out.shape == (1, 4, 8192)

    def test_golden_parameter_count(self):
        net = WaveUNet(GeneratorConfig(), in_channels=9)  # widths (10, 20, 40, 80)
        assert sum(p.numel() for p in net.parameters()) == 386334

    def test_rejects_non_multiple_length(self):
        net = WaveUNet(GeneratorConfig(), in_channels=9)
        with pytest.raises(ValueError, match="multiple"):
            net(torch.randn(1, 9, 1000))

    def test_linear_wiring_doubles(self, monkeypatch):
        # with activations bypassed and biases zeroed, the network is linear
        import revoice.models.unet as unet_mod

        monkeypatch.setattr(unet_mod.F, "leaky_relu", lambda x, *a, **k: x)
        net = WaveUNet(GeneratorConfig(), in_channels=9)
        with torch.no_grad():
            for p_name, p in net.named_parameters():
                if p_name.endswith("bias"):
                    p.zero_()
        x = torch.randn(1, 9, 2048, dtype=torch.float64)
        net = net.double()
        assert torch.allclose(net(2 * x), 2 * net(x), atol=1e-10)


class TestSpectralMaskNet:
    def _net_and_input(self):
        cfg = micro_generator_config()
        net = SpectralMaskNet(cfg, cfg.wave_unet_out_channels)
        x = torch.randn(2, cfg.wave_unet_out_channels, 4096)
        return net, x

    def test_identity_mask_equals_channel_sum(self):
        net, x = self._net_and_input()
        out = net(x, mask_override=1.0)
        ref = x.sum(dim=1)
        err = torch.linalg.norm(out - ref) / torch.linalg.norm(ref)
        assert err < 1e-5

    def test_phase_preserved_under_learned_mask(self):
        net, x = self._net_and_input()
        spec, masked = net.masked_spectrum(x)
        keep = torch.abs(spec) > 1e-8
        dphi = torch.angle(masked[keep]) - torch.angle(spec[keep])
        dphi = torch.remainder(dphi + math.pi, 2 * math.pi) - math.pi
        assert torch.max(torch.abs(dphi)) < 1e-6

    def test_phase_preserved_under_random_mask(self):
        net, x = self._net_and_input()
        spec = net.stft.transform(x)
        mask = torch.rand_like(spec.real) * 3.0 + 0.01
        _, masked = net.masked_spectrum(x, mask_override=mask)
        keep = torch.abs(spec) > 1e-8
        dphi = torch.angle(masked[keep]) - torch.angle(spec[keep])
        dphi = torch.remainder(dphi + math.pi, 2 * math.pi) - math.pi
        assert torch.max(torch.abs(dphi)) < 1e-6

    def test_zero_input_zero_output(self):
        net, x = self._net_and_input()
        out = net(torch.zeros_like(x))
        assert torch.all(out == 0)

    def test_rejects_non_hop_multiple(self):
        cfg = micro_generator_config()
        net = SpectralMaskNet(cfg, 2)
        with pytest.raises(ValueError, match="hop"):
            net(torch.randn(1, 2, 4000))


class TestGenerator:
    def test_length_preserved(self):
        gen = Generator(micro_generator_config())
        out = gen(torch.randn(2, 16384) * 0.1)
        assert out.shape == (2, 16384)

    def test_length_preserved_many_lengths(self):
        gen = Generator(micro_generator_config())
        gen.eval()
        for n in (1024, 1500, 2048, 3000, 4096, 5555, 8192, 9001, 12000, 16384):
            with torch.no_grad():
                out = gen(torch.randn(1, n) * 0.1)
            assert out.shape == (1, n)

    def test_deterministic_under_seed(self):
        x = torch.randn(1, 4096) * 0.1
        outs = []
        for _ in range(2):
            torch.manual_seed(123)
            gen = Generator(micro_generator_config())
            gen.eval()
            with torch.no_grad():
                outs.append(gen(x))
        assert torch.equal(outs[0], outs[1])

    def test_default_parameter_budget(self):
        gen = Generator(GeneratorConfig())
        assert 1_500_000 <= gen.num_parameters() <= 2_000_000

    def test_no_nan_in_outputs_or_gradients(self):
        gen = Generator(micro_generator_config())
        x = torch.rand(2, 2048) * 2 - 1
        out = gen(x)
        assert torch.all(torch.isfinite(out))
        out.square().mean().backward()
        for p in gen.parameters():
            assert p.grad is None or torch.all(torch.isfinite(p.grad))

    def test_gradient_matches_finite_differences(self):
        # spot check on a few parameters; the full 20-parameter sweep runs in
        # the acceptance suite
        torch.manual_seed(7)
        gen = Generator(micro_generator_config()).double()
        x = torch.randn(1, 2048, dtype=torch.float64) * 0.1
        target = torch.randn(1, 2048, dtype=torch.float64) * 0.1

        def loss():
            return torch.mean(torch.abs(gen(x) - target))

        value = loss()
        value.backward()
        params = [p for p in gen.parameters() if p.grad is not None and p.numel() > 0]
        rng = np.random.default_rng(0)
        for p in [params[i] for i in rng.choice(len(params), 5, replace=False)]:
            idx = tuple(rng.integers(0, s) for s in p.shape)
            analytic = float(p.grad[idx])
            eps = 1e-6
            with torch.no_grad():
                p[idx] += eps
                hi = float(loss())
                p[idx] -= 2 * eps
                lo = float(loss())
                p[idx] += eps
            fd = (hi - lo) / (2 * eps)
            denom = max(abs(analytic), abs(fd), 1e-8)
            assert abs(analytic - fd) / denom < 1e-3

    def test_masknet_disabled_sums_channels(self):
        cfg = micro_generator_config(use_spectral_masknet=False)
        gen = Generator(cfg)
        out = gen(torch.randn(1, 2048) * 0.1)
        assert out.shape == (1, 2048)

    def test_rejects_bad_input_rank(self):
        gen = Generator(micro_generator_config())
        with pytest.raises(ValueError, match="batch"):
            gen(torch.randn(2048))
