import copy

import numpy as np
import pytest
import torch

from conftest import make_bwe_corpus, micro_train_config
from revoice.data import build_manifest
from revoice.models.discriminators import DiscriminatorConfig
from revoice.training import (
    TrainingDiverged,
    create_state,
    load_checkpoint,
    load_generator,
    make_batch,
    save_checkpoint,
    train,
    train_step,
    validate,
)


@pytest.fixture
def micro_cfg():
    return micro_train_config(discriminator=DiscriminatorConfig(k=2))


@pytest.fixture
def corpus(tmp_path):
    root = tmp_path / "corpus"
    make_bwe_corpus(root, n_speakers=1, files_per_speaker=3, length=8192)
    return root


def random_batch(cfg, seed=0):
    g = torch.Generator().manual_seed(seed)
    x = torch.rand((cfg.batch_size, cfg.segment_length), generator=g) * 0.2 - 0.1
    y = torch.rand((cfg.batch_size, cfg.segment_length), generator=g) * 0.2 - 0.1
    return x, y


class TestTrainStep:
    def test_record_keys(self, micro_cfg):
        state = create_state(micro_cfg)
        record = train_step(state, random_batch(micro_cfg))
        assert record["step"] == 1
        for key in ("loss_d.0", "loss_d.1", "loss_g_adv", "loss_fm", "loss_mel",
                    "loss_g_total"):
            assert key in record

    def test_zero_lr_leaves_params_unchanged(self, micro_cfg):
        cfg = micro_train_config(
            discriminator=DiscriminatorConfig(k=2), lr_g=0.0, lr_d=0.0
        )
        state = create_state(cfg)
        before = copy.deepcopy(state.generator.state_dict())
        before_d = copy.deepcopy(state.discriminators.state_dict())
        train_step(state, random_batch(cfg))
        for key, value in state.generator.state_dict().items():
            assert torch.equal(value, before[key]), key
        for key, value in state.discriminators.state_dict().items():
            assert torch.equal(value, before_d[key]), key

    def test_discriminator_phase_does_not_move_generator(self, micro_cfg):
        cfg = micro_train_config(
            discriminator=DiscriminatorConfig(k=2), lr_g=0.0, lr_d=2e-4
        )
        state = create_state(cfg)
        before = copy.deepcopy(state.generator.state_dict())
        train_step(state, random_batch(cfg))
        for key, value in state.generator.state_dict().items():
            assert torch.equal(value, before[key]), key

    def test_all_discriminator_optimizers_advance(self, micro_cfg):
        state = create_state(micro_cfg)
        train_step(state, random_batch(micro_cfg))
        assert len(state.opt_d) == 2
        for opt in state.opt_d:
            assert any(s for s in opt.state.values())

    def test_nan_raises_diverged(self, micro_cfg):
        state = create_state(micro_cfg)
        with torch.no_grad():
            next(state.generator.parameters()).fill_(float("nan"))
        with pytest.raises(TrainingDiverged):
            train_step(state, random_batch(micro_cfg))


class TestBatchesAndValidation:
    def test_make_batch_shapes(self, micro_cfg, corpus):
        manifest = build_manifest(corpus, "bwe")
        state = create_state(micro_cfg)
        x, y = make_batch(state, manifest)
        assert x.shape == y.shape == (2, 2048)

    def test_validate_returns_metrics(self, micro_cfg, corpus):
        manifest = build_manifest(corpus, "bwe")
        state = create_state(micro_cfg)
        metrics = validate(state, manifest, max_clips=2)
        assert np.isfinite(metrics["val_mel"])
        assert np.isfinite(metrics["val_si_sdr"])


class TestCheckpoints:
    def test_save_load_round_trip(self, micro_cfg, tmp_path):
        state = create_state(micro_cfg)
        train_step(state, random_batch(micro_cfg))
        path = tmp_path / "ckpt.pt"
        save_checkpoint(state, path)
        payload = torch.load(path, map_location="cpu", weights_only=False)
        for key in ("config", "step", "g", "opt_g", "sched_g", "rng",
                    "d.0", "opt_d.0", "sched_d.0", "d.1", "opt_d.1", "sched_d.1"):
            assert key in payload
        restored = load_checkpoint(path, micro_cfg)
        assert restored.step == 1
        for key, value in restored.generator.state_dict().items():
            assert torch.equal(value, state.generator.state_dict()[key])

    def test_load_generator_round_trip(self, micro_cfg, tmp_path):
        state = create_state(micro_cfg)
        path = tmp_path / "ckpt.pt"
        save_checkpoint(state, path)
        generator, cfg = load_generator(path)
        assert cfg == micro_cfg
        x = torch.randn(1, 2048) * 0.1
        state.generator.eval()
        with torch.no_grad():
            assert torch.equal(generator(x), state.generator(x))


class TestTrainLoop:
    def test_writes_artifacts(self, micro_cfg, corpus, tmp_path):
        manifest = build_manifest(corpus, "bwe")
        out = tmp_path / "run"
        state, rows = train(micro_cfg, manifest, out)
        assert state.step == micro_cfg.total_steps
        assert (out / "config.txt").exists()
        assert (out / "train_log.csv").exists()
        assert (out / "loss_curves.png").exists()
        assert (out / "checkpoint_last.pt").exists()
        assert rows, "expected per-step log rows"
        for key in ("loss_g_adv", "loss_fm", "loss_mel", "loss_d.0", "loss_d.1"):
            assert key in rows[0]

    def test_deterministic_and_resumable(self, corpus, tmp_path, monkeypatch):
        monkeypatch.setenv("REVOICE_DETERMINISTIC", "1")
        cfg = micro_train_config(
            discriminator=DiscriminatorConfig(k=1), total_steps=4, checkpoint_every=2
        )
        manifest = build_manifest(corpus, "bwe")

        _, _ = train(cfg, manifest, tmp_path / "a")
        _, _ = train(cfg, manifest, tmp_path / "b")
        a = torch.load(tmp_path / "a" / "checkpoint_last.pt", weights_only=False)
        b = torch.load(tmp_path / "b" / "checkpoint_last.pt", weights_only=False)
        for key, value in a["g"].items():
            assert torch.equal(value, b["g"][key]), key

        # resume from the midpoint and land bitwise on the same endpoint
        _, _ = train(cfg, manifest, tmp_path / "c",
                     resume=tmp_path / "a" / "checkpoint_00000002.pt")
        c = torch.load(tmp_path / "c" / "checkpoint_last.pt", weights_only=False)
        for key, value in a["g"].items():
            assert torch.equal(value, c["g"][key]), key
        for i in range(cfg.discriminator.k):
            for key, value in a[f"d.{i}"].items():
                assert torch.equal(value, c[f"d.{i}"][key]), key
