"""Checkpoint container round trips, both text and binary."""

import numpy as np
import pytest

from gbrbm.checkpoint import BINARY_MAGIC, load_checkpoint, save_checkpoint
from gbrbm.errors import FormatError
from gbrbm.model import ModelDims
from gbrbm.sampling import RngStream
from gbrbm.data import synth_mixture
from gbrbm.training import TrainConfig, init_train_state, train_epoch

from helpers import make_params


def trained_state(seed=3):
    data = synth_mixture(2, 4, 30, 2.0, RngStream(1))
    cfg = TrainConfig("sdcp", eta=0.05, batch_size=10, epochs=2, seed=seed, d=2, k_prime=2)
    state = init_train_state(ModelDims(4, 3), data, cfg)
    for _ in range(cfg.epochs):
        state = train_epoch(state, data, cfg)
    return state, cfg


class TestTextCheckpoint:
    def test_save_load_save_is_byte_identical(self, tmp_path):
        state, cfg = trained_state()
        first = tmp_path / "a.ckpt"
        second = tmp_path / "b.ckpt"
        save_checkpoint(first, state, cfg)
        ckpt = load_checkpoint(first)
        save_checkpoint(second, ckpt.to_state(), ckpt.config)
        assert first.read_bytes() == second.read_bytes()

    def test_values_survive_round_trip(self, tmp_path):
        state, cfg = trained_state()
        path = tmp_path / "c.ckpt"
        save_checkpoint(path, state, cfg)
        ckpt = load_checkpoint(path)
        np.testing.assert_array_equal(ckpt.params.weights, state.params.weights)
        np.testing.assert_array_equal(ckpt.params.vbias, state.params.vbias)
        np.testing.assert_array_equal(ckpt.params.hbias, state.params.hbias)
        np.testing.assert_array_equal(ckpt.params.log_var, state.params.log_var)
        assert ckpt.epoch == state.epoch
        assert ckpt.update_count == state.update_count
        assert ckpt.config == cfg

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        data = synth_mixture(2, 4, 30, 2.0, RngStream(1))
        cfg = TrainConfig("cd", eta=0.05, batch_size=10, epochs=4, seed=8, k=2)
        full = init_train_state(ModelDims(4, 3), data, cfg)
        for _ in range(4):
            full = train_epoch(full, data, cfg)

        half = init_train_state(ModelDims(4, 3), data, cfg)
        for _ in range(2):
            half = train_epoch(half, data, cfg)
        path = tmp_path / "mid.ckpt"
        save_checkpoint(path, half, cfg)
        resumed = load_checkpoint(path).to_state()
        for _ in range(2):
            resumed = train_epoch(resumed, data, cfg)
        np.testing.assert_array_equal(resumed.params.weights, full.params.weights)
        assert resumed.update_count == full.update_count

    def test_missing_field_rejected(self, tmp_path):
        state, cfg = trained_state()
        path = tmp_path / "broken.ckpt"
        save_checkpoint(path, state, cfg)
        lines = [l for l in path.read_text().splitlines() if not l.startswith("vbias=")]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="vbias"):
            load_checkpoint(path)

    def test_unknown_blob_rejected(self, tmp_path):
        path = tmp_path / "noise.ckpt"
        path.write_bytes(b"\x00\x01\x02 not a checkpoint")
        with pytest.raises(FormatError):
            load_checkpoint(path)


class TestBinaryCheckpoint:
    def test_magic_header(self, tmp_path):
        state, cfg = trained_state()
        path = tmp_path / "bin.ckpt"
        save_checkpoint(path, state, cfg, binary=True)
        raw = path.read_bytes()
        assert raw[:16] == BINARY_MAGIC and len(BINARY_MAGIC) == 16

    def test_binary_round_trip(self, tmp_path):
        state, cfg = trained_state()
        first = tmp_path / "x.ckpt"
        second = tmp_path / "y.ckpt"
        save_checkpoint(first, state, cfg, binary=True)
        ckpt = load_checkpoint(first)
        save_checkpoint(second, ckpt.to_state(), ckpt.config, binary=True)
        assert first.read_bytes() == second.read_bytes()
        np.testing.assert_array_equal(ckpt.params.weights, state.params.weights)

    def test_text_and_binary_agree(self, tmp_path):
        state, cfg = trained_state()
        t_path, b_path = tmp_path / "t.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(t_path, state, cfg)
        save_checkpoint(b_path, state, cfg, binary=True)
        t, b = load_checkpoint(t_path), load_checkpoint(b_path)
        np.testing.assert_array_equal(t.params.weights, b.params.weights)
        assert t.config == b.config

    def test_truncation_detected(self, tmp_path):
        state, cfg = trained_state()
        path = tmp_path / "cut.ckpt"
        save_checkpoint(path, state, cfg, binary=True)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError, match="bytes"):
            load_checkpoint(path)


class TestExtremeValues:
    def test_tiny_and_huge_floats_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        params = make_params(rng, 3, 2)
        params = params.replace(weights=np.array([[1e-300, -1e300], [3.14159e-17, 0.1],
                                                  [-0.0, 2.0**53]]))
        cfg = TrainConfig("cd", eta=0.05, batch_size=1, epochs=1)
        state, _ = trained_state()
        state = state.advance(params, 0)
        path = tmp_path / "ext.ckpt"
        save_checkpoint(path, state, cfg)
        ckpt = load_checkpoint(path)
        np.testing.assert_array_equal(ckpt.params.weights, params.weights)
