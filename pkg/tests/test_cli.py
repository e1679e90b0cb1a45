"""End-to-end command behavior: train, eval, sample, filters, cost."""

import os

import numpy as np
import pytest

from gbrbm.checkpoint import load_checkpoint, save_checkpoint
from gbrbm.cli import export_pgm, main, parse_config_text
from gbrbm.errors import ConfigError
from gbrbm.model import RbmParams, exact_log_partition
from gbrbm.sampling import RngStream
from gbrbm.training import TrainConfig, TrainState


SYNTH_CONFIG = """
# desk-scale synthetic run
n_hidden = 16
algorithm = cd
eta = 0.02
k = 2
batch_size = 100
epochs = 5
seed = 7
train = synth
synth_components = 4
synth_dims = 16
synth_samples = 500
synth_spread = 2.0
standardize = false
"""


def write_config(tmp_path, text=SYNTH_CONFIG, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_metrics(out_dir):
    lines = (out_dir / "metrics.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    return header, rows


class TestConfigGrammar:
    def test_comments_and_spacing(self):
        mapping = parse_config_text("a = 1 # trailing\n# full line\n\nb=2\n")
        assert mapping == {"a": "1", "b": "2"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key=value"):
            parse_config_text("just words\n")

    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path, SYNTH_CONFIG + "\nmomentum = 0.9\n")
        assert main(["train", str(cfg), "--out", str(tmp_path / "out")]) == 2

    def test_missing_n_hidden_rejected(self, tmp_path):
        cfg = write_config(tmp_path, "algorithm = cd\n")
        assert main(["train", str(cfg), "--out", str(tmp_path / "out")]) == 2


class TestTrainCommand:
    def test_metrics_rows_and_accounting(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["train", str(cfg), "--out", str(out)]) == 0
        header, rows = read_metrics(out)
        assert header == ["epoch", "atll", "atell", "wall_seconds", "update_count"]
        assert len(rows) == 5
        counts = [int(r["update_count"]) for r in rows]
        assert counts == sorted(counts) and len(set(counts)) == 5
        assert counts[-1] == 5 * (500 // 100)  # epochs * batches, one update each
        assert all(np.isfinite(float(r["atll"])) for r in rows)

    def test_same_seed_gives_identical_checkpoints(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["train", str(cfg), "--out", str(out1)]) == 0
        assert main(["train", str(cfg), "--out", str(out2)]) == 0
        assert ((out1 / "checkpoint-final.ckpt").read_bytes()
                == (out2 / "checkpoint-final.ckpt").read_bytes())

    def test_writes_stay_inside_out_dir(self, tmp_path, monkeypatch):
        workdir = tmp_path / "cwd"
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["train", str(cfg), "--out", str(out)]) == 0
        assert list(workdir.iterdir()) == []

    def test_divergence_aborts_with_status_3(self, tmp_path):
        text = SYNTH_CONFIG.replace("eta = 0.02", "eta = 50.0")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "out"
        assert main(["train", str(cfg), "--out", str(out)]) == 3

    def test_set_overrides(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        status = main(["train", str(cfg), "--out", str(out),
                       "--set", "epochs=2", "--set", "algorithm=sdcp",
                       "--set", "d=2", "--set", "k_prime=1"])
        assert status == 0
        _, rows = read_metrics(out)
        assert len(rows) == 2
        assert int(rows[-1]["update_count"]) == 2 * 5 * 2  # epochs * batches * d

    def test_checkpoint_cadence(self, tmp_path):
        cfg = write_config(tmp_path, SYNTH_CONFIG + "\ncheckpoint_every = 2\n")
        out = tmp_path / "out"
        assert main(["train", str(cfg), "--out", str(out)]) == 0
        names = sorted(p.name for p in out.glob("*.ckpt"))
        assert names == ["checkpoint-epoch0002.ckpt", "checkpoint-epoch0004.ckpt",
                         "checkpoint-final.ckpt"]

    def test_out_root_env_fallback(self, tmp_path, monkeypatch):
        root = tmp_path / "envroot"
        monkeypatch.setenv("GBRBM_OUT_ROOT", str(root))
        cfg = write_config(tmp_path, SYNTH_CONFIG.replace("epochs = 5", "epochs = 1"))
        assert main(["train", str(cfg)]) == 0
        assert (root / "metrics.csv").exists()


def make_zero_weight_checkpoint(tmp_path, m=4, n=3, seed=5):
    params = RbmParams.zeros(m, n)
    cfg = TrainConfig("cd", eta=0.05, batch_size=10, epochs=1, seed=seed)
    state = TrainState(params=params, rng=RngStream(seed), epoch=1, update_count=1)
    path = tmp_path / "zero.ckpt"
    save_checkpoint(path, state, cfg)
    return path, params


class TestEvalCommand:
    def test_missing_checkpoint(self, tmp_path, capsys):
        status = main(["eval", str(tmp_path / "nope.ckpt"), "--data", "x.csv"])
        assert status == 2

    def test_exact_matches_closed_form_for_zero_weights(self, tmp_path, capsys):
        path, params = make_zero_weight_checkpoint(tmp_path)
        data = tmp_path / "data.csv"
        rng = np.random.default_rng(0)
        x = rng.normal(size=(20, 4))
        data.write_text("\n".join(",".join(repr(v) for v in row) for row in x) + "\n")
        assert main(["eval", str(path), "--data", str(data), "--mode", "exact"]) == 0
        out = capsys.readouterr().out
        atll = float([l for l in out.splitlines() if l.startswith("atll=")][0].split("=")[1])
        expected = float(np.mean(-np.sum(x**2, axis=1) / 2)) - 2 * np.log(2 * np.pi)
        assert atll == pytest.approx(expected, abs=1e-9)

    def test_exact_and_ais_agree(self, tmp_path, capsys):
        path, _ = make_zero_weight_checkpoint(tmp_path)
        data = tmp_path / "data.csv"
        x = np.random.default_rng(1).normal(size=(10, 4))
        data.write_text("\n".join(",".join(repr(v) for v in row) for row in x) + "\n")
        results = {}
        for mode in ("exact", "ais"):
            assert main(["eval", str(path), "--data", str(data), "--mode", mode,
                         "--ais-particles", "50", "--ais-temps", "200"]) == 0
            out = capsys.readouterr().out
            results[mode] = float([l for l in out.splitlines()
                                   if l.startswith("atll=")][0].split("=")[1])
        assert abs(results["exact"] - results["ais"]) <= 0.5

    def test_exact_refused_beyond_guard(self, tmp_path, capsys):
        params = RbmParams.zeros(2, 21)
        cfg = TrainConfig("cd", eta=0.05, batch_size=10, epochs=1)
        state = TrainState(params=params, rng=RngStream(0))
        path = tmp_path / "big.ckpt"
        save_checkpoint(path, state, cfg)
        data = tmp_path / "d.csv"
        data.write_text("0.0,0.0\n")
        status = main(["eval", str(path), "--data", str(data), "--mode", "exact"])
        assert status == 4
        assert "ais" in capsys.readouterr().err


class TestSampleCommand:
    def test_writes_pgms_and_csv(self, tmp_path, capsys):
        path, _ = make_zero_weight_checkpoint(tmp_path)
        out = tmp_path / "samples"
        assert main(["sample", str(path), "--count", "4", "--out", str(out),
                     "--rows", "2", "--cols", "2"]) == 0
        assert "steps" in capsys.readouterr().out.replace("200", "steps")  # echoed
        pgms = sorted(p.name for p in out.glob("*.pgm"))
        assert pgms == [f"sample-{i:03d}.pgm" for i in range(4)]
        csv_rows = (out / "samples.csv").read_text().strip().splitlines()
        assert len(csv_rows) == 4 and len(csv_rows[0].split(",")) == 4

    def test_default_steps_echoed(self, tmp_path, capsys):
        path, _ = make_zero_weight_checkpoint(tmp_path)
        out = tmp_path / "s2"
        assert main(["sample", str(path), "--count", "1", "--out", str(out)]) == 0
        assert "200" in capsys.readouterr().out

    def test_fixed_seed_reproduces_files(self, tmp_path):
        path, _ = make_zero_weight_checkpoint(tmp_path)
        out1, out2 = tmp_path / "s3", tmp_path / "s4"
        for out in (out1, out2):
            assert main(["sample", str(path), "--count", "2", "--out", str(out),
                         "--seed", "33"]) == 0
        assert ((out1 / "sample-000.pgm").read_bytes()
                == (out2 / "sample-000.pgm").read_bytes())
        assert (out1 / "samples.csv").read_text() == (out2 / "samples.csv").read_text()


class TestFiltersCommand:
    def test_minmax_byte_mapping(self, tmp_path):
        params = RbmParams(np.array([[1.0], [2.0], [3.0], [4.0]]),
                           np.zeros(4), np.zeros(1), np.zeros(4))
        cfg = TrainConfig("cd", eta=0.05, batch_size=1, epochs=1)
        path = tmp_path / "f.ckpt"
        save_checkpoint(path, TrainState(params=params, rng=RngStream(0)), cfg)
        out = tmp_path / "filters"
        assert main(["filters", str(path), "--rows", "2", "--cols", "2",
                     "--out", str(out)]) == 0
        raw = (out / "filter-000.pgm").read_bytes()
        assert raw == b"P5\n2 2\n255\n" + bytes([0, 85, 170, 255])

    def test_shape_mismatch_is_config_error(self, tmp_path):
        path, _ = make_zero_weight_checkpoint(tmp_path)  # m = 4
        out = tmp_path / "filters"
        assert main(["filters", str(path), "--rows", "3", "--cols", "2",
                     "--out", str(out)]) == 2

    def test_one_file_per_hidden_unit(self, tmp_path):
        path, _ = make_zero_weight_checkpoint(tmp_path, m=4, n=3)
        out = tmp_path / "filters"
        assert main(["filters", str(path), "--rows", "2", "--cols", "2",
                     "--out", str(out)]) == 0
        assert len(list(out.glob("filter-*.pgm"))) == 3


class TestExportPgm:
    def test_constant_image_is_midgray(self, tmp_path):
        path = tmp_path / "c.pgm"
        export_pgm(np.full((2, 3), 7.5), path)
        assert path.read_bytes() == b"P5\n3 2\n255\n" + bytes([128] * 6)

    def test_header_format(self, tmp_path):
        path = tmp_path / "h.pgm"
        export_pgm(np.arange(6.0).reshape(2, 3), path)
        assert path.read_bytes().startswith(b"P5\n3 2\n255\n")


class TestCostCommand:
    def test_worked_example(self, capsys):
        assert main(["cost", "--k", "24", "--d", "4", "--k-prime", "6",
                     "--batch-size", "1"]) == 0
        out = capsys.readouterr().out
        assert "cd_cost=26.0" in out and "sdcp_cost=29.0" in out

    def test_degenerate_ratio_is_one(self, capsys):
        assert main(["cost", "--k", "8", "--d", "1", "--k-prime", "8",
                     "--batch-size", "10"]) == 0
        assert "ratio=1.0" in capsys.readouterr().out

    def test_zero_transition_cost_ratio(self, capsys):
        assert main(["cost", "--k", "12", "--d", "3", "--k-prime", "4",
                     "--batch-size", "5", "--l-grad", "0"]) == 0
        assert "ratio=1.0" in capsys.readouterr().out  # d k' / k = 1 here
