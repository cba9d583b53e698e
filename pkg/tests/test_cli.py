import csv
import logging

import pytest

from radar_aplanc import io
from radar_aplanc.cli import main

SCENE = "n_chirps = 1200\nsnr_min_db = 15\nsnr_max_db = 20\nval_fraction = 0.2\ntest_fraction = 0.4\n"
TRAIN = "epochs = 2\nhidden = 4\nkernel = 5\nn_layers = 1\nK = 2\nsub_len_s = 5\nlearning_rate = 1e-3\n"


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "scene.cfg").write_text(SCENE)
    (root / "train.cfg").write_text(TRAIN)
    assert main(["simulate", "--config", str(root / "scene.cfg"), "--out", str(root / "c"), "--count", "5"]) == 0
    return root


@pytest.fixture(scope="module")
def stage1(corpus):
    ck = corpus / "ck"
    code = main(["train", "--manifest", str(corpus / "c/manifest.txt"), "--stage", "1",
                 "--config", str(corpus / "train.cfg"), "--ckpt-dir", str(ck)])
    assert code == 0
    return ck


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestSimulate:
    def test_five_rows(self, corpus):
        entries = io.read_manifest(corpus / "c/manifest.txt")
        assert len(entries) == 5
        assert [e.split for e in entries] == ["train", "train", "val", "test", "test"]
        assert all(15 <= e.snr_db <= 20 for e in entries)
        assert all((corpus / "c" / e.path).exists() and (corpus / "c" / e.ragt_path).exists() for e in entries)

    def test_missing_config(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2
        assert "nope.cfg" in capsys.readouterr().err

    def test_bad_config_key(self, tmp_path):
        (tmp_path / "bad.cfg").write_text("warp_factor = 9\n")
        assert main(["simulate", "--config", str(tmp_path / "bad.cfg"), "--out", str(tmp_path)]) == 2

    def test_count_zero(self, tmp_path, caplog):
        with caplog.at_level(logging.WARNING):
            assert main(["simulate", "--out", str(tmp_path / "z"), "--count", "0"]) == 0
        assert io.read_manifest(tmp_path / "z/manifest.txt") == []
        assert any("count 0" in m for m in caplog.messages)

    def test_idempotent(self, corpus, tmp_path):
        assert main(["simulate", "--config", str(corpus / "scene.cfg"), "--out", str(tmp_path), "--count", "5"]) == 0
        for name in ("manifest.txt", "scene_0003.rapm", "scene_0003.ragt"):
            assert (tmp_path / name).read_bytes() == (corpus / "c" / name).read_bytes()

    def test_unwritable_output(self, tmp_path):
        (tmp_path / "file").write_text("")
        assert main(["simulate", "--out", str(tmp_path / "file" / "sub"), "--count", "1"]) == 3


class TestTraditional:
    def test_high_snr_report(self, corpus):
        report = corpus / "trad.csv"
        assert main(["traditional", "--manifest", str(corpus / "c/manifest.txt"), "--report", str(report)]) == 0
        agg = rows(report)[-1]
        assert agg["recording"] == "ALL"
        assert float(agg["mae_bpm"]) <= 1.5

    def test_low_snr_report(self, tmp_path):
        (tmp_path / "low.cfg").write_text("n_chirps = 2400\nsnr_db = -10\ntest_fraction = 1\nval_fraction = 0\ncorpus_seed = 3\n")
        assert main(["simulate", "--config", str(tmp_path / "low.cfg"), "--out", str(tmp_path / "c"), "--count", "6"]) == 0
        assert main(["traditional", "--manifest", str(tmp_path / "c/manifest.txt"), "--report", str(tmp_path / "r.csv")]) == 0
        assert float(rows(tmp_path / "r.csv")[-1]["mae_bpm"]) >= 5.0

    def test_empty_split(self, tmp_path, capsys):
        io.write_manifest(tmp_path / "m.txt", [io.ManifestEntry("a.rapm", 0, 70.0, 1.0, "train")])
        assert main(["traditional", "--manifest", str(tmp_path / "m.txt"), "--report", str(tmp_path / "r.csv")]) == 3
        assert "no recordings" in capsys.readouterr().err

    def test_unreadable_recordings_skipped(self, corpus, tmp_path, caplog):
        entries = io.read_manifest(corpus / "c/manifest.txt")
        tests = [e for e in entries if e.split == "test"]
        bad = io.ManifestEntry(str(tmp_path / "missing.rapm"), 0, 70.0, 1.0, "test")
        good = [io.ManifestEntry(str(corpus / "c" / e.path), e.seed, e.mean_hr_bpm, e.snr_db, "test") for e in tests]
        io.write_manifest(tmp_path / "m.txt", [bad] + good)
        with caplog.at_level(logging.WARNING):
            assert main(["traditional", "--manifest", str(tmp_path / "m.txt"), "--report", str(tmp_path / "r.csv")]) == 0
        assert any("missing.rapm" in m for m in caplog.messages)
        assert {r["recording"] for r in rows(tmp_path / "r.csv")} == {"scene_0003", "scene_0004", "ALL"}
        io.write_manifest(tmp_path / "m2.txt", [bad])
        assert main(["traditional", "--manifest", str(tmp_path / "m2.txt"), "--report", str(tmp_path / "r.csv")]) == 3


class TestTrain:
    def test_stage1_outputs(self, stage1):
        for name in ("stage1_gh.rapw", "stage1_gn.rapw", "stage1_metrics.csv"):
            assert (stage1 / name).exists()
        m = rows(stage1 / "stage1_metrics.csv")
        # 2 training recordings x 2 epochs, validation MAE on the last step of each epoch
        assert len(m) == 4 and [r["val_mae"] != "" for r in m] == [False, True, False, True]

    def test_stage2_requires_init(self, corpus, tmp_path, capsys):
        code = main(["train", "--manifest", str(corpus / "c/manifest.txt"), "--stage", "2",
                     "--config", str(corpus / "train.cfg"), "--ckpt-dir", str(tmp_path)])
        assert code == 2
        assert "stage-1" in capsys.readouterr().err

    def test_stage2_missing_checkpoints(self, corpus, tmp_path):
        code = main(["train", "--manifest", str(corpus / "c/manifest.txt"), "--stage", "2",
                     "--config", str(corpus / "train.cfg"), "--ckpt-dir", str(tmp_path), "--init-from", str(tmp_path)])
        assert code == 2

    def test_stage2_runs(self, corpus, stage1, tmp_path):
        code = main(["train", "--manifest", str(corpus / "c/manifest.txt"), "--stage", "2", "--epochs", "1",
                     "--config", str(corpus / "train.cfg"), "--ckpt-dir", str(tmp_path),
                     "--init-from", str(stage1 / "stage1_gh.rapw")])
        assert code == 0
        m = rows(tmp_path / "stage2_metrics.csv")
        assert all(sum(int(r[b]) for b in ("agree", "override", "fallback")) == 1 for r in m)

    def test_deterministic_metrics(self, corpus, stage1, tmp_path):
        code = main(["train", "--manifest", str(corpus / "c/manifest.txt"), "--stage", "1",
                     "--config", str(corpus / "train.cfg"), "--ckpt-dir", str(tmp_path)])
        assert code == 0
        for name in ("stage1_metrics.csv", "stage1_gh.rapw", "stage1_gn.rapw"):
            assert (tmp_path / name).read_bytes() == (stage1 / name).read_bytes()

    def test_bad_train_config(self, corpus, tmp_path):
        (tmp_path / "t.cfg").write_text("epochs = -1\n")
        code = main(["train", "--manifest", str(corpus / "c/manifest.txt"), "--stage", "1",
                     "--config", str(tmp_path / "t.cfg"), "--ckpt-dir", str(tmp_path)])
        assert code == 2


class TestEvalPlot:
    def test_eval_per_recording_rows(self, corpus, stage1):
        report = corpus / "eval.csv"
        code = main(["eval", "--manifest", str(corpus / "c/manifest.txt"), "--ckpt", str(stage1 / "stage1_gh.rapw"),
                     "--report", str(report), "--split", "train"])
        assert code == 0
        summary = [r for r in rows(report) if r["window"] == "all"]
        assert [r["recording"] for r in summary] == ["scene_0000", "scene_0001", "ALL"]
        assert all(r["mae_bpm"] not in ("", "nan") and r["rmse_bpm"] not in ("", "nan") for r in summary)

    def test_eval_corrupt_checkpoint(self, corpus, stage1, tmp_path, capsys):
        raw = (stage1 / "stage1_gh.rapw").read_bytes()
        (tmp_path / "bad.rapw").write_bytes(raw[: len(raw) // 2])
        code = main(["eval", "--manifest", str(corpus / "c/manifest.txt"), "--ckpt", str(tmp_path / "bad.rapw"),
                     "--report", str(tmp_path / "r.csv")])
        assert code == 3
        assert "offset" in capsys.readouterr().err

    def test_eval_missing_checkpoint(self, corpus, tmp_path):
        code = main(["eval", "--manifest", str(corpus / "c/manifest.txt"), "--ckpt", str(tmp_path / "none.rapw"),
                     "--report", str(tmp_path / "r.csv")])
        assert code == 3

    def test_plot_svg(self, corpus, tmp_path):
        report = tmp_path / "r.csv"
        (tmp_path / "all.cfg").write_text("n_chirps = 1200\ntest_fraction = 1\nval_fraction = 0\n")
        assert main(["simulate", "--config", str(tmp_path / "all.cfg"), "--out", str(tmp_path / "c"), "--count", "3"]) == 0
        assert main(["traditional", "--manifest", str(tmp_path / "c/manifest.txt"), "--report", str(report)]) == 0
        out = tmp_path / "fig.svg"
        assert main(["plot", "--report", str(report), "--out-svg", str(out)]) == 0
        text = out.read_text()
        assert out.stat().st_size > 0 and text.startswith("<?xml")
        assert "</svg>" in text

    def test_plot_missing_report(self, tmp_path):
        assert main(["plot", "--report", str(tmp_path / "none.csv"), "--out-svg", str(tmp_path / "f.svg")]) == 3


class TestUsage:
    def test_no_command(self):
        assert main([]) == 2

    @pytest.mark.parametrize("value", ["zero", "0", "-3"])
    def test_bad_thread_cap(self, monkeypatch, tmp_path, value, capsys):
        monkeypatch.setenv("RADAR_APLANC_THREADS", value)
        assert main(["simulate", "--out", str(tmp_path), "--count", "0"]) == 2
        assert "RADAR_APLANC_THREADS" in capsys.readouterr().err

    def test_thread_cap_applied(self, monkeypatch, tmp_path):
        from threadpoolctl import threadpool_info

        seen = {}

        def spy(args):
            seen["limits"] = [p["num_threads"] for p in threadpool_info()]
            return 0

        import radar_aplanc.cli as cli

        monkeypatch.setenv("RADAR_APLANC_THREADS", "1")
        args = cli.build_parser().parse_args(["simulate", "--out", str(tmp_path)])
        args.func = spy
        assert cli._dispatch(args) == 0
        assert seen["limits"] and all(n == 1 for n in seen["limits"])
