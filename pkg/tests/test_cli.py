import json

import numpy as np
import pytest

from lungmtl.cli import main
from lungmtl.metrics import history_load

pytestmark = pytest.mark.filterwarnings(
    "ignore::lungmtl.errors.ClassTooSmallWarning")


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Synthetic corpus + a run config small enough for fast training."""
    root = tmp_path_factory.mktemp("cli")
    assert run(["synth", "--out-dir", root / "corpus", "--n-per-class", "2",
                "--duration", "1.0", "--demographics", "50",
                "--seed", "9"]) == 0
    cfg = root / "run.json"
    cfg.write_text(json.dumps({
        "mfcc": {"n_coefficients": 10, "target_frames": 40},
        "train": {"epochs": 2, "batch_size": 4},
        "arch_id": "cnn2d_mtl",
    }))
    assert run(["--config", cfg, "extract",
                "--audio-dir", root / "corpus" / "audio",
                "--diagnosis-file", root / "corpus" / "diagnosis.csv",
                "--out", root / "feats.bin"]) == 0
    return root


class TestExtract:
    def test_rerun_is_byte_identical(self, workdir, capsys):
        assert run(["--config", workdir / "run.json", "extract",
                    "--audio-dir", workdir / "corpus" / "audio",
                    "--diagnosis-file", workdir / "corpus" / "diagnosis.csv",
                    "--out", workdir / "feats2.bin"]) == 0
        assert "8 feature matrices" in capsys.readouterr().out
        assert ((workdir / "feats.bin").read_bytes()
                == (workdir / "feats2.bin").read_bytes())

    def test_missing_audio_dir_fails(self, workdir, capsys):
        assert run(["extract", "--audio-dir", workdir / "nowhere",
                    "--diagnosis-file",
                    workdir / "corpus" / "diagnosis.csv",
                    "--out", workdir / "x.bin"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_required_flag_fails(self, workdir, capsys):
        assert run(["extract",
                    "--diagnosis-file", workdir / "corpus" / "diagnosis.csv",
                    "--out", workdir / "x.bin"]) == 1
        assert "audio-dir" in capsys.readouterr().err


class TestTrainEvalPredict:
    def test_full_round(self, workdir, capsys):
        args = ["--config", workdir / "run.json", "train",
                "--features", workdir / "feats.bin",
                "--checkpoint", workdir / "model.ckpt",
                "--history", workdir / "history.csv",
                "--train-ratio", "1.0"]
        assert run(args) == 0
        out = capsys.readouterr().out
        assert "trained cnn2d_mtl for 2 epochs" in out

        history_text = (workdir / "history.csv").read_text()
        assert history_text.startswith("# ")
        assert '"batch_size":4' in history_text.splitlines()[0]
        records = history_load(history_text)
        assert [r["epoch"] for r in records] == [1, 2]
        assert all(r["val_loss"] is None for r in records)

        # Same seed, fresh run: identical checkpoint and history bytes.
        assert run(["--config", workdir / "run.json", "train",
                    "--features", workdir / "feats.bin",
                    "--checkpoint", workdir / "model2.ckpt",
                    "--history", workdir / "history2.csv",
                    "--train-ratio", "1.0"]) == 0
        capsys.readouterr()
        assert ((workdir / "model.ckpt").read_bytes()
                == (workdir / "model2.ckpt").read_bytes())
        assert ((workdir / "history.csv").read_bytes()
                == (workdir / "history2.csv").read_bytes())

    def test_eval_writes_reports(self, workdir, capsys):
        assert run(["--config", workdir / "run.json", "eval",
                    "--features", workdir / "feats.bin",
                    "--checkpoint", workdir / "model.ckpt",
                    "--out-dir", workdir / "reports"]) == 0
        out = capsys.readouterr().out
        assert "== sound head ==" in out and "== disease head ==" in out
        for head in ("sound", "disease"):
            for kind in ("report", "confusion", "roc"):
                assert (workdir / "reports" / f"{head}_{kind}.csv").exists()
        report = (workdir / "reports" / "disease_report.csv").read_text()
        assert report.count("\n") >= 7  # 6 classes + header + summary rows

    def test_eval_fingerprint_mismatch(self, workdir, capsys):
        # Features re-extracted under the default MFCC config do not match
        # the checkpoint's fingerprint echo.
        assert run(["extract", "--audio-dir", workdir / "corpus" / "audio",
                    "--diagnosis-file", workdir / "corpus" / "diagnosis.csv",
                    "--out", workdir / "feats_default.bin"]) == 0
        assert run(["eval", "--features", workdir / "feats_default.bin",
                    "--checkpoint", workdir / "model.ckpt"]) == 1
        err = capsys.readouterr().err
        assert "error:" in err and "trained on features" in err

    def test_predict_single_file(self, workdir, capsys):
        wav = sorted((workdir / "corpus" / "audio").glob("*.wav"))[0]
        assert run(["--config", workdir / "run.json", "predict", wav,
                    "--checkpoint", workdir / "model.ckpt"]) == 0
        line = capsys.readouterr().out.strip()
        doc = json.loads(line)
        assert doc["sound"] in ("CRACKLES", "WHEEZES", "BOTH", "HEALTHY")
        assert len(doc["sound_probs"]) == 4
        assert len(doc["disease_probs"]) == 6
        assert abs(sum(doc["sound_probs"]) - 1.0) <= 1e-6
        assert abs(sum(doc["disease_probs"]) - 1.0) <= 1e-6

    def test_predict_missing_wav(self, workdir, capsys):
        assert run(["predict", workdir / "ghost.wav",
                    "--checkpoint", workdir / "model.ckpt"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_eval_missing_checkpoint(self, workdir, capsys):
        assert run(["--config", workdir / "run.json", "eval",
                    "--features", workdir / "feats.bin",
                    "--checkpoint", workdir / "ghost.ckpt"]) == 1
        assert "ghost.ckpt" in capsys.readouterr().err


class TestRiskVerb:
    def test_label_output(self, workdir, capsys):
        assert run(["risk", "label", "--demographics-file",
                    workdir / "corpus" / "demographics.csv"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("patient_id,")
        assert len(out) == 51  # header + 50 synthetic records (all age 35+)
        assert all(line.split(",")[4] in "0123" for line in out[1:])

    def test_label_excludes_under_35_with_warning(self, tmp_path, capsys):
        csv = tmp_path / "demo.csv"
        csv.write_text("patient_id,sex,age,adult_bmi,w,h\n"
                       "1,F,70.0,17.0,,\n2,M,20.0,25.0,,\n3,M,55.0,30.0,,\n")
        assert run(["risk", "label", "--demographics-file", csv]) == 0
        captured = capsys.readouterr()
        rows = captured.out.splitlines()[1:]
        assert len(rows) == 2
        assert rows[0].startswith("1,") and rows[1].startswith("3,")
        assert "age < 35" in captured.err and "[2]" in captured.err

    def test_fit_forest_deterministic(self, workdir, capsys):
        args = ["risk", "fit", "--demographics-file",
                workdir / "corpus" / "demographics.csv", "--model", "forest"]
        assert run(args) == 0
        first = capsys.readouterr().out
        assert run(args) == 0
        second = capsys.readouterr().out
        assert first == second
        assert "forest: 40 train / 10 test records" in first

    def test_fit_svm_reports_gamma(self, workdir, capsys):
        assert run(["risk", "fit", "--demographics-file",
                    workdir / "corpus" / "demographics.csv",
                    "--model", "svm"]) == 0
        assert "gamma=0.3333333333333333" in capsys.readouterr().out

    def test_fit_then_predict(self, workdir, capsys):
        assert run(["risk", "fit", "--demographics-file",
                    workdir / "corpus" / "demographics.csv",
                    "--model", "forest",
                    "--checkpoint", workdir / "risk.ckpt"]) == 0
        capsys.readouterr()
        assert run(["risk", "predict", "--demographics-file",
                    workdir / "corpus" / "demographics.csv",
                    "--checkpoint", workdir / "risk.ckpt"]) == 0
        out = capsys.readouterr().out
        rows = [ln for ln in out.splitlines() if ln and ln[0].isdigit()]
        assert len(rows) == 50
        assert "precision" in out  # report follows the per-record list


class TestParsing:
    def test_verb_required(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_bad_config_file_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"train": {"epoch": 1}}))
        assert run(["--config", cfg, "risk", "label",
                    "--demographics-file", "x.csv"]) == 1
        assert "unknown key train." in capsys.readouterr().err

    def test_global_flags_accepted_after_verb(self, tmp_path, capsys):
        assert run(["synth", "--out-dir", tmp_path / "c", "--n-per-class",
                    "1", "--seed", "3"]) == 0
        capsys.readouterr()
