import csv
import json
import re

import numpy as np
import pytest

from stylusnorm import calib, dataio, stylus
from stylusnorm.calib import INK_LOG, PLASTIC_ELLIPSE
from stylusnorm.cli import main, read_config

SMALL_CFG = """\
seed = 3
n_users = 6
n_train = 3
n_test = 2
n_samples_mean = 120
bits = 3
"""


def _calibration_csv(path, model, nib_mm, n=20):
    w = np.linspace(0, 1024, n)
    force = model.physical(w) * calib.nib_surface(nib_mm)
    pts = [calib.CalibrationPoint(f / calib.GRAVITY * 1000, x) for f, x in zip(force, w)]
    path.write_text(calib.write_calibration_csv(pts))
    return path


def _printed(out, key):
    return float(re.search(rf"^{key} = (\S+)", out, re.M).group(1))


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CFG + f"out = {tmp_path / 'out'}\n")
    return path


class TestFit:
    def test_log_round_trip(self, tmp_path, capsys):
        data = _calibration_csv(tmp_path / "ink.csv", INK_LOG, 0.319)
        prof = tmp_path / "ink.profile"
        assert main(["fit", str(data), "--family", "log", "--nib-diameter", "0.319", "-o", str(prof)]) == 0
        out = capsys.readouterr().out
        for key, ref in (("A1", 1148.6344), ("A2", 0.0468), ("F1", 21.5761)):
            assert abs(_printed(out, key) / ref - 1) < 1e-3
        fitted = stylus.load_profile(str(prof))
        assert fitted.model_kind == "log"
        assert fitted.physical_max == pytest.approx(stylus.INK.physical_max, rel=1e-3)

    def test_malformed_csv(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("mass_g,raw_level\n10,20\n10,twenty\n")
        assert main(["fit", str(bad), "--family", "log", "--nib-diameter", "0.3"]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_model_selection(self, tmp_path, capsys):
        # log fits ellipse data worse than the ellipse family does
        data = _calibration_csv(tmp_path / "plastic.csv", PLASTIC_ELLIPSE, 0.45)
        assert main(["fit", str(data), "--family", "ellipse", "--nib-diameter", "0.45"]) == 0
        r2_ellipse = _printed(capsys.readouterr().out, r"R\^2")
        assert main(["fit", str(data), "--family", "log", "--nib-diameter", "0.45"]) == 0
        r2_log = _printed(capsys.readouterr().out, r"R\^2")
        assert r2_log < r2_ellipse

    def test_ellipse_on_log_data(self, tmp_path, capsys):
        # the least-squares ellipse for log data runs off to r1 -> infinity
        data = _calibration_csv(tmp_path / "ink.csv", INK_LOG, 0.319)
        assert main(["fit", str(data), "--family", "ellipse", "--nib-diameter", "0.319"]) == 1
        assert "error" in capsys.readouterr().err

    def test_poly6(self, tmp_path, capsys):
        data = _calibration_csv(tmp_path / "ink.csv", INK_LOG, 0.319)
        assert main(["fit", str(data), "--family", "poly6", "--nib-diameter", "0.319"]) == 0
        assert _printed(capsys.readouterr().out, r"R\^2") > 0.999


class TestProfileAndMap:
    def test_show(self, capsys):
        assert main(["profile", "show", "plastic"]) == 0
        out = capsys.readouterr().out
        assert "model=ellipse" in out and "pressure_weight[published] = 40.9600" in out

    def _write(self, folder, pressures):
        folder.mkdir()
        sig = dataio.Signature("u1", "s1", np.arange(len(pressures), dtype=float), np.column_stack(
            [np.full(len(pressures), 100.0), np.full(len(pressures), 200.0), pressures,
             np.full(len(pressures), 1800.0), np.full(len(pressures), 600.0)]))
        dataio.write_signature_file(folder / "a.sig", sig)
        return sig

    def test_ink_to_ink(self, tmp_path, capsys):
        sig = self._write(tmp_path / "in", [0.0, 200, 512, 900, 0])
        assert main(["map", "--src", "ink", "--dst", "ink", str(tmp_path / "in"), str(tmp_path / "out")]) == 0
        out = dataio.read_signature_file(tmp_path / "out" / "a.sig")
        np.testing.assert_array_equal(out.features, sig.features)

    def test_ink_to_plastic_clamps(self, tmp_path, capsys):
        self._write(tmp_path / "in", [0.0, 512, 1000, 1000, 0])
        assert main(["map", "--src", "ink", "--dst", "plastic", str(tmp_path / "in"), str(tmp_path / "out")]) == 0
        assert "clamped=2" in capsys.readouterr().out
        out = dataio.read_signature_file(tmp_path / "out" / "a.sig")
        assert out.pressure.tolist() == [0, 816, 1024, 1024, 0]

    def test_bad_file_continues(self, tmp_path, capsys):
        self._write(tmp_path / "in", [0.0, 10, 0])
        (tmp_path / "in" / "b.sig").write_text("#SIG v1 user=u session=s kind=genuine rate=100\n0 1 2\n")
        assert main(["map", "--src", "ink", "--dst", "plastic", str(tmp_path / "in"), str(tmp_path / "out")]) == 1
        assert (tmp_path / "out" / "a.sig").exists()
        assert "b.sig" in capsys.readouterr().err

    def test_missing_profile(self, tmp_path):
        (tmp_path / "in").mkdir()
        code = main(["map", "--src", str(tmp_path / "none.txt"), "--dst", "plastic", str(tmp_path / "in"), str(tmp_path / "o")])
        assert code == 2


class TestConfig:
    def test_read(self, small_cfg):
        cfg = read_config(small_cfg)
        assert (cfg.seed, cfg.n_users, cfg.bits, cfg.weight_mode) == (3, 6, 3, "published")

    def test_bad_entries(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("bits = six\n")
        assert main(["scenario", "--config", str(bad)]) == 2
        bad.write_text("colour = red\n")
        assert main(["scenario", "--config", str(bad)]) == 2

    def test_demo_config_parses(self):
        from pathlib import Path

        cfg = read_config(Path(__file__).parent.parent / "configs" / "demo.cfg")
        assert (cfg.seed, cfg.n_users, cfg.bits, cfg.sweep) == (7, 50, 6, "0,25,50,75,100")

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["scenario", "--frobnicate"])
        assert exc.value.code == 2

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["scenario", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--config", "--seed", "--bits", "--sections", "--weight-mode", "--scenarios", "--forgery", "--sweep"):
            assert flag in out


class TestScenarioCommand:
    def test_three_rows(self, small_cfg, tmp_path):
        assert main(["scenario", "--config", str(small_cfg), "--scenarios", "1,4,6", "--forgery", "random"]) == 0
        with open(tmp_path / "out" / "results.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["scenario"] for r in rows] == ["1", "4", "6"]
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 3
        assert manifest["pressure_weights"]["plastic"] == pytest.approx(40.96)
        assert (tmp_path / "out" / "det_6_random.svg").exists()

    def test_sweep(self, small_cfg, tmp_path):
        assert main(["scenario", "--config", str(small_cfg), "--scenarios", "1", "--sweep", "0,25,50,75,100"]) == 0
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        assert len(lines) == 1 + 5

    def test_byte_identical(self, small_cfg, tmp_path):
        outputs = []
        for _ in range(2):
            assert main(["scenario", "--config", str(small_cfg), "--scenarios", "1,5,7", "--sweep", "0,100"]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted((tmp_path / "out").iterdir())})
        assert outputs[0] == outputs[1]
        assert {"results.csv", "summary.csv", "sweep.csv", "manifest.json", "det_all_random.svg"} <= set(outputs[0])

    def test_skilled_without_forgeries(self, small_cfg):
        assert main(["scenario", "--config", str(small_cfg), "--forgery", "skilled"]) == 2

    def test_unknown_scenario(self, small_cfg):
        assert main(["scenario", "--config", str(small_cfg), "--scenarios", "9"]) == 2


class TestWorkflow:
    def test_synth_train_identify_verify(self, tmp_path, capsys):
        db = tmp_path / "db"
        assert main(["synth", "--users", "4", "--train", "3", "--test", "1", "--samples", "100", "--seed", "2", str(db)]) == 0
        models = tmp_path / "models"
        assert main(["train", str(db), "-o", str(models), "--bits", "3", "--normalize", "ink"]) == 0
        capsys.readouterr()
        probe = db / "u002" / "test" / "01.sig"
        assert main(["identify", str(models), str(probe), "--normalize", "ink"]) == 0
        assert capsys.readouterr().out.strip().endswith("u002")
        assert main(["verify", str(models), str(probe), "--user", "u002", "--threshold", "1e9", "--normalize", "ink"]) == 0
        assert capsys.readouterr().out.strip().endswith("accept")
        assert main(["verify", str(models), str(probe), "--user", "nobody", "--threshold", "1"]) == 2

    def test_sweep_command(self, small_cfg, tmp_path):
        assert main(["sweep", "--config", str(small_cfg), "--fractions", "0,50,100"]) == 0
        assert len((tmp_path / "out" / "sweep.csv").read_text().splitlines()) == 4

    def test_det(self, tmp_path, capsys):
        scores = tmp_path / "s.csv"
        scores.write_text("label,score\ngenuine,1\ngenuine,3\nimpostor,2\nimpostor,4\n")
        assert main(["det", str(scores), "-o", str(tmp_path / "det")]) == 0
        out = capsys.readouterr().out
        assert "min DCF = 25.00%" in out and "EER = 50.00%" in out
        assert (tmp_path / "det.svg").exists() and (tmp_path / "det.csv").exists()
        scores.write_text("label,score\ngenuine,1\n")
        assert main(["det", str(scores), "-o", str(tmp_path / "det")]) == 2
