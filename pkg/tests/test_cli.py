import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from usreg.cli import (EXIT_DEGENERATE, EXIT_DIMS, EXIT_INVALID, EXIT_IO, EXIT_MISSING, EXIT_USAGE,
                       main)
from usreg.volume import Volume3D, load_volume, save_volume


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    """A 48^3 phantom on a 0.56 mm grid and its ROI."""
    d = tmp_path_factory.mktemp("small")
    assert run("phantom", "--dims", 48, "--spacing", 0.56, "--speckle-sigma", 0, "--out", d) == 0
    assert run("segment", "--volume", d / "volume.json", "--dilate", 4, "--out", d) == 0
    return d


def test_phantom_writes_files_and_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("phantom", "--seed", 42, "--dims", 32, "--out", a) == 0
    assert run("phantom", "--seed", 42, "--dims", 32, "--out", b) == 0
    for name in ("volume.json", "volume.raw", "truth.json", "truth.raw", "phantom.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert json.loads((a / "volume.json").read_text())["dims"] == [32, 32, 32]
    assert json.loads((a / "config.json").read_text())["seed"] == 42


def test_phantom_dims_flag(tmp_path):
    assert run("phantom", "--dims", 64, "--out", tmp_path) == 0
    assert load_volume(tmp_path / "volume.json").dims == (64, 64, 64)


def test_invalid_band_ordering(tmp_path, capsys):
    assert run("phantom", "--tissue-mean", 0.95, "--dims", 8, "--out", tmp_path) == EXIT_INVALID
    assert "band ordering" in capsys.readouterr().err


def test_segment_prints_stats(small, capsys):
    assert run("segment", "--volume", small / "volume.json", "--out", small / "s") == 0
    assert "selected" in capsys.readouterr().out
    stats = json.loads((small / "s" / "roi_stats.json").read_text())
    assert 0 < stats["selected_fraction"] <= 1 and not stats["empty"]


def test_segment_constant_volume(tmp_path):
    save_volume(Volume3D(np.full((8, 8, 8), 0.5), (1, 1, 1)), tmp_path / "c.json")
    assert run("segment", "--volume", tmp_path / "c.json", "--out", tmp_path) == EXIT_DEGENERATE


def test_segment_dilation_monotone(small, tmp_path):
    for r in (0, 2):
        assert run("segment", "--volume", small / "volume.json", "--dilate", r, "--out", tmp_path / str(r)) == 0
    m0 = load_volume(tmp_path / "0" / "roi.json").data > 0.5
    m2 = load_volume(tmp_path / "2" / "roi.json").data > 0.5
    assert m0.any() and (m0 <= m2).all() and m2.sum() > m0.sum()


def test_register_and_track(small, tmp_path, capsys):
    common = ["--volume", small / "volume.json", "--roi", small / "roi.json"]
    assert run("register", *common, "--reference", "1,0.5,0,0,0,2", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "register.jsonl").read_text())
    assert rec["ncc"] > 0.95 and "success" in rec
    assert run("track", *common, "--frames", 3, "--drift", "0.5,0,0,0,0,0", "--out", tmp_path) == 0
    lines = (tmp_path / "track.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert "frames registered successfully" in capsys.readouterr().out


def test_missing_inputs_and_dims(small, tmp_path):
    assert run("register", "--out", tmp_path) == EXIT_MISSING
    assert run("register", "--volume", tmp_path / "nope.json", "--out", tmp_path) == EXIT_MISSING
    save_volume(Volume3D(np.zeros((5, 5, 5)), (1, 1, 1)), tmp_path / "other.json", dtype="u8")
    assert run("register", "--volume", small / "volume.json", "--roi", tmp_path / "other.json",
               "--out", tmp_path) == EXIT_DIMS
    (tmp_path / "broken.json").write_text("{")
    assert run("segment", "--volume", tmp_path / "broken.json", "--out", tmp_path) == EXIT_IO
    assert run("report", tmp_path / "nothing") == EXIT_MISSING


def test_usage_errors(small, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("evaluate", "--trials", 0)
    assert exc.value.code == EXIT_USAGE
    assert run("register", "--volume", small / "volume.json", "--roi", small / "roi.json",
               "--reference", "1,2", "--out", tmp_path) == EXIT_USAGE


def test_evaluate_and_report_all_success(small, tmp_path, capsys):
    out = tmp_path / "ev"
    assert run("evaluate", "--volume", small / "volume.json", "--roi", small / "roi.json",
               "--trials", 2, "--range-scale", 0, "--out", out) == 0
    capsys.readouterr()
    assert run("report", out) == 0
    text = capsys.readouterr().out
    assert "Success (%) 100.0" in text
    assert "Data Sets" in text and "Total Time (s)" in text
    assert "NCC in [0.95, 1] for 2/2" in text


def test_evaluate_is_deterministic(small, tmp_path):
    args = ["evaluate", "--volume", small / "volume.json", "--roi", small / "roi.json",
            "--trials", 3, "--seed", 7, "--range-scale", 0.3]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b", "--workers", 2) == 0

    def rows(d):
        with open(d / "trials.csv") as fh:
            return [r[:-1] for r in csv.reader(fh)]
    assert rows(tmp_path / "a") == rows(tmp_path / "b")


def test_config_file_and_flag_precedence(tmp_path, monkeypatch):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({"dims": 16, "seed": 3, "speckle_sigma": 0.1}))
    monkeypatch.setenv("USREG_OUT", str(tmp_path / "env"))
    assert run("phantom", "--config", cfgfile, "--seed", 9) == 0
    echo = json.loads((tmp_path / "env" / "config.json").read_text())
    assert echo["seed"] == 9 and echo["dims"] == 16 and echo["speckle_sigma"] == 0.1
    cfgfile.write_text(json.dumps({"bogus": 1}))
    assert run("phantom", "--config", cfgfile) == EXIT_USAGE


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "usreg", "phantom", "--dims", "8", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "volume.json").exists()
