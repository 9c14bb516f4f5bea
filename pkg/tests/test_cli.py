import csv
import hashlib
import json

import pytest

from heislab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gromov_region_example(capsys, tmp_path):
    code, out, _ = run(capsys, "gromov-region", "--k", "2", "--gamma", "0.9", "--theta", "0.3", "--out", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and doc["region"] is True and doc["value"] == 0.1


def test_manifest_hashes_outputs(capsys, tmp_path):
    code, _, _ = run(capsys, "koranyi-dist", "--p", "1,0,0", "--q", "0,1,0", "--out", str(tmp_path))
    assert code == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "koranyi-dist"
    assert set(man["versions"]) == {"heislab", "python", "numpy", "scipy"}
    assert man["wall_time_s"] >= 0
    for entry in man["outputs"]:
        data = (tmp_path / entry["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    assert man["config"]["p"] == "1,0,0"


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 3, "gamma": 0.9, "theta": 0.3}))
    code, out, _ = run(capsys, "gromov-region", "--config", str(cfg), "--k", "2", "--out", str(tmp_path / "o"))
    doc = json.loads(out)
    assert code == 0 and doc["k"] == 2 and doc["region"] is True


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 2, "gamma": 0.9, "theta": 0.3, "bogus": 1}))
    code, out, err = run(capsys, "gromov-region", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code != 0 and out == ""
    doc = json.loads(err)
    assert doc["error"] == "ConfigError" and "bogus" in doc["message"]


def test_seed_required(capsys, tmp_path):
    code, _, err = run(capsys, "holder-fit", "--out", str(tmp_path))
    assert code != 0 and "seed" in json.loads(err)["message"]


def test_domain_errors_are_json(capsys, tmp_path):
    code, _, err = run(capsys, "gromov-region", "--k", "2", "--gamma", "0.4", "--theta", "0.3", "--out", str(tmp_path))
    assert code != 0 and json.loads(err)["error"] == "ApproximationError"
    code, _, err = run(capsys, "holder-fit", "--map", "nope", "--seed", "1", "--out", str(tmp_path))
    assert code != 0 and json.loads(err)["error"] == "GalleryError"
    code, _, err = run(capsys)
    assert code != 0 and json.loads(err)["error"] == "ConfigError"


def test_unwritable_out(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(capsys, "gallery-list", "--out", str(blocker / "sub"))
    assert code != 0 and json.loads(err)["error"] in ("FileExistsError", "NotADirectoryError", "ConfigError")


def test_threads_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("HEISLAB_THREADS", "3")
    run(capsys, "gallery-list", "--out", str(tmp_path))
    assert json.loads((tmp_path / "manifest.json").read_text())["config"]["threads"] == 3


def test_holder_fit_example(capsys, tmp_path):
    code, out, _ = run(capsys, "holder-fit", "--map", "identity_H1", "--metric", "koranyi", "--pairs", "10000",
                       "--seed", "7", "--out", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and 0.45 <= doc["gamma"] <= 0.55


def test_holder_fit_deterministic(capsys, tmp_path):
    args = ["holder-fit", "--map", "identity_H1", "--metric", "euclidean", "--pairs", "2000", "--seed", "5"]
    run(capsys, *args, "--out", str(tmp_path / "a"))
    run(capsys, *args, "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "holder_fit.json").read_bytes() == (tmp_path / "b" / "holder_fit.json").read_bytes()


def test_stokes_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "stokes-check", "--dim", "2", "--levels", "1,2,3", "--form", "x_dy", "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "stokes.csv")))
    assert [r["level"] for r in rows] == ["1", "2", "3"]
    # full-precision floats
    assert float(rows[0]["residual"]) == float(repr(float(rows[0]["residual"])))
    assert json.loads(out)["slopes"]["x_dy"] == pytest.approx(2.0, abs=0.3)


def test_linking_gauss_writes_curves(capsys, tmp_path):
    code, out, _ = run(capsys, "linking-gauss", "--link", "hopf", "--points", "256", "--out", str(tmp_path))
    assert code == 0 and abs(json.loads(out)["nearest_integer"]) == 1
    code, out, _ = run(capsys, "linking-gauss", "--curve-a", str(tmp_path / "curve_a.csv"),
                       "--curve-b", str(tmp_path / "curve_b.csv"), "--out", str(tmp_path / "again"))
    assert code == 0 and abs(json.loads(out)["nearest_integer"]) == 1


def test_lefschetz_and_mv(capsys, tmp_path):
    code, out, _ = run(capsys, "lefschetz", "--n", "2", "--seed", "1", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["reconstruction_exact"] is True
    code, out, _ = run(capsys, "mv-build", "--k", "0", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["integral"] == 2.0


@pytest.mark.slow
def test_hopf_example(capsys, tmp_path):
    code, out, _ = run(capsys, "hopf", "--map", "hopf_map", "--level", "4", "--out", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and abs(abs(doc["value"]) - 1) < 1e-2
    assert (tmp_path / "fiber_p_0.csv").exists()


def test_gallery_list(capsys, tmp_path):
    code, out, _ = run(capsys, "gallery-list", "--out", str(tmp_path))
    names = [d["name"] for d in json.loads(out)]
    assert code == 0 and "hopf_map" in names and "identity_H1" in names


def test_csv_bodies_byte_identical(capsys, tmp_path):
    args = ["mollify-rates", "--map", "figure_eight_polygon", "--resolution", "1024", "--eps", "0.2,0.1,0.05"]
    run(capsys, *args, "--out", str(tmp_path / "a"))
    run(capsys, *args, "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "rates.csv").read_bytes() == (tmp_path / "b" / "rates.csv").read_bytes()
