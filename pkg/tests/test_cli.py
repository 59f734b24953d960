import json
import subprocess
import sys

import pytest

from degenfem.cli import main
from degenfem.mesh import load_mesh


def test_gen_uniform(tmp_path, capsys):
    out = tmp_path / "mesh.txt"
    assert main(["gen", "uniform", "--n", "8", "--out", str(out)]) == 0
    tri = load_mesh(out)
    assert tri.n_triangles == 128
    assert json.loads((tmp_path / "mesh.txt.meta.json").read_text()) == {}


def test_gen_ba_sidecar(tmp_path):
    out = tmp_path / "ba.txt"
    assert main(["gen", "ba", "--nx", "8", "--ny", "64", "--out", str(out)]) == 0
    meta = json.loads((tmp_path / "ba.txt.meta.json").read_text())
    assert len(meta["bands"]) == 64


def test_gen_band_sidecar(tmp_path):
    out = tmp_path / "band.txt"
    assert main(["gen", "band", "--nx", "8", "--hbar", "0.001953125",
                 "--out", str(out)]) == 0
    meta = json.loads((tmp_path / "band.txt.meta.json").read_text())
    assert len(meta["bands"]) == 1
    assert meta["bands"][0]["height_hbar"] == pytest.approx(1 / 512)
    assert meta["non_band_max_angle"] <= 0.75 * 3.14159266


def test_gen_invalid_parameters(tmp_path):
    code = main(["gen", "band", "--nx", "8", "--hbar", "0.5",
                 "--out", str(tmp_path / "x.txt")])
    assert code == 2


def test_solve_roundtrip(tmp_path, capsys):
    mesh_path = tmp_path / "m.txt"
    main(["gen", "uniform", "--n", "8", "--out", str(mesh_path)])
    capsys.readouterr()
    field_path = tmp_path / "f.txt"
    assert main(["solve", "--mesh", str(mesh_path), "--out", str(field_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["dofs"] == 49
    assert report["h1_error"] > 0
    lines = field_path.read_text().splitlines()
    assert lines[0] == "81"
    assert len(lines) == 82


def test_study_deterministic(tmp_path, capsys):
    args = ["study", "--family", "uniform", "--h", "1/4,1/8", "--out",
            str(tmp_path / "s")]
    assert main(args) == 0
    first = (tmp_path / "s.csv").read_bytes()
    capsys.readouterr()
    assert main(args) == 0
    assert (tmp_path / "s.csv").read_bytes() == first
    header = first.decode().splitlines()[0]
    assert header == "h,hbar,dofs,h1_error,h1_error_band,l2_gamma,a1,a2,nec_lhs,rate_running"
    summary = json.loads((tmp_path / "s.json").read_text())
    assert summary["fitted_rate"] == pytest.approx(1.0, abs=0.05)


def test_study_band_columns(tmp_path, capsys):
    assert main(["study", "--family", "single_band", "--h", "1/8,1/16",
                 "--beta", "3", "--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    rows = json.loads((tmp_path / "b.json").read_text())["rows"]
    assert all(r["nec_lhs"] > 0 for r in rows)
    assert all(r["a1"] + r["a2"] == pytest.approx(r["h1_error_band"]) for r in rows)


def test_study_usage_error(capsys):
    assert main(["study", "--family", "uniform", "--h", "1/8,1/4"]) == 2


def test_report_expectation(tmp_path, capsys):
    main(["study", "--family", "uniform", "--h", "1/4,1/8,1/16",
          "--out", str(tmp_path / "r")])
    capsys.readouterr()
    assert main(["report", "--study", str(tmp_path / "r.json"),
                 "--expect-rate", "1.0"]) == 0
    capsys.readouterr()
    assert main(["report", "--study", str(tmp_path / "r.json"),
                 "--expect-rate", "0.5", "--tol", "0.1"]) == 1


def test_verify_suites_pass(capsys):
    for suite in ("identities", "interp", "correction", "necessary"):
        assert main(["verify", suite]) == 0, suite
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out


def test_cli_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "degenfem.cli", "gen", "--help"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "--out" in proc.stdout


def test_unknown_args_exit_code():
    proc = subprocess.run(
        [sys.executable, "-m", "degenfem.cli", "study", "--nonsense"],
        capture_output=True, text=True)
    assert proc.returncode == 2
