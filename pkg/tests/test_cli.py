import json
import math
import subprocess
import sys

import numpy as np
import pytest

from warplab.cli import SCENARIOS, bundled_config_text, main

PARABOLOID = """\
[scenario]
name = paraboloid

[ambient]
dim = 3
warping = space_form:0

[model]
dim = 2

[immersion]
chart = u1; u2; {z}
domain = -3:3, -3:3

[mesh]
resolution = 61, 61

[radii]
t_lo = 0.5
t_hi = 2.5
count = 9
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture(scope="module")
def plane_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("plane")
    cfg = d / "plane.cfg"
    cfg.write_text(bundled_config_text("plane"))
    code = main(["run", str(cfg), "--out", str(d / "out"), "--threads", "0"])
    return code, d / "out"


def test_run_plane_ok(plane_run):
    code, out = plane_run
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["curves.csv", "manifest.json", "mesh.txt", "verdicts.json"]
    header = (out / "curves.csv").read_text().splitlines()[0]
    assert header.startswith("t,")
    doc = json.loads((out / "verdicts.json").read_text())
    assert doc["scenario"]["ends"]["stabilized_count"] == 1
    assert all(v["passed"] is not False for v in doc["verdicts"])


def test_manifest_digests_reproduce(plane_run, tmp_path):
    import hashlib

    _, out = plane_run
    man = json.loads((out / "manifest.json").read_text())
    for name, digest in man["digests"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert man["versions"]["kernel_backend"] in ("cython", "python")
    assert man["threads"] >= 1
    echoed = write(tmp_path, "echo.cfg", man["config"]["effective"])
    assert main(["run", echoed, "--out", str(tmp_path / "again")]) == 0
    again = json.loads((tmp_path / "again" / "manifest.json").read_text())
    assert again["digests"] == man["digests"]


def test_verdict_failure_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "para.cfg", PARABOLOID.format(z="u1^2 + u2^2"))
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "FAIL monotone_f" in capsys.readouterr().out
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["exit_code"] == 1


def test_tolerance_override_flips_verdict(tmp_path):
    cfg = write(tmp_path, "para.cfg", PARABOLOID.format(z="u1^2 + u2^2"))
    args = ["run", cfg, "--out", str(tmp_path / "o")]
    for name in ("monotone_f", "isoperimetric", "volume_comparison"):
        args += ["--tolerance", f"{name}=1.0"]
    assert main(args) == 0
    doc = json.loads((tmp_path / "o" / "verdicts.json").read_text())
    assert doc["tolerances"]["monotone_f"] == 1.0


def test_numeric_failure_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "degen.cfg", PARABOLOID.format(z="0").replace("u1; u2;", "u1; u1;"))
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "degenerate" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["model-tables", "space_form:0", "-m", "3", "--grid", "5:1:3"],
        ["model-tables", "space_form:0", "-m", "3", "--grid", "1:5"],
        ["model-tables", "hyperbolic", "-m", "3", "--grid", "1:5:3"],
        ["examples", "emit", "unknown"],
        ["run", "/nonexistent/scenario.cfg"],
        ["run", "x.cfg", "--tolerance", "nope=1"],
        ["frobnicate"],
    ],
)
def test_config_error_exit_code(argv, capsys):
    assert main(argv) == 2


def test_dimension_rule_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "bad.cfg", PARABOLOID.format(z="0").replace("dim = 3", "dim = 2"))
    assert main(["run", cfg]) == 2
    assert "n > m >= 2" in capsys.readouterr().err


def read_table(text):
    lines = text.strip().splitlines()
    cols = lines[0].split(",")
    return {c: np.array([float(row.split(",")[i]) for row in lines[1:]]) for i, c in enumerate(cols)}


def test_model_tables_euclidean(capsys):
    assert main(["model-tables", "space_form:0", "-m", "3", "--grid", "1:5:5"]) == 0
    out = capsys.readouterr()
    tab = read_table(out.out)
    np.testing.assert_allclose(tab["r"], [1, 2, 3, 4, 5])
    np.testing.assert_allclose(tab["q_eta"], 1.0 / 3.0, rtol=1e-10)
    np.testing.assert_allclose(tab["volS"], 4 * math.pi * tab["r"] ** 2, rtol=1e-12)
    assert "balance:" in out.err


def test_model_tables_hyperbolic(capsys, tmp_path):
    assert main(["model-tables", "space_form:-1", "-m", "2", "--grid", "0.5:3:6", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    tab = read_table(out)
    np.testing.assert_allclose(tab["eta"], 1.0 / np.tanh(tab["r"]), rtol=1e-12)
    np.testing.assert_allclose(tab["Kw"], -1.0, rtol=1e-12)
    assert (tmp_path / "model_tables.csv").read_text() == out


def test_model_tables_custom(capsys):
    assert main(["model-tables", "custom:r + 0.1*r^3", "-m", "2", "--grid", "0.5:2:4"]) == 0
    out = capsys.readouterr()
    tab = read_table(out.out)
    np.testing.assert_allclose(tab["w1"], 1 + 0.3 * tab["r"] ** 2, rtol=1e-12)
    assert "balance: below_ok=" in out.err


def test_examples(capsys):
    assert main(["examples", "list"]) == 0
    assert capsys.readouterr().out.split() == list(SCENARIOS)
    assert main(["examples", "emit", "catenoid"]) == 0
    assert capsys.readouterr().out == bundled_config_text("catenoid")


def test_out_dir_precedence(tmp_path, monkeypatch):
    text = PARABOLOID.format(z="0.1*u1")
    cfg = write(tmp_path, "tilt.cfg", text)
    monkeypatch.setenv("WARPLAB_OUT", str(tmp_path / "env"))
    assert main(["run", cfg]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()
    cfg2 = write(tmp_path, "tilt2.cfg", text + f"\n[output]\ndirectory = {tmp_path / 'cfgdir'}\n")
    assert main(["run", cfg2]) == 0
    assert (tmp_path / "cfgdir" / "manifest.json").exists()
    assert main(["run", cfg2, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "manifest.json").exists()


def test_catenoid_two_ends(tmp_path):
    text = bundled_config_text("catenoid").replace("resolution = 400, 200", "resolution = 200, 100").replace("bins = 36", "bins = 18")
    cfg = write(tmp_path, "cat.cfg", text)
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "verdicts.json").read_text())
    assert doc["scenario"]["ends"]["stabilized_count"] == 2
    assert set(doc["curves"]["ends"]) == {2}


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "warplab.cli", "examples", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.split() == list(SCENARIOS)
