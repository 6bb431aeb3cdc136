import json
import subprocess
import sys

import numpy as np
import pytest

from gravvortex import io
from gravvortex.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "mults, label",
    [((1, 1, 1), "Stable"), ((2, 2), "StrictlyPolystable"), ((3, 1), "Unstable"), ((2, 1, 1), "SemistableNotPolystable")],
)
def test_stability(capsys, mults, label):
    code, out, _ = run(capsys, "stability", "--preset", "equatorial", "--mults", *mults)
    assert code == EXIT_OK
    assert out.splitlines()[0] == label


def test_stability_bad_json(capsys):
    code, _, err = run(capsys, "stability", "--divisor", '{"points": [1, 2')
    assert code == EXIT_INPUT and "malformed" in err


def test_solve_rejections(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--preset", "antipodal", "--tau", 4, "--alpha", 0.01, "--out", tmp_path)
    assert code == EXIT_INPUT and "2N" in err
    code, _, err = run(capsys, "solve", "--preset", "antipodal", "--mults", 3, 1, "--tau", 10, "--alpha", 0.01, "--out", tmp_path)
    assert code == EXIT_INPUT and "polystable" in err
    code, _, _ = run(capsys, "solve", "--preset", "antipodal", "--tau", 6, "--alpha", 0.2, "--out", tmp_path)
    assert code == EXIT_INPUT


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", "--preset", "antipodal", "--tau", "6", "--alpha", str(1 / 24), "--out", str(out), "--name", "tps"])
    return code, out


def test_solve_writes_outputs(solved):
    code, out = solved
    assert code == EXIT_OK
    for name in ("tps.json", "tps_report.json", "tps_continuation.png"):
        assert (out / name).stat().st_size > 0
    rep = json.loads((out / "tps_report.json").read_text())
    assert rep["estimates"]["passed"] and rep["continuation"]["outcome"] == "reached"


def test_verify(capsys, solved, tmp_path):
    _, out = solved
    sol = out / "tps.json"
    code, text, _ = run(capsys, "verify", sol, "--report", tmp_path / "v.json")
    assert code == EXIT_OK and text.strip().endswith("PASS")
    assert json.loads((tmp_path / "v.json").read_text())["passed"]

    st = io.load_state(sol)
    bumped = st.copy_with(v=st.v + 1e-3)
    io.save_state(bumped, tmp_path / "bumped.json")
    code, text, _ = run(capsys, "verify", tmp_path / "bumped.json")
    assert code == EXIT_NUMERIC and "FAIL" in text

    d = json.loads(sol.read_text())
    d["alpha"] = 0.03
    (tmp_path / "alpha.json").write_text(json.dumps(d))
    assert run(capsys, "verify", tmp_path / "alpha.json")[0] == EXIT_NUMERIC

    d["version"] = 7
    (tmp_path / "version.json").write_text(json.dumps(d))
    assert run(capsys, "verify", tmp_path / "version.json")[0] == EXIT_INPUT


def test_profile_command(capsys, solved, tmp_path):
    _, out = solved
    csv = tmp_path / "prof" / "tps.csv"
    code, _, _ = run(capsys, "profile", out / "tps.json", csv)
    assert code == EXIT_OK
    assert csv.with_suffix(".png").stat().st_size > 0
    header = csv.read_text().splitlines()[0]
    assert header.startswith("#") and "S_g0 = 2" in header
    assert run(capsys, "profile", out / "missing.json", csv)[0] == EXIT_INPUT


def test_continue_direction_mismatch(capsys, solved, tmp_path):
    _, out = solved
    code, _, err = run(capsys, "continue", "--warm", out / "tps.json", "--to", 0.05, "--direction", "down", "--out", tmp_path)
    assert code == EXIT_INPUT and "direction" in err


def test_continue_down_from_warm_start(capsys, solved, tmp_path):
    _, out = solved
    code, text, _ = run(capsys, "continue", "--warm", out / "tps.json", "--to", 0.02, "--direction", "down", "--out", tmp_path)
    assert code == EXIT_OK and "outcome: reached" in text
    assert io.load_state(tmp_path / "solution.json").alpha == 0.02


def test_futaki_command(capsys):
    code, text, _ = run(capsys, "futaki", "--N", 3, "--ell", 1, "--tau", 8, "--alpha", 0.04, "--seed", 4)
    d = json.loads(text)
    assert code == EXIT_OK and abs(d["closed_form"] - 0.16 * np.pi) < 1e-15 and d["rel_diff"] < 1e-6
    assert run(capsys, "futaki", "--N", 3, "--ell", 3, "--tau", 8, "--alpha", 0.04)[0] == EXIT_INPUT


def test_futaki_from_solution(capsys, solved):
    _, out = solved
    code, text, _ = run(capsys, "futaki", "--N", 2, "--ell", 1, "--tau", 6, "--alpha", 1 / 24, "--pair", out / "tps.json")
    assert code == EXIT_OK and abs(json.loads(text)["quadrature"]) < 1e-8


def test_eigen_command(capsys, solved):
    code, text, _ = run(capsys, "eigen", "--phi-const", 0.3)
    assert code == EXIT_OK and abs(float(text.split("=")[1]) - 4 * np.exp(-0.3)) < 1e-8
    _, out = solved
    code, text, _ = run(capsys, "eigen", out / "tps.json")
    assert code == EXIT_OK and float(text.split("=")[1]) >= 1.0 - 1e-6


def test_console_entry_point_and_usage_errors(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gravvortex", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "stability" in r.stdout
    r = subprocess.run([sys.executable, "-m", "gravvortex", "solve", "--bogus"], capture_output=True, text=True)
    assert r.returncode == EXIT_INPUT


def test_output_dir_from_environment(monkeypatch, capsys, tmp_path):
    monkeypatch.setenv("GRAVVORTEX_OUTDIR", str(tmp_path / "env"))
    code, _, _ = run(capsys, "solve", "--preset", "equatorial", "--tau", 8, "--alpha", 0.005, "--L", 16, "--name", "ts")
    assert code == EXIT_OK
    assert (tmp_path / "env" / "ts.json").exists()
