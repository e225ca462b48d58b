import json
import math
import subprocess
import sys

import pytest

from critlab.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_green_line_matches_closed_form(capsys):
    code, out, _ = run(["green", "--model", "lattice", "--d", "1", "--radius", "60",
                        "--alpha", "1", "--no-exhaust"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "critlab/1"
    assert doc["config"]["params"]["alpha"] == 1
    res = doc["result"]
    vals = dict(zip((c[0] for c in res["coords"]), res["values"]))
    ratio = (3 - math.sqrt(5)) / 2
    for n in (0, 3, 10):
        assert vals[n] == pytest.approx(ratio**n / math.sqrt(5), rel=1e-12)


def test_verify_lemmas_clean(capsys):
    code, out, _ = run(["verify-lemmas", "--d-max", "2", "--radius", "5"], capsys)
    assert code == 0
    assert json.loads(out)["result"]["violations"] == 0


def test_landis_violation_exit_code(capsys):
    code, out, _ = run(["landis", "--theorem", "4.1", "--model", "lattice", "--d", "1",
                        "--radius", "60", "--u", "sharpness"], capsys)
    assert code == 2
    res = json.loads(out)["result"]
    assert res["violated"] == ["liminf"]
    assert res["theorem_id"] == "lattice"


@pytest.mark.parametrize("argv", [
    ["green", "--model", "lattice", "--d", "1", "--alpha", "-1"],
    ["green", "--model", "lattice"],
    ["green", "--bogus"],
    ["landis", "--theorem", "7.7", "--model", "lattice", "--d", "1"],
])
def test_bad_config_single_line(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1
    assert out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1
    assert set(json.loads(lines[0])) == {"error", "message"}


def test_config_file_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"alpha": 0.5}, "model": {"radius": 20}}))
    code, out, _ = run(["green", "--model", "lattice", "--d", "1", "--radius", "50",
                        "--alpha", "1", "--no-exhaust", "--config", str(cfg)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["params"]["alpha"] == 0.5
    assert doc["config"]["model"]["radius"] == 20
    assert doc["config"]["model"]["d"] == 1


def test_csv_output(tmp_path, capsys):
    path = tmp_path / "g.csv"
    code, out, _ = run(["green", "--model", "lattice", "--d", "1", "--radius", "4",
                        "--alpha", "1", "--no-exhaust", "--format", "csv", "-o", str(path)],
                       capsys)
    assert code == 0 and out == ""
    rows = path.read_text().splitlines()
    assert rows[0] == "x0,value,boundary"
    assert len(rows) == 10


def test_reruns_are_identical():
    for cmd in (["norm", "--a", "0.5", "--x", "3,1,2"],
                ["green", "--model", "tree", "--degree", "3", "--radius", "6", "--alpha", "1"]):
        argv = [sys.executable, "-m", "critlab.cli", *cmd]
        a = subprocess.run(argv, capture_output=True, text=True)
        b = subprocess.run(argv, capture_output=True, text=True)
        assert a.returncode == 0, a.stderr
        assert a.stdout == b.stdout
