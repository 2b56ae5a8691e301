import json
import math

import pytest

from isomass import cli
from isomass.errors import BudgetExhausted
from isomass.mass import ExhaustionStep, ExhaustionTrace
from isomass.regions import Region


def write_config(tmp_path, model, **extra):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"model": model, **extra}))
    return str(path)


FLAT = {"kind": "euclidean"}
POS = {"kind": "schwarzschild", "mass": 2.0}
NEG = {"kind": "schwarzschild", "mass": -2.0}


def test_massql_unit_ball(tmp_path, capsys):
    cfg = write_config(tmp_path, FLAT)
    out = tmp_path / "run"
    assert cli.main(["massql", "--config", cfg, "--region", "ball:0,0,0,1",
                     "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "mql               0.000000000000" in text
    assert "volume            4.18879020479" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == ["massql.csv"]
    for name in manifest["outputs"]:
        assert (out / name).exists()
    assert (out / "inputs" / "config.json").exists()


def test_massql_large_annulus(tmp_path, capsys):
    cfg = write_config(tmp_path, POS)
    assert cli.main(["massql", "--config", cfg, "--region", "annulus:1000",
                     "--out", str(tmp_path / "r")]) == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("mql")][0]
    assert float(line.split()[1]) == pytest.approx(2.0122020474, abs=1e-9)


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "never"
    assert cli.main(["massql", "--config", str(bad), "--region", "ball:0,0,0,1",
                     "--out", str(out)]) == 2
    assert not out.exists()
    cfg = write_config(tmp_path, {"kind": "schwarzschild"})
    assert cli.main(["massql", "--config", cfg, "--region", "ball:9,0,0,1",
                     "--out", str(out)]) == 2
    cfg = write_config(tmp_path, NEG)
    assert cli.main(["massql", "--config", cfg, "--region", "ball:1.5,0,0,1",
                     "--out", str(out)]) == 3
    assert "intersects excised set" in capsys.readouterr().err
    assert not out.exists()
    assert cli.main(["massql", "--config", cfg, "--out", str(out)]) == 2
    cfg = write_config(tmp_path, NEG, quadrature={"rel_tol": 2.0})
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 2
    cfg = write_config(tmp_path, NEG, quadrature={"tolerance": 1e-6})
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 2
    cfg = write_config(tmp_path, NEG)
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--rmin", "0.5",
                     "--rmax", "10"]) == 3


def test_sweep_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, NEG, sweep={"r_min": 10, "r_max": 10240, "count": 11})
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_bytes().split(b"\n")
    assert lines[0] == b"R,volume,perimeter,mql,vol_err,per_err"
    assert b"\r" not in (out / "sweep.csv").read_bytes()
    assert len([l for l in lines if l]) == 12
    summary = json.loads((out / "manifest.json").read_text())["summary"]
    assert summary["limit"] == pytest.approx(-2.0, abs=1e-3)
    assert "limit -1.99998" in capsys.readouterr().out


def test_exhaust_outputs(tmp_path):
    cfg = write_config(tmp_path, NEG)
    out = tmp_path / "ex"
    assert cli.main(["exhaust", "--config", cfg, "--r0", "2", "--steps", "4",
                     "--out", str(out)]) == 0
    bound = (out / "bound.txt").read_text().strip()
    assert bound.startswith("m_iso >= -")
    delta = float(bound.split("-", 1)[1])
    assert delta <= 1 / 3 + 1e-6
    rows = (out / "exhaust.csv").read_text().splitlines()
    assert rows[0].startswith("step,target_eps,achieved_mql_abs")
    assert len(rows) == 5


def test_exhaust_budget_exit(tmp_path, monkeypatch):
    def boom(model, R0, N, cfg, backend=None):
        step = ExhaustionStep(1, Region(annulus=R0), math.nan, 0.2, -0.2, 0.0,
                              math.nan, math.nan, 1.0, 1.0)
        raise BudgetExhausted("volume budget", partial=ExhaustionTrace(R0, (step,), 1, False))
    monkeypatch.setattr(cli, "exhaust", boom)
    cfg = write_config(tmp_path, NEG)
    out = tmp_path / "ex"
    assert cli.main(["exhaust", "--config", cfg, "--r0", "2", "--steps", "3",
                     "--out", str(out)]) == 5
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == 5 and "exhaust.csv" in manifest["outputs"]
    assert len((out / "exhaust.csv").read_text().splitlines()) == 2


def test_optimize_outputs(tmp_path):
    fam = tmp_path / "fam.json"
    fam.write_text(json.dumps({"family": "offset_ball",
                               "bounds": {"R": [1, 50], "d": [10, 1e5]}}))
    cfg = write_config(tmp_path, NEG)
    out = tmp_path / "opt"
    assert cli.main(["optimize", "--config", cfg, "--family", f"@{fam}",
                     "--budget", "30", "--seed", "3", "--out", str(out)]) == 0
    result = json.loads((out / "result.json").read_text())
    assert result["lower_bound_family"] is True
    assert result["evaluations"] == 30
    assert len((out / "history.csv").read_text().splitlines()) == 31
    assert cli.main(["optimize", "--config", cfg, "--family", '{"family": "x"}',
                     "--out", str(tmp_path / "o2")]) == 2


@pytest.mark.parametrize("command,extra", [
    ("sweep", ["--rmin", "10", "--rmax", "640", "--count", "7"]),
    ("exhaust", ["--r0", "2", "--steps", "3"]),
    ("optimize", ["--family", '{"family": "centered_annulus", "bounds": {"R": [10, 1000]}}',
                  "--budget", "25"]),
    ("massql", ["--region", "annulus:10+ball:100,0,0,5"]),
])
def test_replay_byte_identical(tmp_path, command, extra):
    cfg = write_config(tmp_path, POS if command != "exhaust" else NEG)
    first = tmp_path / "first"
    assert cli.main([command, "--config", cfg, "--out", str(first)] + extra) == 0
    second = tmp_path / "second"
    assert cli.main(["replay", str(first / "manifest.json"), "--out", str(second)]) == 0
    outputs = json.loads((first / "manifest.json").read_text())["outputs"]
    assert outputs
    for name in outputs:
        if name.endswith(".csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()


def test_plotdata(tmp_path):
    cfg = write_config(tmp_path, POS)
    out = tmp_path / "s"
    assert cli.main(["sweep", "--config", cfg, "--rmin", "10", "--rmax", "80",
                     "--count", "4", "--out", str(out)]) == 0
    dat = tmp_path / "pd.dat"
    assert cli.main(["plotdata", str(out / "sweep.csv"), "--x", "R", "--y", "mql",
                     "--output", str(dat)]) == 0
    lines = dat.read_text().splitlines()
    assert lines[0] == "# R mql" and len(lines) == 5
    assert float(lines[1].split()[0]) == 10.0
    assert cli.main(["plotdata", str(out / "sweep.csv"), "--x", "R", "--y", "zz"]) == 4
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert cli.main(["plotdata", str(empty), "--x", "R", "--y", "mql"]) == 4
    header_only = tmp_path / "h.csv"
    header_only.write_text("R,mql\n")
    assert cli.main(["plotdata", str(header_only), "--x", "R", "--y", "mql"]) == 4
    assert cli.main(["plotdata", str(tmp_path / "nope.csv"), "--x", "R", "--y", "mql"]) == 4


def test_replay_bad_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{}")
    assert cli.main(["replay", str(bad), "--out", str(tmp_path / "o")]) == 2
