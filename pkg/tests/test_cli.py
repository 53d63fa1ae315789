import json
import subprocess
import sys

import pytest

from vlcsee import cli, entropy


def _run(tmp_path, name, *argv):
    out = tmp_path / name
    code = cli.main([*argv, "--out-dir", str(out)])
    return code, out


def _read(out):
    return {f: (out / f).read_bytes() for f in ("records.csv", "summary.csv", "manifest.json")}


def test_channel_outputs(tmp_path):
    code, out = _run(tmp_path, "c", "channel", "--seed", "1")
    assert code == 0
    lines = (out / "records.csv").read_bytes().split(b"\r\n")
    assert lines[0] == b"user,luminary,gain"
    assert len([ln for ln in lines[1:] if ln]) == 3 * 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "channel" and man["seed"] == 1 and man["exit_code"] == 0
    assert set(man["versions"]) >= {"vlcsee", "numpy", "scipy", "clarabel", "python"}
    assert man["files"]["records.csv"] == ["user", "luminary", "gain"]
    assert "time" not in json.dumps(man).lower().replace("wall_time", "")


def test_feasibility_byte_identical_across_runs_and_threads(tmp_path):
    args = ("feasibility", "--seed", "4", "--realizations", "12", "--axis", "threshold", "--values", "0.5,2")
    c1, a = _run(tmp_path, "a", *args)
    c2, b = _run(tmp_path, "b", *args)
    c3, c = _run(tmp_path, "c", *args, "--threads", "2")
    assert c1 == c2 == c3 == 0
    assert _read(a) == _read(b) == _read(c)
    summary = (a / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("axis,value,n,feasible,probability,ci_low,ci_high")
    assert len(summary) == 3


def test_sweep_deterministic(tmp_path):
    args = ("sweep", "--seed", "2", "--realizations", "2", "--axis", "power_dbm", "--values", "30",
            "--algo", "zf,random_zf")
    c1, a = _run(tmp_path, "a", *args)
    c2, b = _run(tmp_path, "b", *args, "--threads", "2")
    assert c1 == c2 == 0
    assert _read(a) == _read(b)


def test_optimize_writes_trace(tmp_path):
    code, out = _run(tmp_path, "o", "optimize", "--seed", "1", "--algo", "zf")
    assert code == 0
    header = (out / "records.csv").read_text().splitlines()[0].split(",")
    assert {"outer", "inner", "see"} <= set(header)


def test_figures_flag(tmp_path):
    code, out = _run(tmp_path, "f", "feasibility", "--seed", "1", "--realizations", "3", "--figures")
    assert code == 0
    assert (out / "feasibility.png").stat().st_size > 0
    assert json.loads((out / "manifest.json").read_text())["totals"]["figures"] == ["feasibility.png"]


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nseed = 1\n[scenario]\npower = loud\n")
    code, _ = _run(tmp_path, "x", "channel", "--config", str(cfg))
    assert code == 2
    err = capsys.readouterr().err
    assert "config error" in err and "line 4" in err and "field 'power'" in err


def test_missing_seed_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, "x", "channel")
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_bad_argument_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--seed", "1", "--axis", "colour"])
    assert exc.value.code == 2


def test_infeasible_exit_code(tmp_path):
    cfg = tmp_path / "hard.ini"
    cfg.write_text("[scenario]\nthresholds = 4\n")
    code, out = _run(tmp_path, "x", "optimize", "--config", str(cfg), "--seed", "1")
    assert code == 3
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 3


def test_verify_appendix_passes(tmp_path):
    code, out = _run(tmp_path, "v", "verify-appendix", "--seed", "1", "--samples", "20000")
    assert code == 0
    rows = (out / "summary.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 4
    assert all(r.endswith("true") for r in rows[1:])


def test_verify_appendix_violation_exit_code(tmp_path, monkeypatch):
    real = entropy.verify_entropy_chain

    def broken(*a, **k):
        rep = real(*a, **k)
        rep.users[0].checks["epi"] = False
        return rep

    monkeypatch.setattr(entropy, "verify_entropy_chain", broken)
    code, _ = _run(tmp_path, "v", "verify-appendix", "--seed", "1", "--samples", "2000")
    assert code == 1


def test_console_script_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "vlcsee.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
