import csv
import io
import json
import subprocess
import sys

import pytest

from keplerreg.cli import RunConfig, main
from keplerreg.dynamics import Trajectory, periapsis_state


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_default_passes(capsys):
    code, out, _ = run(["verify"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["passed"] and not rep["failed"]
    names = {c["name"] for c in rep["checks"]}
    for key in ("oracle.neg", "oracle.pos", "oracle.zero", "pullback.ks", "pullback.free",
                "dictionary.hamiltonian", "casimir.neg", "lorentz.pos", "e3.zero"):
        assert key in names
    assert all("residual" in c for c in rep["checks"])


def test_verify_injected_fault_fails(capsys):
    code, out, err = run(["verify", "--inject-fault"], capsys)
    assert code == 1
    rep = json.loads(out)
    assert "closure.neg" in rep["failed"]
    assert "closure.neg" in err


def test_verify_reproducible_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", "--seed", "5", "--out", str(a)]) == 0
    assert main(["verify", "--seed", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_spectrum_neg_csv(capsys):
    code, out, _ = run(["spectrum", "--regime", "neg", "--cutoff", "8", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4, 5]
    assert [int(r["degeneracy"]) for r in rows] == [1, 4, 9, 16, 25]
    for r in rows:
        assert float(r["energy"]) == pytest.approx(float(r["closed_form"]), rel=1e-13)


def test_spectrum_pos_json(capsys):
    code, out, _ = run(["spectrum", "--regime", "pos", "--cutoff", "4"], capsys)
    assert code == 0
    lines = json.loads(out)
    assert lines[0]["n"] == 2 and lines[0]["energy"] == pytest.approx(0.125)


def test_spectrum_zero_sphere(capsys):
    code, out, _ = run(["spectrum", "--regime", "zero"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["sphere_radius2"] == 2.0
    assert "sphere" in doc["message"]


def test_propagate_circular_csv(capsys):
    code, out, _ = run(["propagate", "--n-steps", "10000", "--format", "csv"], capsys)
    assert code == 0
    summary = dict(l[2:].split("=") for l in out.splitlines() if l.startswith("# "))
    assert max(float(v) for v in summary.values()) < 1e-12
    tr = Trajectory.from_csv(out)
    assert len(tr.s) == 10001


def test_propagate_state_file(tmp_path, capsys):
    f = tmp_path / "s.json"
    f.write_text(periapsis_state(0.99).to_json())
    code, out, _ = run(["propagate", "--state", str(f), "--n-steps", "2000"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["drift"]["H"] < 1e-9
    assert len(doc["rows"]) == 2001


def test_propagate_malformed_state(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    code, _, err = run(["propagate", "--state", str(f)], capsys)
    assert code == 2
    assert "cannot parse state file" in err
    f.write_text('{"X": [0, 0, 0], "Y": [1, 0, 0]}')
    code, _, err = run(["propagate", "--state", str(f)], capsys)
    assert code == 2


def test_propagate_regime_mismatch(capsys):
    code, _, err = run(["propagate", "--regime", "pos"], capsys)
    assert code == 2
    assert "does not match" in err


def test_usage_errors(capsys):
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["spectrum", "--m", "-1"], capsys)[0] == 2
    assert run(["spectrum", "--cutoff", "1"], capsys)[0] == 2
    assert run(["verify", "--cutoff", "4"], capsys)[0] == 2


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"regime": "pos", "cutoff": 4, "format": "csv"}))
    code, out, _ = run(["spectrum", "--config", str(cfg), "--regime", "neg"], capsys)
    assert code == 0
    assert out.startswith("n,energy")
    assert "-0.5" in out.splitlines()[1]


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cutof": 4}))
    assert run(["spectrum", "--config", str(cfg)], capsys)[0] == 2


def test_benchmark_report_and_config_round_trip(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KEPLERREG_THREADS", "3")
    code, out, _ = run(["benchmark", "--n-steps", "3000"], capsys)
    assert code == 0
    rep = json.loads(out)
    ecc = [s["eccentricity"] for s in rep["scenarios"]]
    assert ecc == [0.5, 0.9, 0.99]
    rk = [s["direct_rk4"]["energy_drift"] for s in rep["scenarios"]]
    reg = [s["regularized"]["energy_drift"] for s in rep["scenarios"]]
    assert rk == sorted(rk) and rep["direct_drift_monotone"]
    assert max(reg) < 1e-10
    assert "timing" not in rep["scenarios"][0]
    # the echoed config is a valid config file
    cfg = tmp_path / "echo.json"
    echo = dict(rep["config"])
    echo.pop("command")
    cfg.write_text(json.dumps(echo))
    monkeypatch.setenv("KEPLERREG_THREADS", "1")
    code, out2, _ = run(["benchmark", "--config", str(cfg)], capsys)
    assert code == 0 and out2 == out


def test_benchmark_timing_flag(capsys):
    code, out, _ = run(["benchmark", "--n-steps", "500", "--eccentricities", "0.2", "--timing"], capsys)
    rep = json.loads(out)
    assert rep["scenarios"][0]["timing"]["regularized_s_per_step"] > 0


def test_run_config_validation():
    with pytest.raises(Exception):
        RunConfig(regime="weird").validate()
    assert RunConfig().validate().cutoff == 8


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "keplerreg", "spectrum", "--regime", "zero"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["sphere_radius2"] == 2.0
