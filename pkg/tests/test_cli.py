import csv
import json
import subprocess
import sys

import pytest

from qbmexact.cli import EXIT_GATE, EXIT_INVALID, EXIT_OK, main

SMALL = """
[output]
emit = {emit}

[[preset]]
label = "small"
time = {{ t_max = 5.0, points = 6 }}
tb = {{ kind = "OhmicDrude", gamma = 0.1, cutoff = 20.0, beta = 2.0, mode_count = 80 }}

[[preset]]
label = "small_second"
n_max = 12
time = {{ t_max = 5.0, points = 3 }}
tb = {{ kind = "OhmicDrude", gamma = 0.1, cutoff = 20.0, beta = 2.0, mode_count = 80 }}
second = {{ kind = "OhmicDrude", gamma = 0.2, cutoff = 40.0, beta = 1.0, mode_count = 80 }}
"""

ALL = '["populations", "coherences", "tensor_slices", "equilibrium_report"]'


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_run_writes_outputs_and_manifest(tmp_path):
    cfg = write(tmp_path, SMALL.format(emit=ALL))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "small" / "populations.csv")
    assert rows[0] == ["t", "J_00_00", "J_11_00", "J_22_00"]
    assert len(rows) == 7 and float(rows[1][1]) == pytest.approx(1.0, abs=1e-12)
    second = read_csv(out / "small_second" / "populations.csv")[0]
    assert "rho_00_secular" in second and "rho_00_canonical" in second
    assert read_csv(out / "small_second" / "tensor_slices.csv")[0] == ["t", "n", "m", "nu", "mu", "re", "im"]
    eq = dict(read_csv(out / "small" / "equilibrium_report.csv")[1:])
    assert float(eq["m_eff"]) > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert [p["label"] for p in manifest["presets"]] == ["small", "small_second"]
    assert manifest["units"]["omega0_rad_s"] == 3.0e14
    assert all(p["checks"]["all_outputs_finite"]["passed"] for p in manifest["presets"])
    assert not (out / ".failed").exists()


def test_reruns_are_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL.format(emit=ALL))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a)]) == EXIT_OK
    assert main(["run", str(cfg), "--out", str(b), "--workers", "2"]) == EXIT_OK
    files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_empty_emit_writes_manifest_only(tmp_path):
    cfg = write(tmp_path, SMALL.format(emit="[]"))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    assert [p.name for p in out.iterdir()] == ["manifest.json"]


def test_invalid_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.format(emit=ALL).replace("gamma = 0.1", "gamma = 0.1, bogus = 2", 1))
    assert main(["check", str(cfg)]) == EXIT_INVALID
    assert "preset[0].tb.bogus" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_INVALID
    good = write(tmp_path, SMALL.format(emit=ALL), "good.toml")
    assert main(["run", str(good), "--workers", "0"]) == EXIT_INVALID


def test_check_prints_normalized_config(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.format(emit=ALL))
    assert main(["check", str(cfg)]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert [p["label"] for p in data["presets"]] == ["small", "small_second"]


def test_failed_gate_exit_code_and_marker(tmp_path):
    # beta = 0.05 puts many quanta above n_max = 2: the leakage gate fails
    text = SMALL.format(emit='["populations"]').replace("beta = 2.0, mode_count = 80 }\n\n", 
                                                         "beta = 0.05, mode_count = 80 }\nn_max = 2\n\n", 1)
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, text)), "--out", str(out)]) == EXIT_GATE
    assert (out / ".failed").exists()
    assert json.loads((out / "manifest.json").read_text())["status"] == "failed"


def test_sweep_writes_convergence_table(tmp_path):
    cfg = write(tmp_path, SMALL.format(emit=ALL))
    out = tmp_path / "sweep"
    code = main(["sweep", str(cfg), "--axis", "quadrature_order", "--factors", "1,2", "--out", str(out)])
    rows = read_csv(out / "convergence.csv")
    assert rows[0] == ["preset", "axis", "reference_factor", "factor", "max_delta", "tolerance", "passed"]
    assert [r[0] for r in rows[1:]] == ["small", "small_second"]
    assert all(r[-1] == "true" for r in rows[1:])
    assert code == EXIT_OK


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, SMALL.format(emit=ALL))
    proc = subprocess.run([sys.executable, "-m", "qbmexact", "check", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK
    proc = subprocess.run([sys.executable, "-m", "qbmexact", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
