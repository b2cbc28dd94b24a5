import math
import subprocess
import sys

import numpy as np
import pytest

from kernreg.cli import main
from kernreg.config import ConfigError, coefficient, config_from_dict, load_config
from kernreg.reports import read_curves_csv, read_heat_rate_csv, read_json, read_mercer_csv


def _write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


BRIDGE = """
[kernel]
name = "brownian_bridge"

[basis]
J = 200

[diagnostics]
r_grid = [0.0, 0.25, 0.4, 0.6, 0.75, 1.0]
s_grid = [0.0]
sharp_rstar = 0.5
"""


def test_defaults_and_round_trip():
    cfg = config_from_dict({})
    assert cfg.kernel.name == "exponential" and cfg.bc.kind == "dirichlet" and cfg.basis.J == 200
    again = config_from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "data,field",
    [
        ({"kernel": {"name": "matern", "nu": -1.0}}, "kernel.nu"),
        ({"kernel": {"nam": "gaussian"}}, "kernel.nam"),
        ({"colour": {}}, "colour"),
        ({"bc": {"kind": "neumann", "c0": 0.0}}, "bc.c0"),
        ({"basis": {"J": "many"}}, "basis.J"),
        ({"diagnostics": {"r_grid": [0.0, 1.0]}}, "diagnostics.r_grid"),
        ({"spde": {"M": 1}}, "spde.M"),
        ({"domain": {"lower": [0.0, 0.0], "upper": [1.0]}}, "domain.upper"),
        ({"output": {"formats": ["xml"]}}, "output.formats"),
    ],
)
def test_validation_names_the_field(data, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert info.value.field == field


def test_coefficient_expressions():
    f = coefficient("1 + x**2 + sin(pi*x)")
    x = np.array([0.0, 0.5])
    assert np.allclose(f(x), [1.0, 2.25])
    assert np.allclose(coefficient(3)(x), 3.0)
    for bad in ("__import__('os')", "open('f')", "x +", "lambda: 1"):
        with pytest.raises(ConfigError):
            coefficient(bad, "basis.a")


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[kernel\nname = 1"))


def test_cli_bad_config_exits_one(tmp_path, capsys):
    cfg = _write(tmp_path, '[kernel]\nname = "matern"\nnu = -0.5\n')
    assert main(["thresholds", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "kernel.nu" in capsys.readouterr().err


def test_cli_analyze(tmp_path):
    cfg = _write(tmp_path, BRIDGE)
    out = tmp_path / "out"
    code = main(["analyze", "--config", str(cfg), "--out", str(out), "--deterministic"])
    assert code in (0, 2)
    report = read_json(out / "report.json")
    assert report["exit_code"] == code and "generated_at" not in report
    assert report["critical_exponent"]["rstar"] == pytest.approx(0.5, abs=0.05)
    assert report["consistent"] and report["boundary_compliance"]["measured"]
    thresholds = read_json(out / "thresholds.json")
    assert thresholds["consistent"] and thresholds["sharp_rstar"] == 0.5
    curves = read_curves_csv(out / "trace_curves.csv")
    assert [c.r for c in curves] == [0.0, 0.25, 0.4, 0.6, 0.75, 1.0]
    by_r = {c.r: c for c in curves}
    assert by_r[0.4].verdict == "converged" and by_r[0.6].verdict == "diverged"
    assert curves[0].partial_sums[-1] == pytest.approx(report["trace_curves"][0]["partial_sums"][-1], rel=1e-15)
    assert len(read_curves_csv(out / "hs_curves.csv")) == 6


def test_cli_one_sided_bound(tmp_path):
    cfg = _write(tmp_path, '[kernel]\nname = "gaussian"\n\n[bc]\nkind = "neumann"\nc0 = 1.0\n\n[basis]\nJ = 200\n')
    out = tmp_path / "out"
    main(["analyze", "--config", str(cfg), "--out", str(out), "--deterministic"])
    report = read_json(out / "report.json")
    assert report["critical_exponent"]["rstar"] == pytest.approx(1.5, abs=0.1)


def test_cli_thresholds(tmp_path, capsys):
    cfg = _write(tmp_path, '[kernel]\nname = "matern"\nnu = 1.5\n')
    assert main(["thresholds", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    data = read_json(tmp_path / "thresholds.json")
    theorems = {(c["theorem"], c["case"]) for c in data["predicted"]}
    assert ("fourier-trace", "i") in theorems and ("hoelder-trace-dirichlet", "i") in theorems
    assert "generated_at" in data
    assert "fourier-trace(i)" in capsys.readouterr().out


def test_cli_mercer(tmp_path):
    cfg = _write(tmp_path, '[kernel]\nname = "brownian_bridge"\n\n[basis]\nJ = 50\n')
    assert main(["mercer", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    mu = read_mercer_csv(tmp_path / "mercer.csv")
    assert mu.size == 50 and mu[0] == pytest.approx(math.pi**-2, rel=1e-3)
    meta = read_json(tmp_path / "mercer.json")
    assert meta["trace_quadrature"] == pytest.approx(1 / 6, rel=1e-12)


def test_cli_spde_heat(tmp_path):
    text = '[kernel]\nname = "brownian_bridge"\n\n[basis]\nJ = 400\n\n[spde]\nT = 1.0\nJ = 20\nM = 500\nsteps = 2\n'
    cfg = _write(tmp_path, text)
    assert main(["spde-heat", "--config", str(cfg), "--out", str(tmp_path), "--seed", "3"]) == 0
    J, tails, slope = read_heat_rate_csv(tmp_path / "heat_rate.csv")
    assert slope == pytest.approx(-3.0, abs=0.3)
    assert np.all(np.diff(tails) < 0)
    heat = read_json(tmp_path / "heat.json")
    assert heat["monte_carlo"]["seed"] == 3 and abs(heat["monte_carlo"]["z_score"]) < 4


def test_output_directory_from_environment(tmp_path, monkeypatch):
    cfg = _write(tmp_path, '[kernel]\nname = "gaussian"\n')
    monkeypatch.setenv("KERNREG_OUT", str(tmp_path / "env_out"))
    assert main(["thresholds", "--config", str(cfg)]) == 0
    assert (tmp_path / "env_out" / "thresholds.json").exists()
    cfg2 = _write(tmp_path, f'[kernel]\nname = "gaussian"\n\n[output]\ndirectory = "{tmp_path / "cfg_out"}"\n', "b.toml")
    assert main(["thresholds", "--config", str(cfg2)]) == 0
    assert (tmp_path / "cfg_out" / "thresholds.json").exists()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kernreg", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("kernreg ")
