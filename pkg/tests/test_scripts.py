import subprocess
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def _run(name, *args):
    proc = subprocess.run([sys.executable, str(SCRIPTS / name), *args], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def test_threshold_scan():
    out = _run("threshold_scan.py", "--nu", "0.5", "--J", "100")
    row = out.splitlines()[1].split()
    assert float(row[0]) == 0.5 and float(row[1]) == pytest.approx(0.5, abs=0.05)


def test_heat_rate():
    out = _run("heat_rate.py", "--N", "200", "--J", "10", "20", "40", "--samples", "500")
    slope = float(next(line for line in out.splitlines() if line.startswith("fitted slope")).split()[-1])
    assert slope == pytest.approx(-3.0, abs=0.3)
    assert "Monte Carlo" in out


def test_mercer_spectrum():
    out = _run("mercer_spectrum.py", "--kernel", "matern", "--nu", "1.5", "--length", "0.2")
    fitted = float(next(line for line in out.splitlines() if line.startswith("fitted decay")).split()[-1])
    assert fitted == pytest.approx(4.0, abs=0.15)
    assert "faster than any power" in _run("mercer_spectrum.py", "--kernel", "gaussian", "--panels", "20")


@pytest.mark.parametrize("config", sorted(p.name for p in (SCRIPTS / "configs").glob("*.toml")))
def test_example_configs_validate(config):
    from kernreg.config import load_config

    cfg = load_config(SCRIPTS / "configs" / config)
    assert cfg.basis.J >= cfg.spde.J
