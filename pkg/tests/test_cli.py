import json
import subprocess
import sys

import numpy as np

from gainloss.cli import main
from gainloss.integrator import read_trajectory_csv


def _config(tmp_path, name="run.json", **data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_evolve_both_reports_deviation(tmp_path):
    cfg = _config(tmp_path, model={"gamma": 0.5}, rho0="random", t_final=4.0, output_dt=0.5)
    out = tmp_path / "traj.csv"
    assert main(["evolve", "--both", "--config", cfg, "-o", str(out)]) == 0
    text = out.read_text()
    dev = float(text.strip().splitlines()[-1].split(",")[1])
    assert dev < 1e-8
    times, mats = read_trajectory_csv(text)
    np.testing.assert_allclose(times, np.arange(9) * 0.5)
    np.testing.assert_allclose(np.trace(mats, axis1=1, axis2=2), 1.0, atol=1e-12)


def test_evolve_exact_matches_numeric(tmp_path):
    cfg = _config(tmp_path, model={"gamma": 0.0, "kappa": 0.3}, rho0="pure:0", t_final=2.0, output_dt=1.0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--config", cfg, "-o", str(a), "evolve", "--exact"]) == 0
    assert main(["evolve", "--config", cfg, "-o", str(b)]) == 0
    np.testing.assert_allclose(read_trajectory_csv(a.read_text())[1],
                               read_trajectory_csv(b.read_text())[1], atol=1e-8)


def test_evolve_exact_unsupported(tmp_path):
    cfg = _config(tmp_path, model={"gamma": 0.5, "kappa": 0.3})
    out = tmp_path / "x.csv"
    assert main(["evolve", "--exact", "--config", cfg, "-o", str(out)]) == 3
    assert not out.exists()


def test_spectrum_report(tmp_path, capsys):
    for gamma, phase in ((0.5, "Unbroken"), (1.0, "Exceptional"), (2.0, "Broken")):
        cfg = _config(tmp_path, model={"gamma": gamma})
        assert main(["spectrum", "--config", cfg]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["phase"] == phase
    assert rep["stationary_set"]["real_eigenvalue_count"] == 0
    assert len(rep["stationary_set"]["pure_fixed_points"]) == 2


def test_equilibrium_command(tmp_path, capsys):
    cfg = _config(tmp_path, model={"gamma": 2.0, "kappa": 0.5})
    assert main(["equilibrium", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["residual"] <= 1e-12
    assert main(["equilibrium", "--config", _config(tmp_path, "k0.json", model={"gamma": 2.0})]) == 3


def test_config_errors_leave_no_output(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    out = tmp_path / "out.csv"
    assert main(["evolve", "--config", str(bad), "-o", str(out)]) == 2
    assert main(["evolve", "-o", str(out)]) == 2
    assert main(["sweep", "--kappa", "a,b", "-o", str(out)]) == 2
    assert main(["sweep", "--points", "0", "-o", str(out)]) == 2
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [bad]


def test_sweep_deterministic_and_metadata(tmp_path):
    args = ["sweep", "--gamma-inv-min", "0.5", "--gamma-inv-max", "1.5", "--points", "3",
            "--kappa", "0,0.2", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["-o", str(a), "--threads", "1"]) == 0
    assert main(args + ["-o", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 7
    meta = json.loads((tmp_path / "a.meta.json").read_text())
    assert meta["seed"] == 3 and meta["kappa_list"] == [0.0, 0.2]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gainloss", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "gainloss" in res.stdout
