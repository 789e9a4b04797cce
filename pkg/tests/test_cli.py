import json
import subprocess
import sys

import numpy as np
import pytest

from polaritonkit import io as pio
from polaritonkit.cli import main
from polaritonkit.config import SEED_ENV
from polaritonkit.constants import HC_EV_UM
from polaritonkit.dispersion import BicDispersionParams, bic_energy, bic_fwhm
from polaritonkit.fitting import BranchTrace


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


def write_cfg(path, data):
    path.write_text(json.dumps(data))
    return str(path)


SMALL = {"spectra": {"theta_min": -6, "theta_max": 6, "theta_step": 0.2}}


def test_simulate_defaults(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 0
    smap = pio.read_map(tmp_path / "map.csv")
    assert smap.intensities.shape == (161, 401)
    i0 = int(np.flatnonzero(smap.thetas == 0)[0])
    assert np.all(smap.intensities[i0] == 0)
    cols, rows = pio.read_table(tmp_path / "branches.csv")
    assert {r[1] for r in rows} == {"UPB", "LPB"}


def test_simulate_uncoupled_branches_cross(tmp_path):
    assert main(["simulate", "--g", "0", "--out", str(tmp_path)]) == 0
    cols, rows = pio.read_table(tmp_path / "branches.csv")
    w = {(float(r[0]), r[1]): float(r[4]) for r in rows}
    # the cavity character switches branch across the crossing
    assert w[(0.0, "UPB")] == 1.0 and w[(3.0, "LPB")] == 1.0


def test_header_comments(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", SMALL)
    assert main(["simulate", "--config", cfg, "--seed", "5", "--out", str(tmp_path)]) == 0
    for name in ("map.csv", "branches.csv"):
        head = (tmp_path / name).read_text().splitlines()[:3]
        assert head[0] == "# polaritonkit 0.1.0"
        assert head[1].startswith("# config_sha256=") and len(head[1]) == len("# config_sha256=") + 16
        assert head[2] == "# seed=5"


def test_byte_identical_reruns(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", {**SMALL, "spectra": {**SMALL["spectra"], "noise": "poisson"}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--seed", "9", "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--seed", "9", "--out", str(b)]) == 0
    for name in ("map.csv", "branches.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert main(["fit-polariton", str(a / "map.csv"), "--config", cfg, "--out", str(a)]) == 0
    assert main(["fit-polariton", str(a / "map.csv"), "--config", cfg, "--out", str(b)]) == 0
    for name in ("polariton_fit.json", "upb_trace.csv", "lpb_trace.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_flag_beats_config_beats_env(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "44")
    cfg = write_cfg(tmp_path / "c.json", {**SMALL, "seed": 7})
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")])
    assert "# seed=7" in (tmp_path / "x" / "map.csv").read_text()
    main(["simulate", "--config", cfg, "--seed", "8", "--out", str(tmp_path / "y")])
    assert "# seed=8" in (tmp_path / "y" / "map.csv").read_text()
    main(["simulate", "--config", write_cfg(tmp_path / "d.json", SMALL), "--out", str(tmp_path / "z")])
    assert "# seed=44" in (tmp_path / "z" / "map.csv").read_text()


def test_bad_config_exit_2_names_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {"spectra": {"bogus": 1}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "spectra.bogus" in capsys.readouterr().err


def test_missing_file_exit_4(tmp_path):
    assert main(["fit-polariton", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 4
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 4


def test_fit_polariton_default_preset(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {"spectra": {"noise": "gaussian"}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert main(["fit-polariton", str(tmp_path / "map.csv"), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "polariton_fit.json").read_text())
    assert res["rabi_splitting_meV"] == pytest.approx(4.0, abs=0.3)
    assert res["g_meV"] == pytest.approx(2.0, rel=0.05)
    assert res["version"] == "0.1.0" and "config_sha256" in res
    assert "Rabi splitting" in capsys.readouterr().out


def test_fit_polariton_dark_uncoupled_map_exit_3(tmp_path, capsys):
    assert main(["simulate", "--g", "0", "--out", str(tmp_path)]) == 0
    assert main(["fit-polariton", str(tmp_path / "map.csv"), "--out", str(tmp_path)]) == 3
    assert "missing" in capsys.readouterr().err


def test_fit_dispersion(tmp_path):
    truth = BicDispersionParams()
    th = np.linspace(-15, 15, 61)
    n = th.size
    pio.write_trace(tmp_path / "t.csv", BranchTrace("BIC", th, bic_energy(truth, th), bic_fwhm(truth, th), np.ones(n)))
    assert main(["fit-dispersion", str(tmp_path / "t.csv"), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "dispersion_fit.json").read_text())
    for k in ("u", "v", "kappa_inf", "alpha"):
        assert res["params"][k] == pytest.approx(getattr(truth, k), rel=0.01)
    cols, rows = pio.read_table(tmp_path / "dispersion_residuals.csv")
    assert len(rows) == n and "energy_resid_eV" in cols


def test_fit_dispersion_narrow_range_exit_3(tmp_path):
    th = np.linspace(-1, 1, 11)
    truth = BicDispersionParams()
    pio.write_trace(tmp_path / "t.csv", BranchTrace("BIC", th, bic_energy(truth, th), bic_fwhm(truth, th), np.ones(11)))
    assert main(["fit-dispersion", str(tmp_path / "t.csv"), "--out", str(tmp_path)]) == 3


def _power_maps(tmp_path, shifts, powers):
    lam = HC_EV_UM / 2.107
    d = tmp_path / "maps"
    lines = ["power_kw_cm2,map_file"]
    for i, (s, p) in enumerate(zip(shifts, powers)):
        cfg = write_cfg(tmp_path / f"c{i}.json", {
            "dispersion": {"e0": 2.107 + s * 1e-3, "lambda_ref": lam},
            "emitter": {"e_spe": 2.106},
            "spectra": {"theta_min": -3, "theta_max": -2, "theta_step": 0.02},
        })
        out = tmp_path / f"run{i}"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        d.mkdir(exist_ok=True)
        (d / f"p{i}.csv").write_bytes((out / "map.csv").read_bytes())
        lines.append(f"{p},p{i}.csv")
    (d / "manifest.csv").write_text("\n".join(lines) + "\n")
    return d


def test_power_series_round_trip(tmp_path):
    powers = [1.329, 5.0, 10.0, 18.0, 25.784]
    shifts = [0.0, 0.4, 0.9, 1.6, 2.2]
    d = _power_maps(tmp_path, shifts, powers)
    assert main(["power-series", str(d), "--theta", "-2.56", "--out", str(tmp_path)]) == 0
    cols, rows = pio.read_table(tmp_path / "power_series.csv")
    got = np.array([float(r[1]) for r in rows])
    np.testing.assert_allclose(got[1:], shifts[1:], rtol=0.02)


def test_power_series_single_power(tmp_path):
    d = _power_maps(tmp_path, [0.0], [3.0])
    assert main(["power-series", str(d), "--out", str(tmp_path)]) == 0
    cols, rows = pio.read_table(tmp_path / "power_series.csv")
    assert float(rows[0][1]) == 0.0


def test_power_series_manifest_mismatch(tmp_path):
    d = _power_maps(tmp_path, [0.0, 1.0], [1.0, 2.0])
    (d / "manifest.csv").write_text("power_kw_cm2,map_file\n1.0,p0.csv\n2.0,p7.csv\n")
    assert main(["power-series", str(d), "--out", str(tmp_path)]) == 2


def test_g2_pipeline(tmp_path, capsys):
    assert main(["simulate-g2", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert main(["g2", "--histogram", str(tmp_path / "g2_histogram.csv"), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "g2_fit.json").read_text())
    assert res["g2_0"] == pytest.approx(0.28, abs=0.03)
    assert res["purity"] is True
    assert "single-photon emitter" in capsys.readouterr().out
    cols, rows = pio.read_table(tmp_path / "g2_curve.csv")
    assert cols == ["delay_ps", "count", "g2_measured", "g2_fit"]


def test_g2_flat_input(tmp_path):
    assert main(["simulate-g2", "--poissonian", "--out", str(tmp_path)]) == 0
    assert main(["g2", "--histogram", str(tmp_path / "g2_histogram.csv"), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "g2_fit.json").read_text())["purity"] is False


def test_g2_raw_delays(tmp_path):
    rng = np.random.default_rng(0)
    d = rng.uniform(-20000, 20000, 50000)
    pio.write_delays(tmp_path / "d.csv", d)
    assert main(["g2", "--delays", str(tmp_path / "d.csv"), "--out", str(tmp_path)]) == 0


def test_g2_too_few_bins_exit_3(tmp_path):
    (tmp_path / "h.csv").write_text("delay_ps,count\n0,1\n64,2\n128,3\n")
    assert main(["g2", "--histogram", str(tmp_path / "h.csv"), "--out", str(tmp_path)]) == 3


def test_check_coupling(capsys):
    assert main(["check-coupling", "--g", "2", "--kappa-cav", "1.65", "--kappa-spe", "0.5"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("strong coupling") and "margin=1.425" in out
    assert main(["check-coupling", "--g", "0.2", "--kappa-cav", "1", "--kappa-spe", "0.5"]) == 0
    assert capsys.readouterr().out.startswith("weak coupling")


def test_help_documents_precedence():
    out = subprocess.run([sys.executable, "-m", "polaritonkit.cli", "simulate", "--help"],
                         capture_output=True, text=True, check=True).stdout
    assert "flags > --config" in " ".join(out.split())
