import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polaritonkit import io as pio
from polaritonkit.config import SEED_ENV, RunConfig, config_from_dict, load_config
from polaritonkit.fitting import BranchTrace
from polaritonkit.photonstats import histogram_delays
from polaritonkit.spectra import ConfigError, NoiseSpec, synth_map


def test_defaults_resolve_to_module_defaults():
    cfg = RunConfig().validate()
    assert cfg.bic().e0 == 2.107 and cfg.bic().alpha_units == "meV"
    assert cfg.emitter_params().e_spe == 2.106
    assert cfg.coupling_params().g == 2.0
    assert cfg.photonstats.bin_width == 64.0


def test_delta0_sets_emitter_energy():
    cfg = config_from_dict({"dispersion": {"e0": 2.2}, "emitter": {"delta0": 1.5}})
    assert cfg.emitter_params().e_spe == pytest.approx(2.1985, abs=1e-15)


@pytest.mark.parametrize(
    "data, key",
    [
        ({"spectra": {"bogus": 1}}, "spectra.bogus"),
        ({"dispersion": {"U": 0.3}}, "dispersion.U"),
        ({"whatever": 1}, "whatever"),
    ],
)
def test_unknown_keys_are_named(data, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        config_from_dict(data)


@pytest.mark.parametrize(
    "data",
    [
        {"dispersion": {"kappa_inf": -1}},
        {"coupling": {"g": -0.5}},
        {"spectra": {"noise": "laplace"}},
        {"spectra": {"theta_step": 0}},
        {"photonstats": {"g2_0": 1.5}},
        {"alpha_units": "keV"},
        {"seed": "seven"},
        {"spectra": {"scale": "big"}},
        [],
    ],
)
def test_out_of_range_values_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_load_config_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert RunConfig().resolved_seed() == 0
    monkeypatch.setenv(SEED_ENV, "17")
    assert RunConfig().resolved_seed() == 17
    assert config_from_dict({"seed": 3}).resolved_seed() == 3
    monkeypatch.setenv(SEED_ENV, "x")
    with pytest.raises(ConfigError):
        RunConfig().resolved_seed()


def test_digest_tracks_content(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    a = config_from_dict({"coupling": {"g": 2.0}})
    b = config_from_dict({"coupling": {"g": 2.0}})
    c = config_from_dict({"coupling": {"g": 2.1}})
    assert a.digest() == b.digest() != c.digest()
    assert len(a.digest()) == 16


def test_fmt_round_trips_doubles():
    for x in (0.1, 2.107, 1 / 3, 1e-300, -6.02e23):
        assert float(pio.fmt(x)) == x


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_is_lossless(x):
    assert float(pio.fmt(x)) == x


def test_map_round_trip(tmp_path):
    smap = synth_map(thetas=np.linspace(-2, 2, 9), noise=NoiseSpec("poisson"), seed=2)
    path = tmp_path / "map.csv"
    pio.write_map(path, smap, "abc", 2)
    text = path.read_text()
    lines = text.splitlines()
    assert lines[:4] == ["# polaritonkit 0.1.0", "# config_sha256=abc", "# seed=2", "angle_deg,energy_eV,intensity"]
    assert "\r" not in text
    back = pio.read_map(path)
    np.testing.assert_array_equal(back.thetas, smap.thetas)
    np.testing.assert_array_equal(back.energies, smap.energies)
    np.testing.assert_array_equal(back.intensities, smap.intensities)


def test_map_read_errors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("angle,energy,intensity\n0,2.1,1\n")
    with pytest.raises(pio.DataFormatError):
        pio.read_map(p)
    p.write_text("angle_deg,energy_eV,intensity\n0,2.1,1\n0,2.2,1\n1,2.1,1\n")
    with pytest.raises(pio.DataFormatError, match="rectangular"):
        pio.read_map(p)
    p.write_text("angle_deg,energy_eV,intensity\n0,2.1,x\n")
    with pytest.raises(pio.DataFormatError):
        pio.read_map(p)
    p.write_text("# only comments\n")
    with pytest.raises(pio.DataFormatError):
        pio.read_map(p)


def test_trace_round_trip(tmp_path):
    tr = BranchTrace("UPB", [-1.0, 0.5, 2.0], [2.1, 2.105, 2.11], [1.0, 2.0, 3.0], [5.0, 6.0, 7.0],
                     [1e-6, 2e-6, 3e-6], [0.1, 0.2, 0.3])
    p = tmp_path / "t.csv"
    pio.write_trace(p, tr)
    back = pio.read_trace(p, "UPB")
    for name in ("theta", "energy", "fwhm", "amplitude", "energy_err", "fwhm_err"):
        np.testing.assert_array_equal(getattr(back, name), getattr(tr, name))


def test_minimal_trace_is_sorted(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("angle_deg,energy_eV,fwhm_meV\n2,2.1,1\n-1,2.0,2\n")
    tr = pio.read_trace(p)
    assert tr.theta.tolist() == [-1.0, 2.0]
    assert tr.energy_err is None


def test_histogram_and_delays_round_trip(tmp_path):
    h = histogram_delays(np.random.default_rng(0).normal(0, 3000, 5000))
    p = tmp_path / "h.csv"
    pio.write_histogram(p, h)
    back = pio.read_histogram(p)
    assert back.bin_width == pytest.approx(64.0)
    np.testing.assert_array_equal(back.counts, h.counts)
    d = np.array([-5.5, 0.0, 12.25])
    pio.write_delays(tmp_path / "d.csv", d)
    np.testing.assert_array_equal(pio.read_delays(tmp_path / "d.csv"), d)


def test_atomic_write_leaves_no_temp(tmp_path):
    pio.atomic_write(tmp_path / "sub" / "x.txt", "hello\n")
    assert (tmp_path / "sub" / "x.txt").read_text() == "hello\n"
    assert os.listdir(tmp_path / "sub") == ["x.txt"]


def test_json_is_sorted_and_handles_numpy(tmp_path):
    p = tmp_path / "x.json"
    pio.write_json(p, {"b": np.float64(1.5), "a": np.arange(2)})
    assert p.read_text().index('"a"') < p.read_text().index('"b"')
    assert json.loads(p.read_text()) == {"a": [0, 1], "b": 1.5}


def test_digest_ignores_output_dir():
    assert config_from_dict({"output_dir": "a"}).digest() == config_from_dict({"output_dir": "b"}).digest()
