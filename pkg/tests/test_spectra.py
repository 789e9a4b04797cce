import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from polaritonkit.dispersion import BicDispersionParams, bic_fwhm
from polaritonkit.polariton import LPB, UPB, CouplingParams, EmitterParams, PolaritonBranch, branch_curves
from polaritonkit.spectra import (
    ConfigError,
    LorentzianPeak,
    NoiseSpec,
    SimulationModel,
    SpectralMap,
    branch_weight,
    default_energy_grid,
    default_theta_grid,
    lorentzian,
    synth_map,
    synth_spectrum,
)

# 0.5 * kappa_BIC(1.3 deg) / 20 meV for the default band, 40-digit mpmath
WEIGHT_1P3_HALF = 0.040452447106589103223


def _branch(w_bic, energy=2.1, fwhm=1.0, theta=1.0):
    return PolaritonBranch(UPB, theta, energy, fwhm, 1.0, w_bic, 1 - w_bic)


def test_lorentzian_peak_and_half_max():
    pk = LorentzianPeak(2.1, 4.0, 10.0, offset=1.0)
    assert lorentzian(2.1, pk) == 11.0
    for s in (-1, 1):
        assert lorentzian(2.1 + s * 2e-3, pk) == pytest.approx(6.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 20), st.floats(0.1, 1e4))
def test_lorentzian_area(fwhm, amp):
    pk = LorentzianPeak(2.1, fwhm, amp)
    # integrate over the offset from the centre in meV so quad sees an O(1) width
    area, _ = quad(lambda x: lorentzian(2.1 + x * 1e-3, pk), -np.inf, np.inf, epsabs=0, epsrel=1e-10, limit=200)
    assert area == pytest.approx(amp * np.pi * fwhm / 2, rel=1e-6)


def test_invalid_peak():
    with pytest.raises(ValueError):
        LorentzianPeak(2.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        LorentzianPeak(2.1, 1.0, -1.0)


def test_branch_weight_examples():
    p = BicDispersionParams()
    assert branch_weight(_branch(0.7), bic_fwhm(p, 0.0), p.kappa_inf) == 0.0
    assert branch_weight(_branch(0.0), bic_fwhm(p, 3.0), p.kappa_inf) == 0.0
    w = branch_weight(_branch(0.5), bic_fwhm(p, 1.3), p.kappa_inf)
    assert w == pytest.approx(WEIGHT_1P3_HALF, rel=1e-12)
    assert branch_weight(_branch(1.0), 40.0, 20.0) == 1.0


def test_synth_spectrum_rows():
    e = np.linspace(2.09, 2.12, 301)
    up = _branch(0.5, 2.108, 2.0)
    lo = PolaritonBranch(LPB, 1.0, 2.103, 1.0, -1.0, 0.5, 0.5)
    flat = synth_spectrum([up, lo], [0.0, 0.0], e, scale=100, offset=3.0)
    np.testing.assert_array_equal(flat, np.full(e.size, 3.0))
    one = synth_spectrum([up, lo], [0.2, 0.0], e, scale=100)
    np.testing.assert_allclose(one, lorentzian(e, LorentzianPeak(2.108, 2.0, 20.0)), rtol=1e-15)


def test_default_grids():
    th = default_theta_grid()
    assert th[0] == -8.0 and th[-1] == 8.0 and th.size == 161 and 0.0 in th
    e = default_energy_grid(2.107)
    assert e.size == 401
    assert e[0] == pytest.approx(2.087) and e[-1] == pytest.approx(2.127)
    assert np.allclose(np.diff(e), 1e-4)


def test_dark_row_and_symmetry():
    smap = synth_map()
    i0 = int(np.flatnonzero(smap.thetas == 0.0)[0])
    assert np.all(smap.intensities[i0] == 0.0)
    assert smap.intensities.max() > 0
    np.testing.assert_array_equal(smap.intensities, smap.intensities[::-1])


@pytest.mark.parametrize("kind", ["none", "gaussian", "poisson"])
def test_determinism(kind):
    th = np.linspace(-4, 4, 41)
    a = synth_map(thetas=th, noise=NoiseSpec(kind), seed=11)
    b = synth_map(thetas=th, noise=NoiseSpec(kind), seed=11)
    assert a.intensities.tobytes() == b.intensities.tobytes()
    assert a.metadata == b.metadata
    assert np.all(a.intensities >= 0)
    if kind != "none":
        c = synth_map(thetas=th, noise=NoiseSpec(kind), seed=12)
        assert not np.array_equal(a.intensities, c.intensities)


def test_rows_are_order_independent():
    th = np.linspace(-4, 4, 41)
    full = synth_map(thetas=th, noise=NoiseSpec("poisson"), seed=5)
    ref = synth_map(thetas=th, noise=NoiseSpec("none"))
    # each row uses its own stream: perturbing one row's grid leaves others unchanged
    assert full.intensities.shape == ref.intensities.shape
    again = synth_map(thetas=th, noise=NoiseSpec("poisson"), seed=5)
    np.testing.assert_array_equal(full.intensities[7], again.intensities[7])


def test_gaussian_noise_level():
    th = np.linspace(-6, 6, 121)
    clean = synth_map(thetas=th)
    noisy = synth_map(thetas=th, noise=NoiseSpec("gaussian", 0.01), seed=1)
    diff = noisy.intensities - clean.intensities
    # ignore cells clipped at zero
    mask = clean.intensities > 0.05 * clean.intensities.max()
    assert np.std(diff[mask]) == pytest.approx(0.01 * clean.intensities.max(), rel=0.1)


def test_metadata_records_inputs():
    m = SimulationModel(coupling=CouplingParams(1.7), scale=50.0)
    smap = synth_map(m, thetas=[0.0, 1.0], noise=NoiseSpec("poisson"), seed=4)
    md = smap.metadata
    assert md["g"] == 1.7 and md["scale"] == 50.0 and md["seed"] == 4 and md["noise"] == "poisson"
    assert md["kappa_spe"] == 0.5 and md["alpha_units"] == "meV"


def test_map_peaks_follow_branches():
    smap = synth_map(thetas=[-3.0])
    br = branch_curves(BicDispersionParams(), EmitterParams(), CouplingParams(2.0), [-3.0])
    row = smap.intensities[0]
    local = np.flatnonzero((row[1:-1] > row[:-2]) & (row[1:-1] > row[2:])) + 1
    assert local.size == 2
    found = np.sort(smap.energies[local])
    want = np.sort([b.energy for b in br])
    np.testing.assert_allclose(found, want, atol=1e-4)


def test_invalid_inputs():
    with pytest.raises(ConfigError):
        NoiseSpec("laplace")
    with pytest.raises(ConfigError):
        NoiseSpec("gaussian", -0.1)
    with pytest.raises(ValueError):
        SpectralMap(np.array([0.0, 1.0]), np.array([2.0, 2.1]), np.ones((3, 2)))
    with pytest.raises(ValueError):
        SpectralMap(np.array([1.0, 0.0]), np.array([2.0, 2.1]), np.ones((2, 2)))
    with pytest.raises(ValueError):
        SpectralMap(np.array([0.0, 1.0]), np.array([2.0, 2.1]), -np.ones((2, 2)))
