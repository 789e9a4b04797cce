"""Synthetic angle-resolved photoluminescence maps built from the polariton model."""

from dataclasses import dataclass, field

import numpy as np

from .constants import MEV
from .dispersion import BicDispersionParams, DomainError, bic_fwhm
from .polariton import (
    CouplingParams,
    EmitterParams,
    branch_curves,
)


class ConfigError(ValueError):
    """Invalid user-supplied configuration."""


@dataclass(frozen=True)
class LorentzianPeak:
    center: float  # eV
    fwhm: float  # meV
    amplitude: float  # peak height above offset
    offset: float = 0.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise DomainError(f"fwhm must be > 0, got {self.fwhm}")
        if self.amplitude < 0 or self.offset < 0:
            raise DomainError("amplitude and offset must be >= 0")


@dataclass
class SpectralMap:
    """Intensity on an (angle, energy) grid; ``intensities[i, j]`` is at ``thetas[i]``, ``energies[j]``."""

    thetas: np.ndarray
    energies: np.ndarray
    intensities: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.energies = np.asarray(self.energies, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)
        if self.intensities.shape != (self.thetas.size, self.energies.size):
            raise DomainError(
                f"intensity shape {self.intensities.shape} does not match axes "
                f"({self.thetas.size}, {self.energies.size})"
            )
        if np.any(np.diff(self.thetas) <= 0) or np.any(np.diff(self.energies) <= 0):
            raise DomainError("map axes must be strictly increasing")
        if np.any(self.intensities < 0):
            raise DomainError("negative intensities")


@dataclass(frozen=True)
class SimulationModel:
    bic: BicDispersionParams = field(default_factory=BicDispersionParams)
    emitter: EmitterParams = field(default_factory=EmitterParams)
    coupling: CouplingParams = field(default_factory=CouplingParams)
    scale: float = 1000.0  # counts for unit branch weight
    offset: float = 0.0


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"  # none | gaussian | poisson
    sigma: float = 0.01  # gaussian only, fraction of the noiseless map maximum

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "poisson"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma >= 0:
            raise ConfigError(f"gaussian sigma must be >= 0, got {self.sigma}")


def default_theta_grid():
    return np.round(np.arange(-80, 81) * 0.1, 10)


def default_energy_grid(e0=2.107):
    return e0 + np.arange(-200, 201) * 0.1 * MEV


def lorentzian(e, peak):
    half = 0.5 * peak.fwhm * MEV
    de = np.asarray(e, dtype=float) - peak.center
    return peak.offset + peak.amplitude * half**2 / (de**2 + half**2)


def branch_weight(branch, kappa_bic_at_theta, kappa_inf):
    """Far-field out-coupling weight: cavity fraction times radiative loss / kappa_inf."""
    if kappa_inf <= 0:
        return 0.0
    w = branch.w_bic * kappa_bic_at_theta / kappa_inf
    return float(min(max(w, 0.0), 1.0))


def synth_spectrum(branches, weights, energies, scale=1.0, offset=0.0):
    """One spectrum: a Lorentzian per branch with height ``scale * weight``."""
    energies = np.asarray(energies, dtype=float)
    row = np.full(energies.shape, float(offset))
    for b, w in zip(branches, weights):
        if w <= 0 or b.fwhm <= 0:
            continue
        row += lorentzian(energies, LorentzianPeak(b.energy, b.fwhm, scale * w))
    return row


def _expected_map(model, thetas, energies):
    branches = branch_curves(model.bic, model.emitter, model.coupling, thetas)
    kappa = np.atleast_1d(bic_fwhm(model.bic, thetas))
    rows = []
    for i in range(thetas.size):
        pair = branches[2 * i : 2 * i + 2]
        weights = [branch_weight(b, kappa[i], model.bic.kappa_inf) for b in pair]
        rows.append(synth_spectrum(pair, weights, energies, model.scale, model.offset))
    return np.array(rows)


def synth_map(model=None, thetas=None, energies=None, noise=None, seed=0):
    """Synthesize a :class:`SpectralMap`; deterministic for a given seed.

    Each angle row draws from its own stream spawned from ``seed`` so the
    result does not depend on evaluation order. Gaussian noise is additive
    with ``sigma`` relative to the noiseless maximum and clipped at zero.
    """
    model = model or SimulationModel()
    noise = noise or NoiseSpec()
    thetas = default_theta_grid() if thetas is None else np.asarray(thetas, dtype=float)
    energies = default_energy_grid(model.bic.e0) if energies is None else np.asarray(energies, dtype=float)
    expected = _expected_map(model, thetas, energies)
    if noise.kind == "none":
        data = expected
    else:
        streams = np.random.SeedSequence(seed).spawn(thetas.size)
        data = np.empty_like(expected)
        sigma = noise.sigma * expected.max()
        for i, ss in enumerate(streams):
            rng = np.random.default_rng(ss)
            if noise.kind == "poisson":
                data[i] = rng.poisson(expected[i])
            else:
                data[i] = np.clip(expected[i] + rng.normal(0.0, sigma, expected.shape[1]), 0, None)
    meta = {
        "seed": seed,
        "noise": noise.kind,
        "noise_sigma": noise.sigma,
        "e0": model.bic.e0,
        "u": model.bic.u,
        "v": model.bic.v,
        "kappa_inf": model.bic.kappa_inf,
        "alpha": model.bic.alpha,
        "alpha_units": model.bic.alpha_units,
        "lambda_ref": model.bic.lambda_ref,
        "e_spe": model.emitter.e_spe,
        "kappa_spe": model.emitter.kappa_spe,
        "g": model.coupling.g,
        "scale": model.scale,
        "offset": model.offset,
    }
    return SpectralMap(thetas, energies, data, meta)
