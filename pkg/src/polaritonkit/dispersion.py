"""Phenomenological band energy and radiative loss of the BIC cavity mode.

Angles are in degrees, energies in eV, linewidths in meV, wavevectors in
rad/um.
"""

from dataclasses import dataclass

import numpy as np

from .constants import HC_EV_UM, MEV


class DomainError(ValueError):
    """An argument lies outside the domain of the model."""


@dataclass(frozen=True)
class BicDispersionParams:
    """Cavity band ``E(theta)`` and loss ``kappa(theta)``.

    ``alpha_units`` selects how ``alpha * k**2`` is read: ``"meV"`` (default,
    ``alpha`` in meV um^2) or ``"eV"`` (``alpha`` in eV um^2).
    """

    e0: float = 2.107
    u: float = 0.3
    v: float = 0.1
    kappa_inf: float = 20.0
    alpha: float = 30.0
    lambda_ref: float | None = None
    alpha_units: str = "meV"

    def __post_init__(self):
        if not self.e0 > 0:
            raise DomainError(f"e0 must be > 0, got {self.e0}")
        if not self.u > 0:
            raise DomainError(f"u must be > 0, got {self.u}")
        if not self.v >= 0:
            raise DomainError(f"v must be >= 0, got {self.v}")
        if not self.kappa_inf >= 0:
            raise DomainError(f"kappa_inf must be >= 0, got {self.kappa_inf}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if self.alpha_units not in ("meV", "eV"):
            raise DomainError(f"alpha_units must be 'meV' or 'eV', got {self.alpha_units!r}")
        if self.lambda_ref is None:
            object.__setattr__(self, "lambda_ref", energy_to_wavelength(self.e0))
        elif not self.lambda_ref > 0:
            raise DomainError(f"lambda_ref must be > 0, got {self.lambda_ref}")

    @property
    def alpha_mev(self):
        """alpha in meV um^2 regardless of the unit flag."""
        return self.alpha if self.alpha_units == "meV" else self.alpha / MEV


def energy_to_wavelength(e):
    """Photon energy (eV) to vacuum wavelength (um)."""
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0) or np.any(~np.isfinite(e)):
        raise DomainError("energy must be positive and finite")
    lam = HC_EV_UM / e
    return float(lam) if lam.ndim == 0 else lam


def wavevector(theta, lam):
    """In-plane wavevector ``(2 pi / lam) sin(theta)``, theta in degrees."""
    if not lam > 0:
        raise DomainError(f"wavelength must be > 0, got {lam}")
    k = 2 * np.pi / lam * np.sin(np.deg2rad(theta))
    return float(k) if np.ndim(k) == 0 else k


def bic_energy(p, theta):
    """Band energy in eV at emission angle ``theta`` (degrees)."""
    k = np.asarray(wavevector(theta, p.lambda_ref))
    e = p.e0 + p.u - np.sqrt(p.u**2 + p.v**2 * k**2)
    return float(e) if e.ndim == 0 else e


def bic_fwhm(p, theta):
    """Radiative linewidth in meV; harmonic combination of kappa_inf and alpha*k^2.

    Exactly zero at normal incidence.
    """
    k2 = np.asarray(wavevector(theta, p.lambda_ref)) ** 2
    quasi = p.alpha_mev * k2
    out = np.zeros_like(quasi)
    nz = quasi > 0
    if p.kappa_inf > 0:
        # kappa_inf * q / (kappa_inf + q) == 1 / (1/kappa_inf + 1/q) without the 1/0
        out[nz] = p.kappa_inf * quasi[nz] / (p.kappa_inf + quasi[nz])
    return float(out) if out.ndim == 0 else out
