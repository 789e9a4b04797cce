"""Strong coupling of a single-photon emitter to a BIC metasurface cavity."""

__version__ = "0.1.0"

from .dispersion import (  # noqa: E402
    BicDispersionParams,
    DomainError,
    bic_energy,
    bic_fwhm,
    energy_to_wavelength,
    wavevector,
)
from .polariton import (  # noqa: E402
    CouplingParams,
    EmitterParams,
    PolaritonBranch,
    blueshift_analytic,
    blueshift_numeric,
    branch_curves,
    eigenenergies_analytic,
    eigenenergies_numeric,
    fractions,
    hamiltonian,
    hopfield,
    oscillator_strength_density,
    rabi_splitting,
    strong_coupling_check,
)
