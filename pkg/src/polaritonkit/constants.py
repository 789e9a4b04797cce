"""CODATA 2018 constants (SI) used by the coupling-strength relation."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34  # J s
    e_charge: float = 1.602176634e-19  # C
    m0: float = 9.1093837015e-31  # kg
    eps0: float = 8.8541878128e-12  # F/m
    hc: float = 1.23984193  # eV um


CODATA2018 = PhysicalConstants()

HC_EV_UM = CODATA2018.hc
MEV = 1e-3  # eV per meV
