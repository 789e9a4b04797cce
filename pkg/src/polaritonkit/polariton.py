"""Two-mode coupled-oscillator model of the emitter-cavity system.

Unit discipline: energies and Hamiltonian entries are eV, linewidths and the
coupling ``g`` are meV. Complex energies are plain Python/numpy complex
numbers ``E + i*FWHM/2`` (imaginary part >= 0 for lossy modes).
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import CODATA2018, MEV
from .dispersion import DomainError, bic_energy, bic_fwhm

UPB = "UPB"
LPB = "LPB"


@dataclass(frozen=True)
class EmitterParams:
    e_spe: float = 2.106  # eV
    kappa_spe: float = 0.5  # meV

    def __post_init__(self):
        if not self.e_spe > 0:
            raise DomainError(f"e_spe must be > 0, got {self.e_spe}")
        if not self.kappa_spe >= 0:
            raise DomainError(f"kappa_spe must be >= 0, got {self.kappa_spe}")


@dataclass(frozen=True)
class CouplingParams:
    g: float = 2.0  # meV

    def __post_init__(self):
        if not self.g >= 0:
            raise DomainError(f"g must be >= 0, got {self.g}")


@dataclass(frozen=True)
class PolaritonBranch:
    branch_id: str
    theta: float
    energy: float  # eV
    fwhm: float  # meV
    hopfield_a: complex
    w_bic: float
    w_spe: float


class CouplingVerdict(NamedTuple):
    strong: bool
    margin: float  # meV


def hamiltonian(e_bic, kappa_bic, emitter, coupling):
    """2x2 non-Hermitian Hamiltonian in eV."""
    if kappa_bic < 0:
        raise DomainError(f"negative cavity linewidth {kappa_bic}")
    return np.array(
        [
            [e_bic + 0.5j * kappa_bic * MEV, coupling.g * MEV],
            [coupling.g * MEV, emitter.e_spe + 0.5j * emitter.kappa_spe * MEV],
        ],
        dtype=complex,
    )


def _root_pair(x):
    """Principal ``sqrt(1 + x**2)`` with the UPB tie-break applied.

    Where the real part vanishes the root is flipped so that the upper
    eigenvalue also carries the larger imaginary part.
    """
    r = np.sqrt(1 + np.asarray(x, dtype=complex) ** 2)
    flip = (r.real == 0) & (r.imag < 0)
    return np.where(flip, -r, r)


def _stable_hopfield(r, x):
    # A+ = r - x and A- = -r - x with A+ * A- = -1; the member that would
    # suffer cancellation is rebuilt from the other one.
    a_plus = r - x
    a_minus = -r - x
    use_minus = np.abs(r + x) >= np.abs(r - x)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_plus = np.where(use_minus, -1 / a_minus, a_plus)
        a_minus = np.where(use_minus, a_minus, -1 / a_plus)
    return a_plus, a_minus


def _unpack(h):
    h = np.asarray(h, dtype=complex)
    mean = 0.5 * (h[0, 0] + h[1, 1])
    delta = 0.5 * (h[0, 0] - h[1, 1])
    return mean, delta, h[0, 1]


def eigenenergies_analytic(h):
    """Closed-form complex eigenenergies ``(E_upb, E_lpb)`` of a symmetric 2x2."""
    mean, delta, g = _unpack(h)
    s = np.sqrt(delta**2 + g**2)
    if s.real == 0 and s.imag < 0:
        s = -s
    return complex(mean + s), complex(mean - s)


def _order(lam):
    a, b = lam
    if (a.real, a.imag) >= (b.real, b.imag):
        return complex(a), complex(b)
    return complex(b), complex(a)


def eigenenergies_numeric(h):
    """Eigenenergies from the roots of the characteristic polynomial."""
    h = np.asarray(h, dtype=complex)
    # centre on the mean diagonal so the roots are not swamped by the ~2 eV offset
    mean = 0.5 * (h[0, 0] + h[1, 1])
    m = h - mean * np.eye(2)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    roots = np.roots([1.0, -tr, det]) if det != 0 or tr != 0 else np.zeros(2, complex)
    if len(roots) < 2:  # np.roots strips trailing zero coefficients
        roots = np.append(roots, 0.0)
    return _order(roots + mean)


def hopfield(delta, g):
    """Hopfield coefficients ``(A_plus, A_minus)`` for complex detuning (eV), g (meV)."""
    if not g > 0:
        raise DomainError("Hopfield coefficients are undefined for g <= 0")
    x = np.asarray(delta, dtype=complex) / (g * MEV)
    a_plus, a_minus = _stable_hopfield(np.sqrt(1 + x**2), x)
    if a_plus.ndim == 0:
        return complex(a_plus), complex(a_minus)
    return a_plus, a_minus


def fractions(a):
    """Photonic and excitonic weights ``(w_bic, w_spe)`` of a Hopfield coefficient."""
    mag2 = np.abs(a) ** 2
    w_bic = 1.0 / (1.0 + mag2)
    w_spe = 1.0 - w_bic
    if np.ndim(w_bic) == 0:
        return float(w_bic), float(w_spe)
    return w_bic, w_spe


def detuning(e_bic, kappa_bic, emitter):
    """Complex half-detuning in eV, loss imbalance carried as imaginary part."""
    return 0.5 * (e_bic - emitter.e_spe) + 0.25j * (kappa_bic - emitter.kappa_spe) * MEV


def branch_arrays(p, emitter, g, thetas):
    """Vectorised model evaluation over an angle grid.

    Returns a dict of arrays: ``e_upb``, ``e_lpb`` (eV), ``gamma_upb``,
    ``gamma_lpb`` (meV), ``a_upb``, ``a_lpb``, ``e_bic`` (eV), ``kappa_bic`` (meV).
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    e_bic = np.atleast_1d(bic_energy(p, thetas))
    k_bic = np.atleast_1d(bic_fwhm(p, thetas))
    mean = 0.5 * (e_bic + emitter.e_spe) + 0.25j * (k_bic + emitter.kappa_spe) * MEV
    delta = detuning(e_bic, k_bic, emitter)
    if g > 0:
        x = delta / (g * MEV)
        r = _root_pair(x)
        s = g * MEV * r
        a_up, a_lo = _stable_hopfield(r, x)
    else:
        s = np.sqrt(delta**2)
        flip = (s.real == 0) & (s.imag < 0)
        s = np.where(flip, -s, s)
        # uncoupled: the upper root is the bare cavity when s == delta
        bic_on_top = np.isclose(s, delta, rtol=0, atol=1e-15)
        a_up = np.where(bic_on_top, 0, np.inf).astype(complex)
        a_lo = np.where(bic_on_top, np.inf, 0).astype(complex)
    e_up = mean + s
    e_lo = mean - s
    return {
        "theta": thetas,
        "e_upb": e_up.real,
        "e_lpb": e_lo.real,
        "gamma_upb": 2 * e_up.imag / MEV,
        "gamma_lpb": 2 * e_lo.imag / MEV,
        "a_upb": a_up,
        "a_lpb": a_lo,
        "e_bic": e_bic,
        "kappa_bic": k_bic,
    }


def branch_curves(p, emitter, coupling, thetas):
    """UPB and LPB at every angle, ordered (UPB, LPB) per angle."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if thetas.size == 0:
        raise DomainError("empty angle grid")
    arr = branch_arrays(p, emitter, coupling.g, thetas)
    out = []
    for i, th in enumerate(thetas):
        for bid, tag in ((UPB, "upb"), (LPB, "lpb")):
            a = complex(arr[f"a_{tag}"][i])
            w_bic, w_spe = fractions(a)
            out.append(
                PolaritonBranch(
                    branch_id=bid,
                    theta=float(th),
                    energy=float(arr[f"e_{tag}"][i]),
                    fwhm=float(arr[f"gamma_{tag}"][i]),
                    hopfield_a=a,
                    w_bic=w_bic,
                    w_spe=w_spe,
                )
            )
    return out


def blueshift_analytic(delta, g, delta_bic, convention="physical"):
    """First-order branch shifts (meV) for a cavity blueshift ``delta_bic`` (meV).

    ``convention="physical"`` uses ``Delta / sqrt(Delta**2 + g**2)`` so the
    branch with the larger cavity fraction takes the larger share.
    ``convention="as_printed"`` evaluates ``1 -+ (1 + (g/Delta)**2)**-0.5``
    literally (principal root), which only agrees with the exact shifts for Re(Delta) < 0.
    """
    if not g > 0:
        raise DomainError("g must be > 0")
    delta = complex(delta)
    ge = g * MEV
    half = 0.5 * delta_bic
    if convention == "physical":
        ratio = delta / np.sqrt(delta**2 + ge**2)
        return half * (1 + ratio.real), half * (1 - ratio.real)
    if convention == "as_printed":
        ratio = 0j if delta == 0 else (1 + (ge / delta) ** 2) ** -0.5
        return half * (1 - ratio.real), half * (1 + ratio.real)
    raise ValueError(f"unknown convention {convention!r}")


def blueshift_numeric(h, delta_bic):
    """Exact branch shifts (meV) from re-solving with the cavity moved by ``delta_bic``."""
    h = np.asarray(h, dtype=complex)
    shifted = h.copy()
    shifted[0, 0] += delta_bic * MEV
    up0, lo0 = eigenenergies_numeric(h)
    up1, lo1 = eigenenergies_numeric(shifted)
    return (up1.real - up0.real) / MEV, (lo1.real - lo0.real) / MEV


class GridError(ValueError):
    """The angle grid does not bracket the quantity being located."""


def rabi_splitting(branches, method="resonance"):
    """Rabi splitting ``(theta, splitting_meV)`` from a grid of branch pairs.

    ``method="resonance"`` (default) evaluates the UPB-LPB gap where the
    cavity and emitter fractions are equal (zero real detuning, located by
    linear interpolation of the UPB cavity fraction through 1/2).
    ``method="min_gap"`` returns the minimum of the gap instead; with lossy
    modes it sits a little beyond the resonance angle and slightly below
    the resonant gap.

    Only theta >= 0 is searched (the model is even in theta).
    """
    if method not in ("resonance", "min_gap"):
        raise ValueError(f"unknown method {method!r}")
    up = {b.theta: b for b in branches if b.branch_id == UPB}
    lo = {b.theta: b for b in branches if b.branch_id == LPB}
    common = sorted(set(up) & set(lo))
    if not common:
        raise GridError("no angles with both branches")
    th = np.array(common)
    gap = np.array([up[t].energy - lo[t].energy for t in common]) / MEV
    w = np.array([up[t].w_bic for t in common])
    if np.any(th >= 0):
        keep = th >= 0
        th, gap, w = th[keep], gap[keep], w[keep]
    else:
        th, gap, w = -th[::-1], gap[::-1], w[::-1]
    if th.size < 3:
        raise GridError("need at least three angles to locate the splitting")
    if method == "resonance":
        return _resonance_gap(th, gap, w)
    return _min_gap(th, gap)


def _resonance_gap(th, gap, w):
    s = w - 0.5
    exact = np.flatnonzero(s == 0)
    if exact.size:
        i = int(exact[0])
        return float(th[i]), float(gap[i])
    idx = np.flatnonzero(np.sign(s[:-1]) != np.sign(s[1:]))
    if idx.size == 0:
        raise GridError("cavity fraction never crosses 1/2 on the grid")
    i = int(idx[0])
    if {w[i], w[i + 1]} == {0.0, 1.0}:
        # uncoupled: the branches swap identity, the signed gap is linear
        # through the crossing and the splitting is zero there
        signed = np.where(w > 0.5, gap, -gap)
        t = th[i] + (th[i + 1] - th[i]) * signed[i] / (signed[i] - signed[i + 1])
        return float(t), 0.0
    t = th[i] + (th[i + 1] - th[i]) * s[i] / (s[i] - s[i + 1])
    j = int(np.clip(i if t - th[i] < th[i + 1] - t else i + 1, 1, th.size - 2))
    x = th[j - 1 : j + 2]
    coef = np.polyfit(x - x[1], gap[j - 1 : j + 2], 2)
    return float(t), float(np.polyval(coef, t - x[1]))


def _min_gap(th, gap):
    i = int(np.argmin(gap))
    if i == 0 and th[0] == 0:
        # mirror through normal incidence
        x = np.array([-th[1], 0.0, th[1]])
        y = np.array([gap[1], gap[0], gap[1]])
    elif i == 0 or i == th.size - 1:
        raise GridError(f"gap is monotone on the grid (minimum at edge theta={th[i]})")
    else:
        x, y = th[i - 1 : i + 2], gap[i - 1 : i + 2]
    t_min, g_min = _parabola_vertex(x, y)
    if not (x[0] <= t_min <= x[2]):
        t_min, g_min = x[1], y[1]
    return float(t_min), float(max(g_min, 0.0))


def _parabola_vertex(x, y):
    c2, c1, c0 = np.polyfit(x - x[1], y, 2)
    if c2 <= 0:
        return x[1], y[1]
    t = -c1 / (2 * c2)
    return x[1] + t, c0 - c1**2 / (4 * c2)


def strong_coupling_check(g, kappa_cav, kappa_spe):
    """``g >= |kappa_cav - kappa_spe| / 2`` (all meV), with the margin."""
    if g < 0 or kappa_cav < 0 or kappa_spe < 0:
        raise DomainError("g and linewidths must be >= 0")
    margin = g - abs(kappa_cav - kappa_spe) / 2
    return CouplingVerdict(margin >= 0, margin)


def oscillator_strength_density(g, eps_r, constants=CODATA2018):
    """Oscillator strength per mode volume f/V (um^-3) implied by coupling g (meV)."""
    if not eps_r > 0:
        raise DomainError(f"eps_r must be > 0, got {eps_r}")
    if g < 0:
        raise DomainError(f"g must be >= 0, got {g}")
    c = constants
    g_joule = g * MEV * c.e_charge
    f_per_m3 = 4 * eps_r * c.eps0 * c.m0 * g_joule**2 / (c.hbar**2 * np.pi * c.e_charge**2)
    return f_per_m3 * 1e-18


def coupling_from_oscillator_strength(f_per_v, eps_r, constants=CODATA2018):
    """Inverse of :func:`oscillator_strength_density`: g (meV) from f/V (um^-3)."""
    if not eps_r > 0:
        raise DomainError(f"eps_r must be > 0, got {eps_r}")
    if f_per_v < 0:
        raise DomainError("f/V must be >= 0")
    c = constants
    f_per_m3 = f_per_v * 1e18
    g_joule = c.hbar * np.sqrt(np.pi * c.e_charge**2 * f_per_m3 / (4 * eps_r * c.eps0 * c.m0))
    return g_joule / c.e_charge / MEV
