"""Peak, dispersion, coupled-oscillator and power-series fits."""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .constants import MEV
from .dispersion import BicDispersionParams, bic_energy, bic_fwhm, energy_to_wavelength
from .lsq import FitError, FitProblem, FitResult, nlls_solve
from .polariton import (
    CouplingParams,
    EmitterParams,
    branch_arrays,
    branch_curves,
    eigenenergies_numeric,
    hamiltonian,
    rabi_splitting,
)
from .spectra import LorentzianPeak


class InitializationError(ValueError):
    """Automatic initial guesses could not be formed."""


class ExtractionError(RuntimeError):
    """Branch traces could not be extracted from a map."""


@dataclass
class BranchTrace:
    branch_id: str
    theta: np.ndarray
    energy: np.ndarray  # eV
    fwhm: np.ndarray  # meV
    amplitude: np.ndarray
    energy_err: np.ndarray | None = None  # eV
    fwhm_err: np.ndarray | None = None  # meV

    def __post_init__(self):
        for name in ("theta", "energy", "fwhm", "amplitude", "energy_err", "fwhm_err"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, np.asarray(val, dtype=float))
        if self.theta.size > 1 and np.any(np.diff(self.theta) <= 0):
            raise ValueError("trace angles must be strictly increasing")

    def __len__(self):
        return self.theta.size


# --------------------------------------------------------------- Lorentzians


def _multi_lorentzian(e_mev, x, n):
    half2 = None
    out = np.full_like(e_mev, x[0])
    for k in range(n):
        c, w, a = x[1 + 3 * k : 4 + 3 * k]
        half2 = (0.5 * w) ** 2
        out = out + a * half2 / ((e_mev - c) ** 2 + half2)
    return out


def _initial_peaks(e_mev, y, n_peaks):
    step = e_mev[1] - e_mev[0]
    idx, props = find_peaks(y, distance=2, prominence=0)
    if idx.size < n_peaks:
        raise InitializationError(
            f"found {idx.size} local maxima but {n_peaks} peaks requested; pass init= explicitly"
        )
    order = np.argsort(props["prominences"])[::-1][:n_peaks]
    idx = np.sort(idx[order])
    base = float(np.min(y))
    guesses = []
    for i in idx:
        height = y[i] - base
        above = y > base + 0.5 * height
        lo = i
        while lo > 0 and above[lo - 1]:
            lo -= 1
        hi = i
        while hi < y.size - 1 and above[hi + 1]:
            hi += 1
        width = max((hi - lo + 1) * step, 2 * step)
        guesses.append((e_mev[i], width, max(height, 0.0)))
    return base, guesses


def fit_lorentzian(energies, intensities, n_peaks=1, init=None, max_iter=200):
    """Fit ``n_peaks`` Lorentzians plus a shared constant offset.

    Returns ``(peaks, result)`` with peaks sorted by center. ``init`` may be
    a list of :class:`LorentzianPeak`; otherwise guesses come from the most
    prominent local maxima (separated by at least two grid steps).
    """
    if n_peaks not in (1, 2):
        raise ValueError("n_peaks must be 1 or 2")
    e = np.asarray(energies, dtype=float)
    y = np.asarray(intensities, dtype=float)
    if e.size < 5 * n_peaks:
        raise InitializationError(f"need at least {5 * n_peaks} samples, got {e.size}")
    ref = float(e.mean())
    e_mev = (e - ref) / MEV
    step = float(np.median(np.diff(e_mev)))
    span = float(e_mev[-1] - e_mev[0])
    if init is None:
        base, guesses = _initial_peaks(e_mev, y, n_peaks)
    else:
        if len(init) != n_peaks:
            raise InitializationError("init length does not match n_peaks")
        base = float(init[0].offset)
        guesses = [((pk.center - ref) / MEV, pk.fwhm, pk.amplitude) for pk in init]
    ymax = max(float(np.max(y)), 1e-300)
    x0 = [base]
    lower = [0.0]
    upper = [ymax]
    for c, w, a in guesses:
        x0 += [c, float(np.clip(w, 0.5 * step, span)), a]
        lower += [e_mev[0], 0.5 * step, 0.0]
        upper += [e_mev[-1], span, 10 * ymax]
    x0 = np.clip(x0, lower, upper)

    def residual(x):
        return _multi_lorentzian(e_mev, x, n_peaks) - y

    res = nlls_solve(FitProblem(residual, x0, lower, upper, max_iter=max_iter))
    x, err = res.params, res.stderr
    peaks = []
    for k in range(n_peaks):
        c, w, a = x[1 + 3 * k : 4 + 3 * k]
        peaks.append(LorentzianPeak(ref + c * MEV, float(w), float(a), float(x[0])))
    order = np.argsort([pk.center for pk in peaks])
    peaks = [peaks[i] for i in order]
    res.peak_errors = [
        (err[1 + 3 * k] * MEV, err[2 + 3 * k], err[3 + 3 * k]) for k in order
    ]
    if n_peaks == 2:
        sep = abs(peaks[1].center - peaks[0].center) / MEV
        if sep < 1e-3 * min(pk.fwhm for pk in peaks) or not np.all(np.isfinite(err)):
            res.diagnostics.append("degenerate fit: peaks not separately identifiable")
            res.converged = False
    return peaks, res


# ------------------------------------------------------------ branch traces


def _fit_row(e, y, min_snr):
    peaks, res = fit_lorentzian(e, y, 2)
    if not res.converged:
        return None, "fit did not converge"
    errs = res.peak_errors
    noise = np.std(res.residuals)
    for pk, (ce, we, ae) in zip(peaks, errs):
        if not (np.isfinite(ce) and np.isfinite(we)):
            return None, "singular peak parameters"
        if pk.amplitude < min_snr * max(noise, ae, 1e-300):
            return None, "peak below noise"
        margin = 0.5 * pk.fwhm * MEV
        if pk.center - margin < e[0] or pk.center + margin > e[-1]:
            return None, "peak at window edge"
    return (peaks, errs), None


def extract_branches(smap, exclusion_halfwidth=0.5, min_snr=3.0):
    """Double-Lorentzian fit per angle, tracked into UPB and LPB traces.

    Angles with ``|theta| < exclusion_halfwidth`` are skipped (and ``theta=0``
    is skipped by the failure path anyway when it carries no signal). Angles
    where the fit fails are dropped and reported in ``diagnostics``.
    Returns ``(upb, lpb, diagnostics)``.
    """
    diagnostics = []
    fits = {}
    for i, th in enumerate(smap.thetas):
        if abs(th) < exclusion_halfwidth:
            continue
        try:
            out, why = _fit_row(smap.energies, smap.intensities[i], min_snr)
        except (InitializationError, FitError) as exc:
            out, why = None, str(exc)
        if out is None:
            diagnostics.append(f"theta={th:g}: omitted ({why})")
            continue
        fits[float(th)] = out
    if not fits:
        raise ExtractionError(
            "no angle shows two resolvable peaks: UPB and/or LPB missing from the map"
        )
    tracks = {"upper": {}, "lower": {}}
    for side in (-1, 1):
        angles = sorted((t for t in fits if np.sign(t) == side or (t == 0 and side == 1)), key=abs)
        last = None
        slope = None
        for t in angles:
            peaks, errs = fits[t]
            pair = list(zip(peaks, errs))
            if last is not None:
                keep = sum(abs(p.center - c) for (p, _), c in zip(pair, last))
                swap = sum(abs(p.center - c) for (p, _), c in zip(pair[::-1], last))
                if swap < keep or (swap == keep and slope is not None and _swap_keeps_slope(pair, last, slope)):
                    pair = pair[::-1]
            new = [p.center for p, _ in pair]
            if last is not None:
                slope = [np.sign(n - o) for n, o in zip(new, last)]
            last = new
            tracks["lower"][t], tracks["upper"][t] = pair
    upb = _to_trace("UPB", tracks["upper"])
    lpb = _to_trace("LPB", tracks["lower"])
    return upb, lpb, diagnostics


def _swap_keeps_slope(pair, last, slope):
    swapped = [np.sign(p.center - c) for (p, _), c in zip(pair[::-1], last)]
    return swapped == slope


def _to_trace(branch_id, d):
    th = np.array(sorted(d))
    rows = [d[t] for t in th]
    return BranchTrace(
        branch_id,
        th,
        np.array([p.center for p, _ in rows]),
        np.array([p.fwhm for p, _ in rows]),
        np.array([p.amplitude for p, _ in rows]),
        np.array([e[0] for _, e in rows]),
        np.array([e[1] for _, e in rows]),
    )


def _series_scale(values):
    """Robust spread used to put eV- and meV-valued series on a common footing."""
    v = np.asarray(values, dtype=float)
    mad = np.median(np.abs(v - np.median(v)))
    # a plateau (e.g. a bare emitter line) has MAD ~ rounding noise
    mad = max(mad, 1e-3 * np.ptp(v))
    return mad if mad > 0 else max(np.median(np.abs(v)), 1e-300)


# -------------------------------------------------------- cavity dispersion


def fit_bic_dispersion(theta, energy, fwhm, alpha_units="meV", lambda_ref=None, init=None):
    """Joint fit of band energy (eV) and loss (meV) versus angle.

    Each residual series is divided by the median absolute value of its
    samples. Returns ``(params, result)``.
    """
    theta = np.asarray(theta, dtype=float)
    energy = np.asarray(energy, dtype=float)
    fwhm = np.asarray(fwhm, dtype=float)
    if np.max(np.abs(theta)) < 3.0:
        raise FitError("angle range too narrow: need samples with |theta| >= 3 deg")
    e0_guess = float(energy[np.argmin(np.abs(theta))])
    lam = energy_to_wavelength(e0_guess) if lambda_ref is None else lambda_ref
    k2 = (2 * np.pi / lam * np.sin(np.deg2rad(theta))) ** 2
    e_scale = max(np.median(np.abs(energy)), 1e-300)
    k_scale = max(np.median(np.abs(fwhm)), 1e-300)
    a_factor = 1.0 if alpha_units == "meV" else 1.0 / MEV

    if init is None:
        # parabolic band: E ~ e0 - (v^2 / 2U) k^2; start from U = 0.3 eV
        drop = max(e0_guess - energy.min(), 0.0)
        curv = drop / max(k2.max(), 1e-12)
        u0 = 0.3
        v0 = np.sqrt(max(2 * u0 * curv, 1e-6))
        kinf0 = max(float(fwhm.max()), 1e-3)
        small = (fwhm > 0) & (fwhm < 0.5 * kinf0) & (k2 > 0)
        alpha0 = float(np.median(fwhm[small] / k2[small])) if small.any() else kinf0 / max(np.median(k2[k2 > 0]), 1e-12)
        x0 = np.array([e0_guess, u0, v0, kinf0 * 1.1, alpha0 / a_factor])
    else:
        x0 = np.array([init.e0, init.u, init.v, init.kappa_inf, init.alpha])

    def model(x):
        e0, u, v, kinf, alpha = x
        e = e0 + u - np.sqrt(u**2 + v**2 * k2)
        q = alpha * a_factor * k2
        with np.errstate(divide="ignore", invalid="ignore"):
            kap = np.where(q > 0, kinf * q / (kinf + q), 0.0)
        return e, kap

    def residual(x):
        e, kap = model(x)
        return np.concatenate([(e - energy) / e_scale, (kap - fwhm) / k_scale])

    lower = [0.0, 1e-6, 0.0, 0.0, 1e-9]
    upper = [np.inf, np.inf, np.inf, np.inf, np.inf]
    x0 = np.clip(x0, lower, upper)
    res = nlls_solve(FitProblem(residual, x0, lower, upper, max_iter=500))
    e0, u, v, kinf, alpha = res.params
    params = BicDispersionParams(e0=e0, u=u, v=v, kappa_inf=kinf, alpha=alpha, lambda_ref=lam, alpha_units=alpha_units)
    return params, res


# -------------------------------------------------------- coupled oscillator


@dataclass
class CoupledFit:
    g: float  # meV
    delta0: float  # meV, E_BIC(0) - E_SPE
    kappa_spe: float  # meV
    stderr: dict
    rabi_theta: float
    rabi_splitting: float  # meV
    result: FitResult
    diagnostics: list = field(default_factory=list)

    def emitter(self, bic):
        return EmitterParams(e_spe=bic.e0 - self.delta0 * MEV, kappa_spe=self.kappa_spe)


def fit_coupled_oscillator(upb, lpb, bic, em_init=None, g_init=2.0, use_errors=True):
    """Fit ``(g, delta0, kappa_spe)`` to branch energies and widths with the cavity fixed.

    Residuals are weighted by the per-point fit uncertainties carried by the
    traces when available, otherwise each series is scaled by its median
    absolute deviation.
    """
    em_init = em_init or EmitterParams()
    if len(upb) + len(lpb) < 4:
        raise FitError("need at least four trace points")
    weighted = use_errors and _has_errors(upb, lpb)
    series = []
    for tr, tag in ((upb, "upb"), (lpb, "lpb")):
        if len(tr) == 0:
            continue
        if weighted:
            e_w, g_w = MEV / tr.energy_err, 1.0 / tr.fwhm_err
        else:
            e_w, g_w = 1.0 / _series_scale(tr.energy / MEV), 1.0 / _series_scale(tr.fwhm)
        series.append((tag, tr, e_w, g_w))

    def residual(x):
        g, d0, ks = x
        em = EmitterParams(e_spe=bic.e0 - d0 * MEV, kappa_spe=ks)
        out = []
        for tag, tr, e_w, g_w in series:
            arr = branch_arrays(bic, em, g, tr.theta)
            out.append((arr[f"e_{tag}"] - tr.energy) / MEV * e_w)
            out.append((arr[f"gamma_{tag}"] - tr.fwhm) * g_w)
        return np.concatenate(out)

    d0_init = (bic.e0 - em_init.e_spe) / MEV
    x0 = np.array([g_init, d0_init, em_init.kappa_spe])
    lower = np.array([0.0, -100.0, 0.0])
    upper = np.array([100.0, 100.0, 50.0])
    x0 = np.clip(x0, lower, upper)
    res = nlls_solve(FitProblem(residual, x0, lower, upper, max_iter=300))
    g, d0, ks = res.params
    diagnostics = list(res.diagnostics)
    em = EmitterParams(e_spe=bic.e0 - d0 * MEV, kappa_spe=ks)
    grid = np.round(np.arange(0, 1501) * 0.01, 10)
    try:
        theta_r, split = rabi_splitting(branch_curves(bic, em, CouplingParams(g), grid))
    except ValueError as exc:
        theta_r, split = float("nan"), float("nan")
        diagnostics.append(f"rabi splitting unavailable: {exc}")
    if np.isfinite(theta_r):
        angles = np.abs(np.concatenate([upb.theta, lpb.theta]))
        if not (np.any(angles < theta_r) and np.any(angles > theta_r)):
            diagnostics.append("warning: traces cover only one side of the anticrossing; uncertainties are wide")
    return CoupledFit(
        g=float(g),
        delta0=float(d0),
        kappa_spe=float(ks),
        stderr={"g": res.stderr[0], "delta0": res.stderr[1], "kappa_spe": res.stderr[2]},
        rabi_theta=theta_r,
        rabi_splitting=split,
        result=res,
        diagnostics=diagnostics,
    )


def _has_errors(*traces):
    for t in traces:
        if not len(t):
            continue
        for err in (t.energy_err, t.fwhm_err):
            if err is None or not np.all(np.isfinite(err)) or not np.all(err > 0):
                return False
    return True


# --------------------------------------------------------- power series


@dataclass
class PowerSeriesFit:
    powers: np.ndarray
    delta_bic: np.ndarray  # meV, per power
    delta_bic_err: np.ndarray
    observed_upb: np.ndarray  # meV shifts relative to the lowest power
    observed_lpb: np.ndarray
    predicted_upb: np.ndarray
    predicted_lpb: np.ndarray
    sum_rule_residual: np.ndarray  # observed dE_UPB + dE_LPB - delta_bic, meV
    diagnostics: list = field(default_factory=list)


def predicted_shifts(bic, emitter, coupling, theta, delta_bic):
    """Exact UPB/LPB shifts (meV) when the cavity alone moves by ``delta_bic`` (meV)."""
    h0 = hamiltonian(bic_energy(bic, theta), bic_fwhm(bic, theta), emitter, coupling)
    up0, lo0 = eigenenergies_numeric(h0)
    out_u, out_l = [], []
    for d in np.atleast_1d(delta_bic):
        h = h0.copy()
        h[0, 0] += d * MEV
        up, lo = eigenenergies_numeric(h)
        out_u.append((up.real - up0.real) / MEV)
        out_l.append((lo.real - lo0.real) / MEV)
    return np.array(out_u), np.array(out_l)


def fit_power_series(powers, e_upb, e_lpb, bic, emitter, coupling, theta):
    """Per-power cavity blueshift from branch energies (eV) observed at a fixed angle.

    The lowest power is the reference; the emitter is held fixed. For each
    other power a single ``delta_bic`` is fitted so that the model's UPB and
    LPB shifts match the observed ones in least squares.
    """
    powers = np.asarray(powers, dtype=float)
    e_upb = np.asarray(e_upb, dtype=float)
    e_lpb = np.asarray(e_lpb, dtype=float)
    if not (powers.size == e_upb.size == e_lpb.size):
        raise ValueError("powers and branch energies differ in length")
    if powers.size == 0:
        raise ValueError("empty power series")
    order = np.argsort(powers)
    powers, e_upb, e_lpb = powers[order], e_upb[order], e_lpb[order]
    obs_u = (e_upb - e_upb[0]) / MEV
    obs_l = (e_lpb - e_lpb[0]) / MEV
    n = powers.size
    delta = np.zeros(n)
    err = np.zeros(n)
    diagnostics = []
    for i in range(1, n):
        target = np.array([obs_u[i], obs_l[i]])

        def residual(x):
            pu, pl = predicted_shifts(bic, emitter, coupling, theta, x[0])
            return np.array([pu[0], pl[0]]) - target

        res = nlls_solve(FitProblem(residual, [obs_u[i] + obs_l[i]], max_iter=100))
        if not res.converged:
            diagnostics.append(f"power {powers[i]:g}: fit did not converge")
        delta[i] = res.params[0]
        err[i] = res.stderr[0]
    pred_u, pred_l = predicted_shifts(bic, emitter, coupling, theta, delta)
    return PowerSeriesFit(
        powers=powers,
        delta_bic=delta,
        delta_bic_err=err,
        observed_upb=obs_u,
        observed_lpb=obs_l,
        predicted_upb=pred_u,
        predicted_lpb=pred_l,
        sum_rule_residual=obs_u + obs_l - delta,
        diagnostics=diagnostics,
    )
