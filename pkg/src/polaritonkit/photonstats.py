"""Second-order correlation: model, Monte Carlo HBT streams, histograms and fits.

Times are in picoseconds unless a name says otherwise.
"""

from dataclasses import dataclass

import numpy as np

from scipy.stats import chi2

from .lsq import FitProblem, FitResult, nlls_solve

PURITY_THRESHOLD = 0.5
DIP_SIGNIFICANCE = 1e-3  # false-alarm probability for declaring a dip


class HistogramError(ValueError):
    """Histogram unsuitable for fitting."""


@dataclass(frozen=True)
class G2Params:
    g2_0: float
    tau0: float  # ps
    baseline: float = 1.0

    def __post_init__(self):
        if self.g2_0 < 0 or not self.tau0 > 0 or not self.baseline > 0:
            raise ValueError(f"invalid g2 parameters {self}")


@dataclass
class G2Histogram:
    bin_width: float
    delays: np.ndarray  # bin centres
    counts: np.ndarray
    normalization: str = "raw"  # raw | normalized

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        self.counts = np.asarray(self.counts)
        if self.delays.shape != self.counts.shape:
            raise HistogramError("delays and counts differ in length")
        if self.delays.size > 1 and not np.allclose(np.diff(self.delays), self.bin_width, rtol=1e-9, atol=1e-9):
            raise HistogramError("bins are not uniform")


@dataclass
class G2Fit:
    params: G2Params | None
    result: FitResult | None
    purity: bool | None  # None when undetermined
    baseline_counts: float
    diagnostics: list


def is_single_photon(g2_0):
    """Purity classification: strictly below the 0.5 threshold."""
    return bool(g2_0 < PURITY_THRESHOLD)


def g2_model(tau, p):
    """``baseline * (1 - (1 - g2_0) * exp(-|tau| / tau0))``."""
    tau = np.asarray(tau, dtype=float)
    out = p.baseline * (1.0 - (1.0 - p.g2_0) * np.exp(-np.abs(tau) / p.tau0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EmitterSource:
    """Pumped two-level emitter with an uncorrelated background.

    Emission events form a renewal process whose waiting time is an
    excitation delay (rate ``pump_rate``) followed by a radiative decay (rate
    ``decay_rate``), which gives ``g2 = 1 - exp(-|tau| (pump + decay))`` for
    the emitter alone. Background photons are Poissonian with rate
    ``background_rate``. All rates are per second.
    """

    pump_rate: float
    decay_rate: float
    background_rate: float = 0.0

    @property
    def emission_rate(self):
        if self.pump_rate <= 0:
            return 0.0
        return self.pump_rate * self.decay_rate / (self.pump_rate + self.decay_rate)

    @property
    def tau0_ps(self):
        return 1e12 / (self.pump_rate + self.decay_rate)

    @property
    def expected_g2_0(self):
        s, b = self.emission_rate, self.background_rate
        if s + b == 0:
            return 1.0
        rho = s / (s + b)
        return 1.0 - rho**2

    @classmethod
    def for_target(cls, g2_0, tau0_ps=2000.0, detected_rate=2e6):
        """Source whose emitter+background mix has the requested ``g2(0)``."""
        rho = np.sqrt(1.0 - g2_0)
        total = 1e12 / tau0_ps
        signal = rho * detected_rate
        # pump * decay / (pump + decay) = signal with pump + decay = total
        disc = total**2 - 4 * signal * total
        if disc < 0:
            raise ValueError("requested rate too high for this lifetime")
        pump = 0.5 * (total - np.sqrt(disc))
        return cls(pump_rate=pump, decay_rate=total - pump, background_rate=detected_rate - signal)


def _emission_times(source, total_time_ps, rng):
    times = []
    if source.pump_rate > 0 and source.emission_rate > 0:
        n_est = int(source.emission_rate * total_time_ps * 1e-12 * 1.1 + 20 * np.sqrt(source.emission_rate * total_time_ps * 1e-12 + 1) + 10)
        waits = rng.exponential(1e12 / source.pump_rate, n_est) + rng.exponential(1e12 / source.decay_rate, n_est)
        t = np.cumsum(waits)
        while t[-1] < total_time_ps:
            more = rng.exponential(1e12 / source.pump_rate, n_est) + rng.exponential(1e12 / source.decay_rate, n_est)
            t = np.concatenate([t, t[-1] + np.cumsum(more)])
        times.append(t[t < total_time_ps])
    if source.background_rate > 0:
        nb = rng.poisson(source.background_rate * total_time_ps * 1e-12)
        times.append(rng.uniform(0, total_time_ps, nb))
    if not times:
        return np.empty(0)
    return np.sort(np.concatenate(times))


def simulate_coincidences(source, total_time, seed, split=0.5, efficiency=1.0, window=20000.0, jitter=0.0):
    """Start-to-stop delays (ps) between the two arms of a beam-splitter HBT.

    ``total_time`` is in seconds. Every photon is detected with probability
    ``efficiency`` and routed to arm A with probability ``split``. All pairs
    with ``|t_B - t_A| <= window`` are returned, which matches a multi-stop
    correlator. ``jitter`` is an optional Gaussian timing spread (ps, per
    detection).
    """
    rng = np.random.default_rng(seed)
    t = _emission_times(source, total_time * 1e12, rng)
    if t.size == 0:
        return np.empty(0)
    t = t[rng.random(t.size) < efficiency]
    if jitter > 0:
        t = t + rng.normal(0.0, jitter, t.size)
    to_a = rng.random(t.size) < split
    ta, tb = np.sort(t[to_a]), np.sort(t[~to_a])
    lo = np.searchsorted(tb, ta - window, side="left")
    hi = np.searchsorted(tb, ta + window, side="right")
    counts = hi - lo
    if counts.sum() == 0:
        return np.empty(0)
    starts = np.repeat(np.arange(ta.size), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    stops = np.repeat(lo, counts) + offsets
    return tb[stops] - ta[starts]


def histogram_delays(delays, bin_width=64.0, range_ps=20000.0):
    """Histogram with one bin centred on zero delay, symmetric to ``+-range_ps``."""
    if not bin_width > 0:
        raise HistogramError("bin width must be > 0")
    n_half = int(np.floor(range_ps / bin_width - 0.5))
    edges = (np.arange(-n_half, n_half + 2) - 0.5) * bin_width
    counts, _ = np.histogram(np.asarray(delays, dtype=float), bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return G2Histogram(bin_width=float(bin_width), delays=centers, counts=counts)


def fit_g2(hist, tau0_init=None, outer_fraction=0.2):
    """Fit the antibunching dip of a histogram.

    Counts are normalised by the mean of the outer ``outer_fraction`` of bins
    (half on each side) and fitted with Poisson weights. The dip model is
    tested against a flat ``g2 = 1`` fit by a likelihood-ratio (chi-square,
    two extra parameters) test; without a significant dip the flat model is
    reported (``g2_0 = 1``). Purity is ``g2_0 < 0.5`` when the fit converges
    and ``None`` when it does not.
    """
    tau = hist.delays
    counts = np.asarray(hist.counts, dtype=float)
    if tau.size < 10:
        raise HistogramError(f"need at least 10 bins, got {tau.size}")
    n_out = max(1, int(round(outer_fraction * tau.size / 2)))
    order = np.argsort(np.abs(tau))
    outer = order[-2 * n_out :]
    base_counts = float(counts[outer].mean())
    if base_counts <= 0:
        raise HistogramError("outer bins are empty; cannot normalise")
    y = counts / base_counts
    # Poisson weights from raw counts; empty bins get unit count
    sigma = np.sqrt(np.maximum(counts, 1.0)) / base_counts
    span = float(np.max(np.abs(tau)))
    if tau0_init is None:
        dip = 1.0 - y
        core = np.abs(tau) < span / 3
        area = np.sum(np.clip(dip[core], 0, None)) * hist.bin_width
        depth = max(float(dip[order[:3]].mean()), 0.05)
        tau0_init = np.clip(area / (2 * depth), 2 * hist.bin_width, span / 3)
    g0_init = float(np.clip(y[order[:3]].mean(), 0.0, 2.0))
    x0 = np.array([g0_init, tau0_init, 1.0])
    lower = [0.0, 0.25 * hist.bin_width, 0.0]
    upper = [np.inf, span, np.inf]
    diagnostics = []

    def residual(x):
        return (g2_model(tau, G2Params(x[0], x[1], max(x[2], 1e-12))) - y) / sigma

    res = nlls_solve(FitProblem(residual, x0, lower, upper, max_iter=300))
    g0, t0, base = res.params
    # flat alternative: weighted mean of the normalised counts
    w = 1.0 / sigma**2
    flat = float(np.sum(w * y) / np.sum(w))
    chi2_flat = float(np.sum(((y - flat) / sigma) ** 2))
    chi2_dip = res.residual_norm**2
    if res.converged and chi2_flat - chi2_dip < chi2.isf(DIP_SIGNIFICANCE, 2):
        diagnostics.append(
            f"no significant antibunching dip (free fit g2_0={g0:.4g}); flat model reported"
        )
        g0, base = 1.0, flat
    if 3 * t0 > span:
        diagnostics.append(f"fitted tau0={t0:.4g} ps not covered three times by the histogram range")
    if not res.converged:
        diagnostics.append("fit did not converge; purity undetermined")
        return G2Fit(G2Params(g0, t0, base), res, None, base_counts, diagnostics + res.diagnostics)
    params = G2Params(float(g0), float(t0), float(base))
    return G2Fit(params, res, is_single_photon(params.g2_0), base_counts, diagnostics + res.diagnostics)


def count_matching_emitters(zpl_list, center, halfwidth=2.0):
    """Emitters with ZPL (eV) inside ``center +- halfwidth`` (meV), inclusive."""
    if not halfwidth > 0:
        raise ValueError("halfwidth must be > 0")
    z = np.asarray(zpl_list, dtype=float)
    return int(np.count_nonzero(np.abs(z - center) <= halfwidth * 1e-3))
