"""``polaritonkit`` command line.

Exit codes: 0 success, 2 configuration error, 3 data or fit diagnostic,
4 I/O error.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from . import io as pio
from .config import SEED_ENV, RunConfig, load_config
from .constants import MEV
from .dispersion import DomainError, bic_energy, bic_fwhm
from .fitting import (
    ExtractionError,
    InitializationError,
    extract_branches,
    fit_bic_dispersion,
    fit_coupled_oscillator,
    fit_lorentzian,
    fit_power_series,
)
from .lsq import FitError
from .photonstats import (
    EmitterSource,
    HistogramError,
    fit_g2,
    g2_model,
    histogram_delays,
    simulate_coincidences,
)
from .polariton import CouplingParams, branch_curves, strong_coupling_check
from .spectra import ConfigError, SimulationModel, synth_map

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_IO = 0, 2, 3, 4

PRECEDENCE = (
    "Settings are resolved as: command-line flags > --config JSON file > "
    f"built-in defaults. The seed falls back to ${SEED_ENV}, then 0."
)


class DataError(RuntimeError):
    pass


def _config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig().validate()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def _out(cfg, name):
    return os.path.join(cfg.output_dir, name)


def _meta(cfg):
    return {"tool": "polaritonkit", "version": __version__, "config_sha256": cfg.digest(), "seed": cfg.resolved_seed()}


def _grids(cfg):
    s = cfg.spectra
    n_th = int(round((s.theta_max - s.theta_min) / s.theta_step))
    thetas = np.round(s.theta_min + np.arange(n_th + 1) * s.theta_step, 10)
    n_e = int(round(s.energy_halfwidth / s.energy_step))
    energies = cfg.bic().e0 + np.arange(-n_e, n_e + 1) * s.energy_step * MEV
    return thetas, energies


# ----------------------------------------------------------------- commands


def cmd_simulate(args):
    cfg = _config(args)
    if args.g is not None:
        cfg.coupling = {**cfg.coupling, "g": args.g}
    if args.noise is not None:
        cfg.spectra.noise = args.noise
    cfg.validate()
    model = SimulationModel(cfg.bic(), cfg.emitter_params(), cfg.coupling_params(), cfg.spectra.scale, cfg.spectra.offset)
    thetas, energies = _grids(cfg)
    seed = cfg.resolved_seed()
    smap = synth_map(model, thetas, energies, cfg.noise(), seed)
    h = cfg.digest()
    pio.write_map(_out(cfg, "map.csv"), smap, h, seed)
    pio.write_branches(_out(cfg, "branches.csv"), branch_curves(model.bic, model.emitter, model.coupling, thetas), h, seed)
    print(f"wrote {_out(cfg, 'map.csv')} ({thetas.size} angles x {energies.size} energies) and branches.csv")
    return EXIT_OK


def cmd_fit_dispersion(args):
    cfg = _config(args)
    tr = pio.read_trace(args.trace)
    units = cfg.alpha_units or cfg.dispersion.get("alpha_units", "meV")
    params, res = fit_bic_dispersion(tr.theta, tr.energy, tr.fwhm, alpha_units=units)
    seed = cfg.resolved_seed()
    e_fit = bic_energy(params, tr.theta)
    k_fit = bic_fwhm(params, tr.theta)
    payload = {
        **_meta(cfg),
        "params": {"e0": params.e0, "u": params.u, "v": params.v, "kappa_inf": params.kappa_inf,
                   "alpha": params.alpha, "alpha_units": params.alpha_units, "lambda_ref": params.lambda_ref},
        "stderr": dict(zip(("e0", "u", "v", "kappa_inf", "alpha"), res.stderr.tolist())),
        "residual_norm": res.residual_norm,
        "iterations": res.iterations,
        "converged": res.converged,
        "diagnostics": res.diagnostics,
    }
    pio.write_json(_out(cfg, "dispersion_fit.json"), payload)
    rows = zip(tr.theta, tr.energy, e_fit, tr.energy - e_fit, tr.fwhm, k_fit, tr.fwhm - k_fit)
    pio.write_table(_out(cfg, "dispersion_residuals.csv"),
                    ("angle_deg", "energy_eV", "energy_fit_eV", "energy_resid_eV", "fwhm_meV", "fwhm_fit_meV", "fwhm_resid_meV"),
                    rows, cfg.digest(), seed)
    print(f"U={params.u:.6g} eV v={params.v:.6g} eV*um kappa_inf={params.kappa_inf:.6g} meV alpha={params.alpha:.6g} {params.alpha_units}*um^2")
    return EXIT_OK if res.converged else EXIT_DATA


def cmd_fit_polariton(args):
    cfg = _config(args)
    smap = pio.read_map(args.map)
    f = cfg.fit
    upb, lpb, diag = extract_branches(smap, f.exclusion_halfwidth, f.min_snr)
    bic = cfg.bic()
    em0 = cfg.emitter_params()
    em_init = type(em0)(e_spe=bic.e0 - f.delta0_init * MEV, kappa_spe=f.kappa_spe_init)
    fit = fit_coupled_oscillator(upb, lpb, bic, em_init, f.g_init)
    seed = cfg.resolved_seed()
    h = cfg.digest()
    payload = {
        **_meta(cfg),
        "g_meV": fit.g,
        "delta0_meV": fit.delta0,
        "kappa_spe_meV": fit.kappa_spe,
        "stderr_meV": fit.stderr,
        "rabi_splitting_meV": fit.rabi_splitting,
        "rabi_theta_deg": fit.rabi_theta,
        "n_points": {"UPB": len(upb), "LPB": len(lpb)},
        "converged": fit.result.converged,
        "diagnostics": fit.diagnostics,
        "extraction_diagnostics": diag,
    }
    pio.write_json(_out(cfg, "polariton_fit.json"), payload)
    pio.write_trace(_out(cfg, "upb_trace.csv"), upb, h, seed)
    pio.write_trace(_out(cfg, "lpb_trace.csv"), lpb, h, seed)
    print(f"g = {fit.g:.4f} +- {fit.stderr['g']:.2g} meV, delta0 = {fit.delta0:.4f} meV, "
          f"kappa_spe = {fit.kappa_spe:.4f} meV")
    print(f"Rabi splitting = {fit.rabi_splitting:.3f} meV at |theta| = {fit.rabi_theta:.3f} deg")
    return EXIT_OK if fit.result.converged else EXIT_DATA


def _branch_energies_at(smap, theta):
    i = int(np.argmin(np.abs(smap.thetas - theta)))
    peaks, res = fit_lorentzian(smap.energies, smap.intensities[i], 2)
    if not res.converged:
        raise DataError(f"double-Lorentzian fit failed at theta={smap.thetas[i]:g}")
    return smap.thetas[i], peaks[1].center, peaks[0].center


def cmd_power_series(args):
    cfg = _config(args)
    manifest = args.manifest or os.path.join(args.directory, "manifest.csv")
    columns, rows = pio.read_table(manifest)
    if columns[:2] != ["power_kw_cm2", "map_file"]:
        raise ConfigError("manifest header must be power_kw_cm2,map_file")
    listed = [r[1].strip() for r in rows]
    present = {f for f in os.listdir(args.directory) if f.endswith(".csv") and f != os.path.basename(manifest)}
    missing = [f for f in listed if f not in present]
    if missing:
        raise ConfigError(f"manifest/power mismatch: {missing[0]} not found in {args.directory}")
    if len(set(listed)) != len(listed):
        raise ConfigError("manifest/power mismatch: a map file is listed twice")
    try:
        powers = np.array([float(r[0]) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"manifest: {exc}") from None
    if len(set(powers.tolist())) != powers.size:
        raise ConfigError("manifest/power mismatch: duplicate power values")
    theta = cfg.fit.power_theta if args.theta is None else args.theta
    e_up, e_lo, used = [], [], []
    for f in listed:
        th, eu, el = _branch_energies_at(pio.read_map(os.path.join(args.directory, f)), theta)
        e_up.append(eu)
        e_lo.append(el)
        used.append(th)
    bic, em, cp = cfg.bic(), cfg.emitter_params(), cfg.coupling_params()
    ps = fit_power_series(powers, e_up, e_lo, bic, em, cp, float(used[0]))
    seed = cfg.resolved_seed()
    rows = zip(ps.powers, ps.delta_bic, ps.delta_bic_err, ps.observed_upb, ps.observed_lpb,
               ps.predicted_upb, ps.predicted_lpb, ps.sum_rule_residual)
    pio.write_table(_out(cfg, "power_series.csv"),
                    ("power_kw_cm2", "delta_bic_meV", "delta_bic_err_meV", "obs_shift_upb_meV", "obs_shift_lpb_meV",
                     "pred_shift_upb_meV", "pred_shift_lpb_meV", "sum_rule_residual_meV"),
                    rows, cfg.digest(), seed)
    print(f"fitted cavity blueshift at the highest power: {ps.delta_bic[-1]:.4f} meV (theta={used[0]:g} deg)")
    return EXIT_OK


def cmd_simulate_g2(args):
    cfg = _config(args)
    ps = cfg.photonstats
    g2_0 = ps.g2_0 if args.g2_0 is None else args.g2_0
    if args.poissonian:
        source = EmitterSource(pump_rate=0.0, decay_rate=1.0, background_rate=ps.detected_rate)
    else:
        source = EmitterSource.for_target(g2_0, ps.tau0_ps, ps.detected_rate)
    seed = cfg.resolved_seed()
    delays = simulate_coincidences(source, ps.total_time, seed, window=ps.range_ps)
    hist = histogram_delays(delays, ps.bin_width, ps.range_ps)
    pio.write_histogram(_out(cfg, "g2_histogram.csv"), hist, cfg.digest(), seed)
    print(f"{delays.size} coincidences -> {_out(cfg, 'g2_histogram.csv')}")
    return EXIT_OK


def cmd_g2(args):
    cfg = _config(args)
    ps = cfg.photonstats
    if args.histogram:
        hist = pio.read_histogram(args.histogram)
    else:
        hist = histogram_delays(pio.read_delays(args.delays), ps.bin_width, ps.range_ps)
    fit = fit_g2(hist)
    seed = cfg.resolved_seed()
    p = fit.params
    payload = {
        **_meta(cfg),
        "g2_0": p.g2_0,
        "tau0_ps": p.tau0,
        "baseline": p.baseline,
        "stderr": dict(zip(("g2_0", "tau0_ps", "baseline"), fit.result.stderr.tolist())),
        "purity": fit.purity,
        "threshold": 0.5,
        "baseline_counts": fit.baseline_counts,
        "converged": fit.result.converged,
        "diagnostics": fit.diagnostics,
    }
    pio.write_json(_out(cfg, "g2_fit.json"), payload)
    norm = np.asarray(hist.counts, float) / fit.baseline_counts
    rows = zip(hist.delays, hist.counts, norm, g2_model(hist.delays, p))
    pio.write_table(_out(cfg, "g2_curve.csv"), ("delay_ps", "count", "g2_measured", "g2_fit"), rows, cfg.digest(), seed)
    verdict = {True: "single-photon emitter", False: "not a single-photon emitter", None: "undetermined"}[fit.purity]
    print(f"g2(0) = {p.g2_0:.4f}: {verdict}")
    return EXIT_OK if fit.purity is not None else EXIT_DATA


def cmd_check_coupling(args):
    v = strong_coupling_check(args.g, args.kappa_cav, args.kappa_spe)
    word = "strong coupling" if v.strong else "weak coupling"
    print(f"{word}: g={args.g:g} meV, threshold={abs(args.kappa_cav - args.kappa_spe) / 2:g} meV, margin={v.margin:g} meV")
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="polaritonkit", description=__doc__.splitlines()[0], epilog=PRECEDENCE)
    parser.add_argument("--version", action="version", version=f"polaritonkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help=f"RNG seed (overrides config, falls back to ${SEED_ENV})")
        p.add_argument("--out", help="output directory (default: config output_dir or .)")

    p = sub.add_parser("simulate", help="synthesize an angle-resolved PL map", epilog=PRECEDENCE)
    common(p)
    p.add_argument("--g", type=float, help="coupling strength in meV")
    p.add_argument("--noise", choices=["none", "gaussian", "poisson"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-dispersion", help="fit the cavity band and loss to a trace file", epilog=PRECEDENCE)
    common(p)
    p.add_argument("trace", help="CSV with angle_deg,energy_eV,fwhm_meV")
    p.set_defaults(func=cmd_fit_dispersion)

    p = sub.add_parser("fit-polariton", help="extract branches from a map and fit the coupled oscillator", epilog=PRECEDENCE)
    common(p)
    p.add_argument("map", help="map CSV (angle_deg,energy_eV,intensity)")
    p.set_defaults(func=cmd_fit_polariton)

    p = sub.add_parser("power-series", help="fit cavity blueshift per excitation power", epilog=PRECEDENCE)
    common(p)
    p.add_argument("directory", help="directory holding the maps")
    p.add_argument("--manifest", help="CSV power_kw_cm2,map_file (default: DIRECTORY/manifest.csv)")
    p.add_argument("--theta", type=float, help="angle (deg) at which branch energies are read")
    p.set_defaults(func=cmd_power_series)

    p = sub.add_parser("simulate-g2", help="Monte Carlo HBT coincidence histogram", epilog=PRECEDENCE)
    common(p)
    p.add_argument("--g2-0", type=float, dest="g2_0")
    p.add_argument("--poissonian", action="store_true", help="uncorrelated source instead of an emitter")
    p.set_defaults(func=cmd_simulate_g2)

    p = sub.add_parser("g2", help="fit g2(tau) and classify single-photon purity", epilog=PRECEDENCE)
    common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--histogram", help="CSV delay_ps,count (bin centres)")
    src.add_argument("--delays", help="CSV delay_ps[,count] of raw start-stop delays")
    p.set_defaults(func=cmd_g2)

    p = sub.add_parser("check-coupling", help="strong-coupling criterion g >= |kappa_cav - kappa_spe|/2")
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--kappa-cav", type=float, required=True, dest="kappa_cav")
    p.add_argument("--kappa-spe", type=float, required=True, dest="kappa_spe")
    p.set_defaults(func=cmd_check_coupling)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pio.DataFormatError, ExtractionError, InitializationError, HistogramError, FitError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
