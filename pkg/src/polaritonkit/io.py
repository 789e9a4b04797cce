"""Plain-text file formats. All numeric output uses 17 significant digits."""

import csv
import json
import os
import tempfile

import numpy as np

from . import __version__
from .fitting import BranchTrace
from .photonstats import G2Histogram
from .spectra import SpectralMap

MAP_HEADER = ("angle_deg", "energy_eV", "intensity")


class DataFormatError(ValueError):
    """A data file does not follow the expected layout."""


def fmt(x):
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def header_lines(config_hash, seed):
    return [f"# polaritonkit {__version__}", f"# config_sha256={config_hash}", f"# seed={seed}"]


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, columns, rows, config_hash="", seed=0):
    lines = header_lines(config_hash, seed)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def read_table(path):
    """Return ``(columns, rows)`` skipping ``#`` comment lines; rows are string lists."""
    with open(path, newline="") as fh:
        body = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not body:
        raise DataFormatError(f"{path}: no header line")
    reader = csv.reader(body)
    columns = [c.strip() for c in next(reader)]
    rows = [r for r in reader]
    for i, r in enumerate(rows):
        if len(r) != len(columns):
            raise DataFormatError(f"{path}: row {i + 1} has {len(r)} fields, expected {len(columns)}")
    return columns, rows


def _numeric(path, columns, rows, wanted):
    missing = [w for w in wanted if w not in columns]
    if missing:
        raise DataFormatError(f"{path}: missing column {missing[0]!r}")
    idx = [columns.index(w) for w in wanted]
    try:
        return [np.array([float(r[i]) for r in rows]) for i in idx]
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_map(path, smap, config_hash="", seed=0):
    th, en = np.meshgrid(smap.thetas, smap.energies, indexing="ij")
    rows = zip(th.ravel(), en.ravel(), smap.intensities.ravel())
    write_table(path, MAP_HEADER, rows, config_hash, seed)


def read_map(path):
    columns, rows = read_table(path)
    if tuple(columns) != MAP_HEADER:
        raise DataFormatError(f"{path}: header must be {','.join(MAP_HEADER)}")
    th, en, inten = _numeric(path, columns, rows, MAP_HEADER)
    thetas = np.unique(th)
    energies = np.unique(en)
    if thetas.size * energies.size != th.size:
        raise DataFormatError(f"{path}: map is not a full rectangular grid")
    i = np.searchsorted(thetas, th)
    j = np.searchsorted(energies, en)
    grid = np.full((thetas.size, energies.size), np.nan)
    grid[i, j] = inten
    if np.isnan(grid).any():
        raise DataFormatError(f"{path}: duplicate or missing grid cells")
    return SpectralMap(thetas, energies, grid, {"source": os.path.basename(path)})


def write_branches(path, branches, config_hash="", seed=0):
    cols = ("angle_deg", "branch", "energy_eV", "fwhm_meV", "w_bic", "w_spe")
    rows = ((b.theta, b.branch_id, b.energy, b.fwhm, b.w_bic, b.w_spe) for b in branches)
    write_table(path, cols, rows, config_hash, seed)


TRACE_COLUMNS = ("angle_deg", "energy_eV", "fwhm_meV", "amplitude", "energy_err_eV", "fwhm_err_meV")


def write_trace(path, trace, config_hash="", seed=0):
    n = len(trace)
    amp = trace.amplitude if trace.amplitude is not None else np.full(n, np.nan)
    ee = trace.energy_err if trace.energy_err is not None else np.full(n, np.nan)
    fe = trace.fwhm_err if trace.fwhm_err is not None else np.full(n, np.nan)
    rows = zip(trace.theta, trace.energy, trace.fwhm, amp, ee, fe)
    write_table(path, TRACE_COLUMNS, rows, config_hash, seed)


def read_trace(path, branch_id=""):
    """Trace file with at least ``angle_deg,energy_eV,fwhm_meV``."""
    columns, rows = read_table(path)
    th, e, w = _numeric(path, columns, rows, ("angle_deg", "energy_eV", "fwhm_meV"))
    order = np.argsort(th)
    extra = {}
    for name, col in (("amplitude", "amplitude"), ("energy_err", "energy_err_eV"), ("fwhm_err", "fwhm_err_meV")):
        if col in columns:
            (vals,) = _numeric(path, columns, rows, (col,))
            extra[name] = vals[order]
    amp = extra.pop("amplitude", np.full(th.size, np.nan))
    return BranchTrace(branch_id, th[order], e[order], w[order], amp, **extra)


def write_histogram(path, hist, config_hash="", seed=0):
    write_table(path, ("delay_ps", "count"), zip(hist.delays, hist.counts), config_hash, seed)


def read_histogram(path):
    columns, rows = read_table(path)
    d, c = _numeric(path, columns, rows, ("delay_ps", "count"))
    order = np.argsort(d)
    d, c = d[order], c[order]
    width = float(np.median(np.diff(d))) if d.size > 1 else 1.0
    return G2Histogram(bin_width=width, delays=d, counts=c)


def write_delays(path, delays, config_hash="", seed=0):
    write_table(path, ("delay_ps", "count"), ((d, 1) for d in delays), config_hash, seed)


def read_delays(path):
    """Delay list; a ``count`` column, when present, repeats each delay."""
    columns, rows = read_table(path)
    (d,) = _numeric(path, columns, rows, ("delay_ps",))
    if "count" in columns:
        (c,) = _numeric(path, columns, rows, ("count",))
        d = np.repeat(d, c.astype(int))
    return d


def write_json(path, payload):
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")
