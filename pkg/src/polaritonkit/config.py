"""Run configuration: JSON file with one group per module, validated strictly."""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

from .dispersion import BicDispersionParams, DomainError
from .polariton import CouplingParams, EmitterParams
from .spectra import ConfigError, NoiseSpec

SEED_ENV = "POLARITONKIT_SEED"


@dataclass
class SpectraConfig:
    theta_min: float = -8.0
    theta_max: float = 8.0
    theta_step: float = 0.1
    energy_halfwidth: float = 20.0  # meV around e0
    energy_step: float = 0.1  # meV
    scale: float = 1000.0
    offset: float = 0.0
    noise: str = "none"
    noise_sigma: float = 0.01


@dataclass
class FitConfig:
    exclusion_halfwidth: float = 0.5  # deg
    min_snr: float = 3.0
    g_init: float = 1.5  # meV
    delta0_init: float = 0.5  # meV
    kappa_spe_init: float = 1.0  # meV
    power_theta: float = -2.56  # deg, angle used for power series


@dataclass
class PhotonStatsConfig:
    bin_width: float = 64.0  # ps
    range_ps: float = 20000.0
    g2_0: float = 0.28
    tau0_ps: float = 2000.0
    detected_rate: float = 4e6  # 1/s, both arms together
    total_time: float = 1.0  # s
    census_halfwidth: float = 2.0  # meV


@dataclass
class RunConfig:
    dispersion: dict = field(default_factory=dict)
    emitter: dict = field(default_factory=dict)
    coupling: dict = field(default_factory=dict)
    spectra: SpectraConfig = field(default_factory=SpectraConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    photonstats: PhotonStatsConfig = field(default_factory=PhotonStatsConfig)
    seed: int | None = None
    alpha_units: str | None = None
    output_dir: str = "."

    # resolved model objects
    def bic(self):
        kw = dict(self.dispersion)
        if self.alpha_units is not None:
            kw["alpha_units"] = self.alpha_units
        return _build(BicDispersionParams, kw, "dispersion")

    def emitter_params(self):
        kw = dict(self.emitter)
        if "delta0" in kw:
            d0 = kw.pop("delta0")
            kw["e_spe"] = self.bic().e0 - d0 * 1e-3
        return _build(EmitterParams, kw, "emitter")

    def coupling_params(self):
        return _build(CouplingParams, dict(self.coupling), "coupling")

    def noise(self):
        return NoiseSpec(self.spectra.noise, self.spectra.noise_sigma)

    def resolved_seed(self):
        if self.seed is not None:
            return int(self.seed)
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                return int(env)
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}")
        return 0

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["seed"] = self.resolved_seed()
        return d

    def digest(self):
        """Hash of everything that affects results (the output location does not)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self):
        self.bic()
        self.emitter_params()
        self.coupling_params()
        self.noise()
        s = self.spectra
        if not s.theta_step > 0 or not s.energy_step > 0 or not s.energy_halfwidth > 0:
            raise ConfigError("spectra: steps and energy_halfwidth must be > 0")
        if s.theta_max <= s.theta_min:
            raise ConfigError("spectra: theta_max must exceed theta_min")
        if s.scale < 0 or s.offset < 0:
            raise ConfigError("spectra: scale and offset must be >= 0")
        if self.fit.exclusion_halfwidth < 0:
            raise ConfigError("fit: exclusion_halfwidth must be >= 0")
        ps = self.photonstats
        if not ps.bin_width > 0 or not ps.range_ps > ps.bin_width:
            raise ConfigError("photonstats: need 0 < bin_width < range_ps")
        if not 0 <= ps.g2_0 < 1:
            raise ConfigError("photonstats: g2_0 must be in [0, 1)")
        if not ps.census_halfwidth > 0:
            raise ConfigError("photonstats: census_halfwidth must be > 0")
        return self


_MODEL_KEYS = {
    "dispersion": {f.name for f in dataclasses.fields(BicDispersionParams)},
    "emitter": {f.name for f in dataclasses.fields(EmitterParams)} | {"delta0"},
    "coupling": {f.name for f in dataclasses.fields(CouplingParams)},
}
_GROUPS = {"spectra": SpectraConfig, "fit": FitConfig, "photonstats": PhotonStatsConfig}
_TOP = {"dispersion", "emitter", "coupling", "spectra", "fit", "photonstats", "seed", "alpha_units", "output_dir"}


def _build(cls, kw, group):
    try:
        return cls(**kw)
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"{group}: {exc}") from None


def _check_number(group, key, value, default):
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{group}.{key}: expected a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{group}.{key}: expected a number, got {value!r}")
    return float(value)


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - _TOP
    if unknown:
        raise ConfigError(f"unknown config key: {sorted(unknown)[0]}")
    cfg = RunConfig()
    for group, keys in _MODEL_KEYS.items():
        sub = data.get(group, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{group}: expected an object")
        bad = set(sub) - keys
        if bad:
            raise ConfigError(f"unknown config key: {group}.{sorted(bad)[0]}")
        clean = {}
        for k, v in sub.items():
            if k in ("alpha_units",):
                if v not in ("meV", "eV"):
                    raise ConfigError(f"{group}.{k}: must be 'meV' or 'eV'")
                clean[k] = v
            elif v is None and k == "lambda_ref":
                clean[k] = None
            else:
                clean[k] = _check_number(group, k, v, 0.0)
        setattr(cfg, group, clean)
    for group, cls in _GROUPS.items():
        sub = data.get(group, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{group}: expected an object")
        obj = cls()
        names = {f.name for f in dataclasses.fields(cls)}
        for k, v in sub.items():
            if k not in names:
                raise ConfigError(f"unknown config key: {group}.{k}")
            setattr(obj, k, _check_number(group, k, v, getattr(obj, k)))
        setattr(cfg, group, obj)
    if "seed" in data:
        if isinstance(data["seed"], bool) or not isinstance(data["seed"], int):
            raise ConfigError("seed: expected an integer")
        cfg.seed = data["seed"]
    if "alpha_units" in data:
        if data["alpha_units"] not in ("meV", "eV"):
            raise ConfigError("alpha_units: must be 'meV' or 'eV'")
        cfg.alpha_units = data["alpha_units"]
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str):
            raise ConfigError("output_dir: expected a string")
        cfg.output_dir = data["output_dir"]
    return cfg.validate()


def load_config(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(data)
