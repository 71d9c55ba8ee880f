"""
YAML configuration: sections gas, source, detector, model, simulation, fit
and mcnrs, plus a top-level ``profile``. Omitted keys take their defaults;
the list of defaulted keys is kept so the effective configuration can be
echoed next to every output.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .core import GasState, IsotopeMix, NATURAL_NEON, PROFILES, ValidationError, get_constants
from .detection import DEFAULT_WINDOWS, DetectorSpec, SourceSpec
from .mcnrs import GAMMA_ENERGY_NE22, MSD_DEFAULT, N_BAR_DEFAULT, ResonanceParameters
from .montecarlo import AnnihilationModel, Shoulder, SimulationConfig
from .analysis.fitting import FitModelSpec

SECTIONS = ("gas", "source", "detector", "model", "simulation", "fit", "mcnrs")


class ConfigError(ValueError):
    """Unreadable or malformed configuration; carries file line and field when known."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None,
                 source: str | None = None):
        self.line = line
        self.field = field
        where = source or "<config>"
        if line is not None:
            where += f":{line}"
        if field is not None:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class McnrsSettings:
    """Inputs of the closed-form estimates; ``mean_square_displacement`` in cm^2."""

    n_bar: float = N_BAR_DEFAULT
    mean_square_displacement: float = MSD_DEFAULT
    spin_ground: float = 0.0
    spin_excited: float = 2.0
    mass_ratio: float = 0.0


@dataclass(frozen=True)
class Config:
    gas: GasState = field(default_factory=GasState)
    source: SourceSpec = field(default_factory=SourceSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    model: AnnihilationModel = field(default_factory=AnnihilationModel)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    fit: FitModelSpec = field(default_factory=lambda: FitModelSpec(
        n_components=1, fit_window=(50.0, 1000.0), start_delay=SourceSpec().nuclear_lifetime_ns))
    mcnrs: McnrsSettings = field(default_factory=McnrsSettings)
    profile: str = "paper"
    defaulted: tuple = ()

    @property
    def constants(self):
        return get_constants(self.profile)

    def resonance(self) -> ResonanceParameters:
        return ResonanceParameters(
            gamma_energy=self.source.nuclear_gamma_energy,
            spin_ground=self.mcnrs.spin_ground,
            spin_excited=self.mcnrs.spin_excited,
            mean_square_displacement=self.mcnrs.mean_square_displacement,
            constants=self.constants,
        )

    def to_dict(self) -> dict:
        return config_to_dict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Config):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.digest())


# Field name -> (type, default). Nested blocks use their own schema.
_SCHEMA = {
    "gas": {
        "pressure": (float, 50.0),
        "chamber_radius": (float, 2.0),
        "fractions": (dict, dict(NATURAL_NEON)),
        "resonant_isotope": (str, "Ne-22"),
    },
    "source": {
        "activity": (float, 1e5),
        "nuclear_gamma_energy": (float, GAMMA_ENERGY_NE22),
        "nuclear_lifetime": (float, 5.24),
        "label": (str, "Na-22"),
    },
    "detector": {
        "eff_low": (float, 0.3),
        "eff_high": (float, 0.2),
        "solid_angle_high": (float, 0.1),
        "solid_angle_low_mean": (float, 0.05),
        "resolving_time": (float, 1.0),
        "timing_fwhm": (float, 0.3),
        "energy_fwhm_511": (float, 0.10),
        "windows": (dict, {k: list(v) for k, v in DEFAULT_WINDOWS.items()}),
    },
    "model": {
        "intensity_para": (float, 0.25),
        "intensity_ortho": (float, 0.35),
        "intensity_free": (float, 0.40),
        "rate_para": (float, 8.0),
        "rate_ortho_3gamma": (float, 7.03830),
        "anomaly_branching": (float, 1.847e-3),
        "rate_free": (float, 0.25),
        "shoulder": ({"enabled": (bool, True), "rise_time": (float, 3.0)}, None),
        "continuum": (str, "uniform"),
    },
    "simulation": {
        "n_events": (int, 1_000_000),
        "t_min": (float, -20.0),
        "t_max": (float, 1000.0),
        "bins": (int, 1200),
        "seed": (int, 0),
        "chunk_size": (int, 1_000_000),
        "energy_max": (float, 1600.0),
        "energy_bins": (int, 400),
        "delay_windows": (dict, {"prompt": [-20.0, 50.0], "late": [50.0, 1000.0]}),
        "apply_response": (bool, True),
        "random_scale": (float, 1.0),
        "workers": (int, 1),
    },
    "fit": {
        "n_components": (int, 1),
        "fixed_rates": (list, None),
        "background_free": (bool, True),
        "background_level": (float, None),
        "response_fwhm": (float, None),
        "response_free": (bool, False),
        "time_zero": (float, 0.0),
        "time_zero_free": (bool, False),
        "start_delay": (float, None),
        "fit_window": (list, [50.0, 1000.0]),
        "variance_model": (str, "poisson"),
        "max_iterations": (int, 200),
    },
    "mcnrs": {
        "n_bar": (float, N_BAR_DEFAULT),
        "mean_square_displacement": (float, MSD_DEFAULT),
        "spin_ground": (float, 0.0),
        "spin_excited": (float, 2.0),
        "mass_ratio": (float, 0.0),
    },
}


def _coerce(value, kind, name):
    if value is None:
        return None
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind is dict:
            if not isinstance(value, dict):
                raise TypeError
            return dict(value)
        if kind is list:
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return list(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", field=name) from None
    raise AssertionError(kind)


def _fill(raw: dict, schema: dict, prefix: str, defaulted: list) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"section must be a mapping, got {type(raw).__name__}", field=prefix)
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}; allowed {sorted(schema)}",
                          field=f"{prefix}.{sorted(unknown)[0]}")
    out = {}
    for key, (kind, default) in schema.items():
        name = f"{prefix}.{key}"
        if isinstance(kind, dict):
            if key not in raw:
                defaulted.append(name)
            out[key] = _fill(raw.get(key), kind, name, defaulted if key in raw else [])
            continue
        if key in raw:
            out[key] = _coerce(raw[key], kind, name)
        else:
            defaulted.append(name)
            out[key] = json.loads(json.dumps(default))
    return out


def _build(values: dict, profile: str, defaulted: tuple) -> Config:
    g, s, d, m, sim, f, mc = (values[k] for k in SECTIONS)
    gas = GasState(g["pressure"], g["chamber_radius"], IsotopeMix(g["fractions"]), g["resonant_isotope"])
    source = SourceSpec(**s)
    detector = DetectorSpec(**d)
    shoulder = Shoulder(**m.pop("shoulder"))
    model = AnnihilationModel(shoulder=shoulder, **m)
    simulation = SimulationConfig(**sim)
    fit_kw = dict(f)
    if fit_kw["response_fwhm"] is None:
        fit_kw["response_fwhm"] = detector.timing_fwhm
    if fit_kw["start_delay"] is None:
        fit_kw["start_delay"] = source.nuclear_lifetime_ns
    for key in ("fixed_rates", "fit_window"):
        if fit_kw[key] is not None:
            fit_kw[key] = tuple(fit_kw[key])
    try:
        fit = FitModelSpec(**fit_kw)
    except ValueError as exc:
        raise ValidationError("fit", str(exc)) from None
    return Config(gas, source, detector, model, simulation, fit, McnrsSettings(**mc), profile, defaulted)


def build_config(raw: dict | None, *, source: str | None = None) -> Config:
    """Validate a parsed mapping and apply defaults."""
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", source=source)
    unknown = set(raw) - set(SECTIONS) - {"profile"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}", field=sorted(unknown)[0], source=source)
    profile = raw.get("profile", "paper")
    if profile not in PROFILES:
        raise ValidationError("profile", f"unknown constants profile {profile!r}; choose from {sorted(PROFILES)}")
    defaulted = [] if "profile" in raw else ["profile"]
    values = {}
    for section in SECTIONS:
        if section not in raw:
            defaulted.append(section)
            values[section] = _fill({}, _SCHEMA[section], section, [])
        else:
            values[section] = _fill(raw[section], _SCHEMA[section], section, defaulted)
    return _build(values, profile, tuple(defaulted))


def parse_override(text: str):
    """``section.key=value`` (nested keys allowed) -> (path, YAML-parsed value)."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    path = key.strip().split(".")
    try:
        parsed = yaml.safe_load(value) if value.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {value!r}: {exc}", field=key) from None
    return path, parsed


def apply_overrides(raw: dict, overrides) -> dict:
    raw = json.loads(json.dumps(raw or {}))
    for text in overrides or ():
        path, value = parse_override(text)
        node = raw
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {'.'.join(path)}: {part} is not a section")
        node[path[-1]] = value
    return raw


def load_config(path: str | Path | None = None, overrides=()) -> Config:
    """Read, override and validate a configuration file; ``None`` gives defaults."""
    raw = {}
    name = None
    if path is not None:
        name = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc.strerror}", source=name) from None
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"parse error: {getattr(exc, 'problem', exc)}",
                              line=mark.line + 1 if mark else None, source=name) from None
    raw = apply_overrides(raw, overrides)
    try:
        return build_config(raw, source=name)
    except ConfigError as exc:
        if exc.line is None and name is not None and exc.field:
            raise ConfigError(str(exc).split(": ", 1)[-1], field=exc.field,
                              line=_find_line(text, exc.field), source=name) from None
        raise


def _find_line(text: str, dotted: str) -> int | None:
    leaf = dotted.rsplit(".", 1)[-1]
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(f"{leaf}:"):
            return lineno
    return None


def config_to_dict(cfg: Config) -> dict:
    """Plain nested mapping that :func:`build_config` turns back into ``cfg``."""
    gas = cfg.gas
    det = cfg.detector
    fit = cfg.fit
    model = {f.name: getattr(cfg.model, f.name) for f in fields(cfg.model) if f.name != "shoulder"}
    model["shoulder"] = {"enabled": cfg.model.shoulder.enabled, "rise_time": cfg.model.shoulder.rise_time}
    sim = {f.name: getattr(cfg.simulation, f.name) for f in fields(cfg.simulation)}
    sim["delay_windows"] = {k: list(v) for k, v in sim["delay_windows"].items()}
    return {
        "profile": cfg.profile,
        "gas": {"pressure": gas.pressure, "chamber_radius": gas.chamber_radius,
                "fractions": dict(gas.mix.fractions), "resonant_isotope": gas.resonant_isotope},
        "source": {f.name: getattr(cfg.source, f.name) for f in fields(cfg.source)},
        "detector": {**{f.name: getattr(det, f.name) for f in fields(det) if f.name != "windows"},
                     "windows": {k: list(v) for k, v in det.windows.items()}},
        "model": model,
        "simulation": sim,
        "fit": {"n_components": fit.n_components,
                "fixed_rates": list(fit.fixed_rates) if fit.fixed_rates is not None else None,
                "background_free": fit.background_free, "background_level": fit.background_level,
                "response_fwhm": fit.response_fwhm, "response_free": fit.response_free,
                "time_zero": fit.time_zero, "time_zero_free": fit.time_zero_free,
                "start_delay": fit.start_delay,
                "fit_window": list(fit.fit_window) if fit.fit_window is not None else None,
                "variance_model": fit.variance_model, "max_iterations": fit.max_iterations},
        "mcnrs": {f.name: getattr(cfg.mcnrs, f.name) for f in fields(cfg.mcnrs)},
    }


def dump_config(cfg: Config) -> str:
    """Effective configuration as YAML, with defaulted keys listed in a comment."""
    head = ""
    if cfg.defaulted:
        head = "# defaults applied: " + ", ".join(cfg.defaulted) + "\n"
    return head + yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
