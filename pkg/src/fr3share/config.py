"""Scenario configuration: nested dataclasses loaded from YAML.

Unknown keys are rejected, and every block is checked by building the
module-level objects it describes.
"""
import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace

import yaml

from .arrays import ArrayGeometry
from .errors import ConfigError, Fr3ShareError
from .nulling import DEFAULT_LAMBDAS
from .orbits import GroundSite, elements_from_orbit_args
from .power_control import PowerControlContext

MODES = ("nulling_only", "power_control_only", "joint")


@dataclass
class ConstellationConfig:
    n_sat: int = 40
    altitude: float = 600e3  # m
    c_in: float = 63.4  # inclination, deg
    d_in: float = -28.8  # node longitude at epoch, deg
    e_in: float = 44.55  # argument of perigee, deg
    f_in: float = 0.0  # true anomaly at epoch, deg
    delta_inclination: float = 0.5  # deg per satellite
    elevation_mask: float = 10.0  # deg
    slot_duration: float = 1.0  # s
    start_time: float = None  # s; None centres the trajectory on the epoch


@dataclass
class SiteConfig:
    latitude: float = 38.85
    longitude: float = -5.0
    gnb_height: float = 50.0  # m


@dataclass
class ArraysConfig:
    gnb_n_az: int = 8
    gnb_n_el: int = 8
    ue_n_az: int = 2
    ue_n_el: int = 1
    spacing: float = 0.5  # wavelengths
    boresight_azimuth: float = 330.0  # deg
    downtilt: float = 12.0  # deg
    element_pattern: str = "3gpp"  # scenario default; ArrayGeometry itself defaults to isotropic
    carrier: float = 7.125e9  # Hz
    cell_radius: float = 100.0  # m
    min_ue_distance: float = 10.0  # m
    sector_width: float = 120.0  # deg
    ue_height: float = 1.6  # m
    satellite_gain_dbi: float = 32.0
    apply_satellite_gain: bool = False


@dataclass
class PowerConfig:
    bandwidth: float = 30e6
    interference_dbm: float = -73.0
    alpha: float = 1e-3
    m_exp: float = 3.0
    epsilon: float = 0.85
    inr_max_db: float = -6.0
    p_min_dbm: float = 10.0
    p_max_dbm: float = 33.0
    g_over_t_db: float = 13.0
    atm_loss_db: float = 0.0
    infeasible_policy: str = "fallback"  # or "error"


@dataclass
class OutputConfig:
    directory: str = "out"
    records: str = "records.csv"
    summary: str = "summary.json"
    manifest: str = "manifest.json"
    satellites_csv: str = None
    channel_dump: str = None


@dataclass
class ScenarioConfig:
    seed: int = 0
    mode: str = "joint"
    lam: float = 1.0
    lambda_list: list = field(default_factory=lambda: list(DEFAULT_LAMBDAS))
    n_slots: int = 150
    k: int = 30
    repeats: int = 5
    solver: str = "lapack"
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    site: SiteConfig = field(default_factory=SiteConfig)
    arrays: ArraysConfig = field(default_factory=ArraysConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # derived objects ---------------------------------------------------
    def power_context(self):
        p = asdict(self.power)
        p.pop("infeasible_policy")
        return PowerControlContext(**p)

    def gnb_geometry(self):
        a = self.arrays
        return ArrayGeometry(a.gnb_n_az, a.gnb_n_el, a.spacing, a.boresight_azimuth,
                             a.downtilt, a.element_pattern)

    def ue_geometry(self):
        a = self.arrays
        return ArrayGeometry(a.ue_n_az, a.ue_n_el, a.spacing, 0.0, 0.0, a.element_pattern)

    def base_elements(self):
        c = self.constellation
        return elements_from_orbit_args(c.c_in, c.d_in, c.e_in, c.f_in, c.altitude)

    def ground_site(self):
        s = self.site
        return GroundSite(s.latitude, s.longitude, s.gnb_height)

    def start_time(self):
        c = self.constellation
        if c.start_time is None:
            return -0.5 * self.n_slots * c.slot_duration
        return c.start_time

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lambda must be finite and >= 0, got {self.lam!r}")
        if self.mode != "power_control_only" and not self.lambda_list:
            raise ConfigError("lambda_list must be nonempty for nulling modes")
        if any(not (math.isfinite(v) and v >= 0) for v in self.lambda_list):
            raise ConfigError("lambda_list entries must be finite and >= 0")
        for name in ("n_slots", "k", "repeats"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.constellation.n_sat < 0:
            raise ConfigError("n_sat must be >= 0")
        if not self.constellation.slot_duration > 0:
            raise ConfigError("slot_duration must be positive")
        if self.solver not in ("lapack", "jacobi"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.power.infeasible_policy not in ("fallback", "error"):
            raise ConfigError("infeasible_policy must be 'fallback' or 'error'")
        if not self.arrays.cell_radius > self.arrays.min_ue_distance >= 0:
            raise ConfigError("need cell_radius > min_ue_distance >= 0")
        try:
            self.power_context()
            self.gnb_geometry()
            self.ue_geometry()
            self.base_elements()
            self.ground_site()
        except Fr3ShareError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        """sha256 of the canonical config; the output directory is left out."""
        d = self.to_dict()
        d["output"].pop("directory")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


# YAML spells the regularizer "lambda"
_ALIASES = {"lambda": "lam"}


def _coerce_field(value, ftype, key):
    # YAML 1.1 leaves forms like 30e6 as strings; the field type decides
    if value is None:
        return None
    try:
        if ftype is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if ftype is int:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if ftype is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if ftype is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if ftype is list:
            return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot use {value!r} as {ftype.__name__}") from None
    return value


def _build(cls, data, path):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown key {path + key!r}")
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{path}{key}.")
        else:
            kwargs[name] = _coerce_field(value, known[name].type, path + key)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def from_dict(data):
    cfg = _build(ScenarioConfig, data, "")
    return cfg.validate()


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return from_dict(data or {})


def dump_config(cfg):
    d = cfg.to_dict()
    d["lambda"] = d.pop("lam")
    return yaml.safe_dump(d, sort_keys=False)


def override(cfg, assignments):
    """Apply dotted ``key=value`` overrides, returning a validated copy."""
    data = copy.deepcopy(cfg.to_dict())
    data["lambda"] = data.pop("lam")
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config block {part!r} in {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown key {key!r}")
        node[parts[-1]] = yaml.safe_load(text)
    return from_dict(data)


def with_changes(cfg, **changes):
    """Shallow replace on the top level, re-validated."""
    return replace(cfg, **changes).validate()
