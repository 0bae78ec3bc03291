"""Scenario configuration: YAML loading, schema validation and overrides.

A config file is a mapping of named sections mirroring the model types.
Files are validated strictly (every key present, no unknown keys) unless
they start from the bundled defaults with ``extends: defaults``, in which
case only the keys given are overridden.
"""

from __future__ import annotations

import copy
import dataclasses
import typing
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .access import RR_ENERGY_MODES, AccessParams
from .channel import PopulationModel, RadioEnvironment
from .dlt import DltParams
from .errors import ConfigError
from .link import EnergyProfile, TrafficModel

SCHEMA_VERSION = 1
DELIVERY_MODES = ("cell", "distance")


def _dataclass_schema(cls, exclude=()):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if f.name not in exclude}


SCHEMA = {
    "channel": {**_dataclass_schema(RadioEnvironment),
                "delivery_mode": str, "reference_distance_m": float},
    "population": _dataclass_schema(PopulationModel),
    "access": {**_dataclass_schema(AccessParams), "solver_tol": float,
               "rr_energy_mode": str},
    "traffic": {**_dataclass_schema(TrafficModel,
                                    exclude=("ul_arrival_rate", "dl_arrival_rate")),
                "dl_per_ul": float},
    "energy": _dataclass_schema(EnergyProfile),
    "dlt": _dataclass_schema(DltParams),
    "trading": {"session_mode": bool, "sod_gather_delay_s": float,
                "btl_p_up": float, "btl_p_down": float, "payload_bits": dict},
    "simulation": {"seed": int, "n_replications": int, "n_prach_periods": int,
                   "horizon_days": float, "backoff_window": int,
                   "injected_trades": int, "workers": int},
}
OPTIONAL_SECTIONS = ("protocols",)

# sweepable paths that are not stored fields
VIRTUAL_PATHS = ("population.buyer_share", "population.n_devices")


def _check_value(path, value, expected):
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if expected is dict:
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected a mapping, got {value!r}")
        return dict(value)
    # Optional[...] fields are not used in sections
    raise ConfigError(path, f"unsupported field type {expected!r}")


def validate(data) -> dict:
    """Return a normalized copy of ``data`` or raise :class:`ConfigError`."""
    if not isinstance(data, dict):
        raise ConfigError("", "config must be a mapping of sections")
    out = {}
    version = data.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("version", f"unsupported schema version {version!r}")
    for key in data:
        if key not in SCHEMA and key not in OPTIONAL_SECTIONS and key not in (
                "version", "extends"):
            raise ConfigError(key, "unknown section")
    for section, fields in SCHEMA.items():
        raw = data.get(section)
        if raw is None:
            raise ConfigError(section, "missing section")
        if not isinstance(raw, dict):
            raise ConfigError(section, "must be a mapping")
        for key in raw:
            if key not in fields:
                raise ConfigError(f"{section}.{key}", "unknown key")
        sec = {}
        for key, expected in fields.items():
            path = f"{section}.{key}"
            if key not in raw:
                raise ConfigError(path, "missing required field")
            sec[key] = _check_value(path, raw[key], expected)
        out[section] = sec

    ch = out["channel"]
    if ch["delivery_mode"] not in DELIVERY_MODES:
        raise ConfigError("channel.delivery_mode", f"must be one of {DELIVERY_MODES}")
    if not ch["reference_distance_m"] > 0:
        raise ConfigError("channel.reference_distance_m", "must be > 0")
    if out["access"]["rr_energy_mode"] not in RR_ENERGY_MODES:
        raise ConfigError("access.rr_energy_mode", f"must be one of {RR_ENERGY_MODES}")
    if not out["access"]["solver_tol"] > 0:
        raise ConfigError("access.solver_tol", "must be > 0")
    if out["traffic"]["dl_per_ul"] < 0:
        raise ConfigError("traffic.dl_per_ul", "must be >= 0")
    for key in ("btl_p_up", "btl_p_down"):
        if not 0 <= out["trading"][key] <= 1:
            raise ConfigError(f"trading.{key}", "must lie in [0, 1]")
    if out["trading"]["sod_gather_delay_s"] < 0:
        raise ConfigError("trading.sod_gather_delay_s", "must be >= 0")
    for name, bits in out["trading"]["payload_bits"].items():
        _check_value(f"trading.payload_bits.{name}", bits, float)
        if not bits > 0:
            raise ConfigError(f"trading.payload_bits.{name}", "must be > 0")
    sim = out["simulation"]
    for key in ("n_replications", "n_prach_periods", "backoff_window", "workers"):
        if sim[key] < 1:
            raise ConfigError(f"simulation.{key}", "must be >= 1")
    if not sim["horizon_days"] > 0:
        raise ConfigError("simulation.horizon_days", "must be > 0")
    if sim["injected_trades"] < 0:
        raise ConfigError("simulation.injected_trades", "must be >= 0")
    if sim["seed"] < 0:
        raise ConfigError("simulation.seed", "must be >= 0")

    protocols = data.get("protocols") or {}
    if not isinstance(protocols, dict):
        raise ConfigError("protocols", "must be a mapping")
    out["protocols"] = copy.deepcopy(protocols)
    out["version"] = SCHEMA_VERSION

    # building the model types runs their invariant checks
    _build_sections(out)
    return out


def _build_sections(data):
    ch = {k: v for k, v in data["channel"].items()
          if k not in ("delivery_mode", "reference_distance_m")}
    acc = {k: v for k, v in data["access"].items()
           if k not in ("solver_tol", "rr_energy_mode")}
    tr = {k: v for k, v in data["traffic"].items() if k != "dl_per_ul"}
    return (RadioEnvironment(**ch), PopulationModel(**data["population"]),
            AccessParams(**acc), TrafficModel(**tr), EnergyProfile(**data["energy"]),
            DltParams(**data["dlt"]))


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "protocols":
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def default_data() -> dict:
    text = resources.files("nbtrade").joinpath("data/defaults.yaml").read_text()
    return yaml.safe_load(text)


@dataclass(frozen=True)
class Config:
    data: dict

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, dict) and data.get("extends") == "defaults":
            data = _deep_merge(default_data(), {k: v for k, v in data.items()
                                                if k != "extends"})
        elif isinstance(data, dict) and "extends" in data:
            raise ConfigError("extends", "only 'defaults' is supported")
        return cls(validate(data))

    @classmethod
    def defaults(cls):
        return cls.from_dict(default_data())

    @classmethod
    def load(cls, path):
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError("", f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError("", f"cannot parse config {path}: {exc}") from None
        return cls.from_dict(raw)

    def sections(self):
        """``(env, population, access, traffic, energy, dlt)`` model objects."""
        return _build_sections(self.data)

    def get(self, path):
        section, _, key = path.partition(".")
        if path == "population.buyer_share":
            return PopulationModel(**self.data["population"]).buyer_share
        if path == "population.n_devices":
            pop = self.data["population"]
            return pop["n_sellers"] + pop["n_buyers"]
        try:
            return self.data[section][key]
        except KeyError:
            raise ConfigError(path, "unknown parameter path") from None

    def check_numeric_path(self, path):
        if path in VIRTUAL_PATHS:
            return
        section, _, key = path.partition(".")
        kind = SCHEMA.get(section, {}).get(key)
        if kind is None:
            raise ConfigError(path, "unknown parameter path")
        if kind not in (int, float):
            raise ConfigError(path, "sweep path must be a numeric field")

    def with_value(self, path, value) -> "Config":
        """Copy with one parameter replaced (validated)."""
        if not isinstance(value, (bool, str)):
            self.check_numeric_path(path)
        data = copy.deepcopy(self.data)
        section, _, key = path.partition(".")
        if path == "population.buyer_share":
            if not 0 <= value <= 1:
                raise ConfigError(path, "must lie in [0, 1]")
            total = data["population"]["n_sellers"] + data["population"]["n_buyers"]
            buyers = int(round(value * total))
            data["population"]["n_buyers"] = buyers
            data["population"]["n_sellers"] = total - buyers
        elif path == "population.n_devices":
            share = self.get("population.buyer_share")
            buyers = int(round(share * value))
            data["population"]["n_buyers"] = buyers
            data["population"]["n_sellers"] = int(value) - buyers
        else:
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError(path, "unknown parameter path")
            data[section][key] = value
        return Config(validate(data))

    def with_values(self, overrides) -> "Config":
        cfg = self
        for path, value in overrides.items():
            cfg = cfg.with_value(path, value)
        return cfg

    def dump(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)
