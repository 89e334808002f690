"""Configuration dataclasses and the YAML config loader.

All quantities are SI: meters, bits, Hz, dBm. The YAML file mirrors the
dataclasses one section per class::

    network:
      M: 4
      N: 12
      K: 100
      F: 200
      cache_bits: 100.0e6
      content_bits: 10.0e6
      zipf_gamma: 1.0
      region: [400.0, 300.0]
      height: [45.0, 60.0]
      mbs_distance: 1000.0
    channel:
      fc_ghz: 2.0
      p_uav_dbm: 23.0
      p_mbs_dbm: 46.0
      noise_dbm_hz: -174.0
      bandwidth: 20.0e6
      backhaul_bandwidth: 10.0e6
      shadowing: random        # or "off"
    mos: {c1: 1.120, c2: 4.6746, clamp: true}
    association: {...}         # see association.DualParams
    joint: {...}               # see joint.JointParams
    experiment: {...}          # see harness.ExperimentPlan
    seed: 1
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError

HEIGHT_RANGE = (22.5, 300.0)


@dataclass(frozen=True)
class NetworkConfig:
    M: int = 4
    N: int = 12
    K: int = 100
    F: int = 200
    cache_bits: float = 100e6
    content_bits: float = 10e6
    zipf_gamma: float = 1.0
    region: tuple[float, float] = (400.0, 300.0)
    height: tuple[float, float] = (45.0, 60.0)
    mbs_distance: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        object.__setattr__(self, "height", tuple(float(v) for v in self.height))
        for name in ("M", "N", "K", "F"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.integer)) \
                    or int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.M > self.N:
            raise ConfigError(f"need M <= N, got M={self.M}, N={self.N}")
        if len(self.region) != 2 or min(self.region) <= 0:
            raise ConfigError(f"region dimensions must be positive, got {self.region}")
        lo, hi = self.height
        if not (HEIGHT_RANGE[0] <= lo <= hi <= HEIGHT_RANGE[1]):
            raise ConfigError(f"height interval {self.height} outside {HEIGHT_RANGE}")
        if self.content_bits <= 0 or self.cache_bits < 0:
            raise ConfigError("content_bits must be > 0 and cache_bits >= 0")
        if self.zipf_gamma < 0:
            raise ConfigError("zipf_gamma must be >= 0")
        if self.mbs_distance <= 0:
            raise ConfigError("mbs_distance must be > 0")

    @property
    def capacity_items(self) -> int:
        # tolerate float noise such as 140e6 / 10e6
        return int(self.cache_bits / self.content_bits + 1e-9)


@dataclass(frozen=True)
class ChannelParams:
    fc_ghz: float = 2.0
    p_uav_dbm: float = 23.0
    p_mbs_dbm: float = 46.0
    noise_dbm_hz: float = -174.0
    bandwidth: float = 20e6
    backhaul_bandwidth: float = 10e6
    shadowing: str = "random"
    mbs_interference_w: float = 0.0

    def __post_init__(self):
        if self.shadowing not in ("random", "off"):
            raise ConfigError(f"shadowing must be 'random' or 'off', got {self.shadowing!r}")
        if self.fc_ghz <= 0 or self.bandwidth <= 0 or self.backhaul_bandwidth <= 0:
            raise ConfigError("carrier frequency and bandwidths must be positive")
        if self.mbs_interference_w < 0:
            raise ConfigError("mbs_interference_w must be >= 0")

    @property
    def p_uav_w(self) -> float:
        return dbm_to_watt(self.p_uav_dbm)

    @property
    def p_mbs_w(self) -> float:
        return dbm_to_watt(self.p_mbs_dbm)

    @property
    def noise_access_w(self) -> float:
        return dbm_to_watt(self.noise_dbm_hz + 10.0 * math.log10(self.bandwidth))

    @property
    def noise_backhaul_w(self) -> float:
        return dbm_to_watt(self.noise_dbm_hz + 10.0 * math.log10(self.backhaul_bandwidth))


@dataclass(frozen=True)
class MosParams:
    c1: float = 1.120
    c2: float = 4.6746
    clamp: bool = True

    def __post_init__(self):
        if self.c1 <= 0:
            raise ConfigError("MOS constant c1 must be > 0")


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(watt) + 30.0


@dataclass(frozen=True)
class Config:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    mos: MosParams = field(default_factory=MosParams)
    association: dict = field(default_factory=dict)
    joint: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    seed: int = 1

    def replace_network(self, **changes) -> "Config":
        return dataclasses.replace(self, network=dataclasses.replace(self.network, **changes))

    def replace_channel(self, **changes) -> "Config":
        return dataclasses.replace(self, channel=dataclasses.replace(self.channel, **changes))

    def to_dict(self) -> dict:
        return {
            "network": dataclasses.asdict(self.network),
            "channel": dataclasses.asdict(self.channel),
            "mos": dataclasses.asdict(self.mos),
            "association": dict(self.association),
            "joint": dict(self.joint),
            "experiment": dict(self.experiment),
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {"network": NetworkConfig, "channel": ChannelParams, "mos": MosParams}


def _coerce(value, type_name):
    # YAML 1.1 reads "20.0e6" (no sign in the exponent) as a string
    def num(v):
        if isinstance(v, str):
            try:
                return float(v)
            except ValueError:
                raise ConfigError(f"expected a number, got {v!r}") from None
        return v
    if type_name == "float":
        return num(value)
    if type_name == "int" and isinstance(value, str):
        v = num(value)
        if v != int(v):
            raise ConfigError(f"expected an integer, got {value!r}")
        return int(v)
    if type_name.startswith("tuple") and isinstance(value, (list, tuple)):
        return tuple(num(v) for v in value)
    return value


def coerce_fields(cls, data: dict) -> dict:
    """Check ``data`` keys against ``cls`` fields and fix YAML number strings."""
    types = {f.name: str(f.type) for f in dataclasses.fields(cls)}
    unknown = set(data) - set(types)
    if unknown:
        raise ConfigError(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    return {k: _coerce(v, types[k]) for k, v in data.items()}


def _build(cls, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section for {cls.__name__} must be a mapping")
    types = {f.name: str(f.type) for f in dataclasses.fields(cls)}
    unknown = set(data) - set(types)
    if unknown:
        raise ConfigError(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    data = {k: _coerce(v, types[k]) for k, v in data.items()}
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> Config:
    data = dict(data or {})
    unknown = set(data) - set(_SECTIONS) - {"association", "joint", "experiment", "seed"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {name: _build(cls, data.get(name)) for name, cls in _SECTIONS.items()}
    for name in ("association", "joint", "experiment"):
        section = data.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        kwargs[name] = dict(section)
    kwargs["seed"] = int(data.get("seed", 1))
    return Config(**kwargs)


def load_config(path) -> Config:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)
