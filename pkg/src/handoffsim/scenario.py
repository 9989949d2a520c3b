"""Scenario files: versioned YAML describing topology, traffic and handoff schedule."""

from __future__ import annotations

import copy
import dataclasses
import types
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import yaml

SCHEMA_VERSION = 1
PROTOCOLS = ("fmipv6", "fmipv6_reactive", "bicast", "safetynet")
PROTOCOL_ALIASES = {
    "fmipv6predictive": "fmipv6",
    "fmipv6": "fmipv6",
    "fmipv6reactive": "fmipv6_reactive",
    "fmipv6bicast": "bicast",
    "bicast": "bicast",
    "safetynet": "safetynet",
}
TIERS = ("WLAN", "WWAN")


class ScenarioError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


def normalize_protocol(name: str) -> str:
    key = str(name).lower().replace("_", "").replace("-", "")
    if key not in PROTOCOL_ALIASES:
        raise ScenarioError("protocol", f"unknown protocol {name!r}; expected one of {PROTOCOLS}")
    return PROTOCOL_ALIASES[key]


@dataclass
class LinkSpec:
    bandwidth_bps: float
    latency_ms: float
    # constant probability, or [[start_s, prob], ...] breakpoints
    loss: Union[float, list] = 0.0
    queue_capacity: int = 0


@dataclass
class ParSpec:
    downlink: LinkSpec
    uplink: LinkSpec
    name: str = "pAR"
    tier: str = "WLAN"


@dataclass
class NarSpec:
    name: str
    downlink: LinkSpec
    uplink: LinkSpec
    tier: str = "WLAN"
    available_from_s: float = 0.0
    wired: Optional[LinkSpec] = None
    accept_handoff: bool = True


@dataclass
class TrafficSpec:
    kind: str = "udp"
    rate_bps: float = 100_000
    payload_bytes: int = 100
    start_s: float = 0.0
    segment_bytes: int = 1400
    rwnd_bytes: int = 65536
    init_cwnd_segments: int = 2
    initial_rto_s: float = 1.0
    min_rto_s: float = 0.2


@dataclass
class HandoffSpec:
    enabled: bool = True
    initiate_at_s: float = 3.8
    attach_latency_ms: float = 200.0
    attach_jitter_ms: float = 0.0
    targets: Optional[list] = None
    finalize_policy: str = "immediate"
    par_downlink_loss: Optional[float] = None
    bicast_timer_ms: float = 400.0
    prrtadv_timeout_ms: float = 100.0
    fback_timeout_ms: float = 50.0
    nar_buffer_packets: Optional[int] = None
    expected_handoff_ms: Optional[float] = None
    buffer_lifetime_ms: float = 5000.0
    with_ah: bool = True


@dataclass
class TimingSpec:
    loss_budget: int = 10
    poll_ms: float = 10.0
    silence_ms: float = 0.0
    rtt_source: str = "configured"
    bottleneck_bps: Optional[float] = None


@dataclass
class Scenario:
    name: str
    protocol: str
    par: ParSpec
    nars: list
    traffic: TrafficSpec = field(default_factory=TrafficSpec)
    handoff: HandoffSpec = field(default_factory=HandoffSpec)
    timing: TimingSpec = field(default_factory=TimingSpec)
    cn_link: LinkSpec = field(default_factory=lambda: LinkSpec(100e6, 1.0))
    backbone: LinkSpec = field(default_factory=lambda: LinkSpec(100e6, 0.5))
    seed: int = 1
    duration_s: float = 10.0
    drain_s: float = 1.0
    handoff_window_s: list = field(default_factory=lambda: [4.0, 5.0])
    reference_window_s: list = field(default_factory=lambda: [5.0, 6.0])
    schema_version: int = SCHEMA_VERSION

    # -- helpers ----------------------------------------------------------
    def nar(self, name: str) -> NarSpec:
        for n in self.nars:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def targets(self) -> list:
        if self.handoff.targets:
            return list(self.handoff.targets)
        if self.protocol == "safetynet":
            return [n.name for n in self.nars]
        return [self.nars[0].name]

    def with_changes(self, **changes) -> "Scenario":
        """Deep copy with dotted-path overrides, e.g. ``{"handoff.bicast_timer_ms": 0}``."""
        sc = copy.deepcopy(self)
        for key, value in changes.items():
            obj = sc
            parts = key.replace("__", ".").split(".")
            for p in parts[:-1]:
                obj = obj[int(p)] if isinstance(obj, list) else getattr(obj, p)
            if isinstance(obj, list):
                obj[int(parts[-1])] = value
            else:
                if not hasattr(obj, parts[-1]):
                    raise ScenarioError(key, "no such field")
                setattr(obj, parts[-1], value)
        if "protocol" in changes:
            sc.protocol = normalize_protocol(sc.protocol)
        validate(sc)
        return sc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- building from plain data ---------------------------------------------

_ITEM_TYPES = {("Scenario", "nars"): NarSpec}


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ScenarioError(path or "<root>", f"expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ScenarioError(f"{path}{sorted(unknown)[0]}", "unknown field")
    kwargs = {}
    for f in dataclasses.fields(cls):
        fpath = f"{path}{f.name}"
        if f.name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ScenarioError(fpath, "missing required field")
            continue
        kwargs[f.name] = _convert(hints[f.name], data[f.name], fpath, (cls.__name__, f.name))
    return cls(**kwargs)


def _convert(tp, value, path: str, owner: tuple):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is Union or (hasattr(types, "UnionType") and isinstance(tp, types.UnionType)):
        if value is None and type(None) in args:
            return None
        non_none = [a for a in args if a is not type(None)]
        errors = []
        for a in non_none:
            try:
                return _convert(a, value, path, owner)
            except ScenarioError as exc:
                errors.append(exc)
        raise errors[0]
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path + ".")
    if tp is list or origin is list:
        if not isinstance(value, list):
            raise ScenarioError(path, "expected a list")
        item = _ITEM_TYPES.get(owner)
        if item is not None:
            return [_build(item, v, f"{path}[{i}].") for i, v in enumerate(value)]
        return list(value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ScenarioError(path, "expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ScenarioError(path, "expected an integer")
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(path, "expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ScenarioError(path, "expected a string")
        return value
    return value


def _check_link(link: LinkSpec, path: str, duration: float) -> None:
    if link.bandwidth_bps <= 0:
        raise ScenarioError(f"{path}.bandwidth_bps", "must be positive")
    if link.latency_ms < 0:
        raise ScenarioError(f"{path}.latency_ms", "must be non-negative")
    if link.queue_capacity < 0:
        raise ScenarioError(f"{path}.queue_capacity", "must be non-negative")
    points = link.loss if isinstance(link.loss, list) else [[0.0, link.loss]]
    for i, pt in enumerate(points):
        if not (isinstance(pt, (list, tuple)) and len(pt) == 2):
            raise ScenarioError(f"{path}.loss[{i}]", "expected [start_s, probability]")
        if not 0.0 <= float(pt[1]) <= 1.0:
            raise ScenarioError(f"{path}.loss[{i}]", "probability outside [0, 1]")


def validate(sc: Scenario) -> Scenario:
    if sc.schema_version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported version {sc.schema_version}")
    sc.protocol = normalize_protocol(sc.protocol)
    if not sc.nars:
        raise ScenarioError("nars", "at least one nAR is required")
    names = [n.name for n in sc.nars]
    if len(set(names)) != len(names):
        raise ScenarioError("nars", "duplicate nAR names")
    if sc.par.name in names:
        raise ScenarioError("par.name", "clashes with an nAR name")
    for tier_path, tier in [("par.tier", sc.par.tier)] + [
            (f"nars[{i}].tier", n.tier) for i, n in enumerate(sc.nars)]:
        if tier not in TIERS:
            raise ScenarioError(tier_path, f"tier must be one of {TIERS}")
    if sc.duration_s <= 0:
        raise ScenarioError("duration_s", "must be positive")
    if sc.drain_s < 0:
        raise ScenarioError("drain_s", "must be non-negative")
    ho = sc.handoff
    if ho.enabled and not 0 <= ho.initiate_at_s < sc.duration_s:
        raise ScenarioError("handoff.initiate_at_s", "must lie inside the run duration")
    if ho.finalize_policy not in ("immediate", "timing"):
        raise ScenarioError("handoff.finalize_policy", "expected 'immediate' or 'timing'")
    if ho.finalize_policy == "timing" and sc.protocol != "safetynet":
        raise ScenarioError("handoff.finalize_policy", "the timing policy needs SafetyNet")
    if ho.par_downlink_loss is not None and not 0.0 <= ho.par_downlink_loss <= 1.0:
        raise ScenarioError("handoff.par_downlink_loss", "probability outside [0, 1]")
    for fname in ("attach_latency_ms", "attach_jitter_ms", "bicast_timer_ms",
                  "prrtadv_timeout_ms", "fback_timeout_ms", "buffer_lifetime_ms"):
        if getattr(ho, fname) < 0:
            raise ScenarioError(f"handoff.{fname}", "must be non-negative")
    for t in sc.targets:
        if t not in names:
            raise ScenarioError("handoff.targets", f"unknown nAR {t!r}")
    if not sc.targets:
        raise ScenarioError("handoff.targets", "empty target list")
    if sc.protocol != "safetynet" and len(sc.targets) != 1:
        raise ScenarioError("handoff.targets", "FMIPv6 variants take exactly one target nAR")
    tr = sc.traffic
    if tr.kind not in ("udp", "tcp"):
        raise ScenarioError("traffic.kind", "expected 'udp' or 'tcp'")
    if tr.rate_bps < 0:
        raise ScenarioError("traffic.rate_bps", "must be non-negative")
    if tr.payload_bytes <= 0 or tr.segment_bytes <= 0:
        raise ScenarioError("traffic.payload_bytes", "must be positive")
    if sc.timing.rtt_source not in ("configured", "srtt"):
        raise ScenarioError("timing.rtt_source", "expected 'configured' or 'srtt'")
    if sc.timing.loss_budget < 0:
        raise ScenarioError("timing.loss_budget", "must be non-negative")
    for wpath in ("handoff_window_s", "reference_window_s"):
        w = getattr(sc, wpath)
        if len(w) != 2 or w[1] <= w[0]:
            raise ScenarioError(wpath, "expected [start, end] with end > start")
    _check_link(sc.cn_link, "cn_link", sc.duration_s)
    _check_link(sc.backbone, "backbone", sc.duration_s)
    _check_link(sc.par.downlink, "par.downlink", sc.duration_s)
    _check_link(sc.par.uplink, "par.uplink", sc.duration_s)
    for i, n in enumerate(sc.nars):
        for attr in ("downlink", "uplink", "wired"):
            if getattr(n, attr) is not None:
                _check_link(getattr(n, attr), f"nars[{i}].{attr}", sc.duration_s)
    return sc


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "scenario must be a mapping")
    return validate(_build(Scenario, data, ""))


def loads(text: str) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("<file>", f"parse error: {exc}") from exc
    return scenario_from_dict(data)


def dumps(sc: Scenario) -> str:
    return yaml.safe_dump(sc.to_dict(), sort_keys=False)


def preset_names() -> list:
    files = resources.files("handoffsim").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".yaml"))


def load_preset(name: str) -> Scenario:
    res = resources.files("handoffsim").joinpath("presets", f"{name}.yaml")
    if not res.is_file():
        raise ScenarioError("<preset>", f"no preset named {name!r}; have {preset_names()}")
    return loads(res.read_text())


def load_scenario(path) -> Scenario:
    """Load a scenario from a YAML file, or a bundled preset by bare name."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and str(path) in preset_names():
        return load_preset(str(path))
    if not p.exists():
        raise ScenarioError("<file>", f"{path} does not exist")
    return loads(p.read_text())


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps(sc))
