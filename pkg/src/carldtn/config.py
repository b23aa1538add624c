"""Scenario definition and the ``key = value`` settings format.

One setting per line, ``#`` starts a comment, node groups use numbered
prefixes (``group1.count = 15``).  Unknown keys are rejected.  Sizes accept
decimal suffixes (``250k``, ``5MB``); ranges are written ``lo,hi``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

from .errors import ParseError, ValidationError
from .mobility import VARIANTS, MobilityModel, grid_graph
from .node import EnergyModel
from .qlearn import QParams
from .routing.carl import CarlParams
from .routing.prophet import ProphetParams
from .routing.snw import SnwParams
from .social import SocialParams, TieNorms

ROUTERS = ("epidemic", "prophet", "snw", "carl")
GROUP_KINDS = ("pedestrian", "car", "bus", "other")


@dataclass(frozen=True)
class GroupConfig:
    count: int = 10
    kind: str = "pedestrian"
    mobility: str = "rwp"
    speed: tuple[float, float] = (0.5, 1.5)
    pause: tuple[float, float] = (0.0, 120.0)
    leg: tuple[float, float] = (50.0, 250.0)
    graph: str = "grid:6x6"
    buffer: int = 5_000_000
    energy: float = 10000.0
    range: float = 30.0
    bandwidth: float = 250_000.0

    def mobility_model(self, world: tuple[float, float]) -> MobilityModel:
        return MobilityModel(self.mobility, self.speed, self.pause, world, self.leg, self.graph)


@dataclass(frozen=True)
class Workload:
    interval: tuple[float, float] = (25.0, 35.0)
    size: tuple[int, int] = (100_000, 1_000_000)
    ttl: float = 300.0  # minutes
    hosts: str = "all"  # "all" or an inclusive id range "lo-hi"

    def host_range(self, n_total: int) -> tuple[int, int]:
        if self.hosts == "all":
            return 0, n_total - 1
        lo, _, hi = self.hosts.partition("-")
        return int(lo), int(hi)


@dataclass(frozen=True)
class EnergyRates:
    idle_rate: float = 0.05
    tx_cost: float = 2e-6
    rx_cost: float = 1e-6


def _six_groups() -> tuple[GroupConfig, ...]:
    ped = GroupConfig(count=15, kind="pedestrian", mobility="rwp", speed=(0.5, 1.5), pause=(0.0, 120.0))
    car = GroupConfig(count=10, kind="car", mobility="graph", speed=(2.7, 13.9), pause=(0.0, 120.0))
    bus = GroupConfig(count=5, kind="bus", mobility="graph", speed=(7.0, 10.0), pause=(10.0, 30.0),
                      graph="grid:4x4")
    return (ped, ped, car, car, bus, bus)


@dataclass(frozen=True)
class Scenario:
    name: str = "default"
    duration: float = 43000.0
    seed: int = 1
    world: tuple[float, float] = (1000.0, 1000.0)
    groups: tuple[GroupConfig, ...] = field(default_factory=_six_groups)
    workload: Workload = Workload()
    router: str = "carl"
    report_interval: float = 300.0
    link_check_interval: float = 1.0
    ttl_sweep_interval: float = 30.0
    energy: EnergyRates = EnergyRates()
    carl: CarlParams = CarlParams()
    prophet: ProphetParams = ProphetParams()
    snw: SnwParams = SnwParams()
    epidemic_acks: bool = False

    @property
    def n_total(self) -> int:
        return sum(g.count for g in self.groups)

    def with_router(self, router: str) -> "Scenario":
        return replace(self, router=router)

    def energy_model(self, g: GroupConfig) -> EnergyModel:
        e = self.energy
        return EnergyModel(g.energy, e.idle_rate, e.tx_cost, e.rx_cost)


def default_scenario(**overrides) -> Scenario:
    return replace(Scenario(), **overrides)


# ---- value codecs ---------------------------------------------------------

_SUFFIX = {"": 1, "k": 1_000, "kb": 1_000, "m": 1_000_000, "mb": 1_000_000,
           "g": 1_000_000_000, "gb": 1_000_000_000}


def parse_size(text: str) -> int:
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([a-zA-Z]*)\s*", text)
    if not m or m.group(2).lower() not in _SUFFIX:
        raise ValueError(f"bad size {text!r}")
    return int(round(float(m.group(1)) * _SUFFIX[m.group(2).lower()]))


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def _pair(conv):
    def parse(text: str):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) == 1:
            parts = parts * 2
        if len(parts) != 2:
            raise ValueError(f"expected 'lo,hi', got {text!r}")
        return (conv(parts[0]), conv(parts[1]))
    return parse


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_render(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


# key -> (path into Scenario, parser)
_Setter = tuple[tuple[str, ...], Callable[[str], Any]]

GLOBAL_KEYS: dict[str, _Setter] = {
    "name": (("name",), str),
    "duration": (("duration",), _float),
    "seed": (("seed",), _int),
    "world.width": (("world", 0), _float),
    "world.height": (("world", 1), _float),
    "router": (("router",), str),
    "report_interval": (("report_interval",), _float),
    "link_check_interval": (("link_check_interval",), _float),
    "ttl_sweep_interval": (("ttl_sweep_interval",), _float),
    "ttl": (("workload", "ttl"), _float),
    "message_interval": (("workload", "interval"), _pair(_float)),
    "message_size": (("workload", "size"), _pair(parse_size)),
    "message_hosts": (("workload", "hosts"), str),
    "energy.idle_rate": (("energy", "idle_rate"), _float),
    "energy.tx_cost": (("energy", "tx_cost"), _float),
    "energy.rx_cost": (("energy", "rx_cost"), _float),
    "carl.l_max": (("carl", "l_max"), _int),
    "carl.hop_cap": (("carl", "hop_cap"), _int),
    "carl.priority_threshold": (("carl", "priority_threshold"), _float),
    "carl.acks": (("carl", "acks"), _bool),
    "carl.alpha": (("carl", "q", "alpha"), _float),
    "carl.gamma": (("carl", "q", "gamma"), _float),
    "carl.beta": (("carl", "q", "beta"), _float),
    "carl.aging_unit": (("carl", "q", "aging_unit"), _float),
    "carl.ens_window": (("carl", "social", "ens_window"), _float),
    "carl.pop_window": (("carl", "social", "pop_window"), _float),
    "carl.pop_threshold": (("carl", "social", "pop_threshold"), _int),
    "carl.pop_alpha": (("carl", "social", "pop_alpha"), _float),
    "carl.tie_f_max": (("carl", "social", "tie", "f_max"), _float),
    "carl.tie_c_max": (("carl", "social", "tie", "c_max"), _float),
    "carl.tie_tau": (("carl", "social", "tie", "tau"), _float),
    "prophet.p_init": (("prophet", "p_init"), _float),
    "prophet.beta": (("prophet", "beta"), _float),
    "prophet.gamma": (("prophet", "gamma"), _float),
    "prophet.aging_unit": (("prophet", "aging_unit"), _float),
    "prophet.acks": (("prophet", "acks"), _bool),
    "snw.copies": (("snw", "copies"), _int),
    "snw.binary": (("snw", "binary"), _bool),
    "snw.acks": (("snw", "acks"), _bool),
    "epidemic.acks": (("epidemic_acks",), _bool),
}

GROUP_KEYS: dict[str, Callable[[str], Any]] = {
    "count": _int,
    "kind": str,
    "mobility": str,
    "speed": _pair(_float),
    "pause": _pair(_float),
    "leg": _pair(_float),
    "graph": str,
    "buffer": parse_size,
    "energy": _float,
    "range": _float,
    "bandwidth": parse_size,
}

_GROUP_RE = re.compile(r"group(\d+)\.(\w+)$")


def _get(obj, path):
    for p in path:
        obj = obj[p] if isinstance(p, int) else getattr(obj, p)
    return obj


def _set(obj, path, value):
    head = path[0]
    if len(path) == 1:
        if isinstance(head, int):
            items = list(obj)
            items[head] = value
            return tuple(items)
        return replace(obj, **{head: value})
    child = obj[head] if isinstance(head, int) else getattr(obj, head)
    new_child = _set(child, path[1:], value)
    if isinstance(head, int):
        items = list(obj)
        items[head] = new_child
        return tuple(items)
    return replace(obj, **{head: new_child})


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a settings document."""
    seen: dict[str, int] = {}
    scenario = Scenario()
    groups: dict[int, dict[str, Any]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        gm = _GROUP_RE.match(key)
        if gm:
            idx, attr = int(gm.group(1)), gm.group(2)
            if attr not in GROUP_KEYS:
                raise ValidationError(key, "unknown group setting")
            try:
                groups.setdefault(idx, {})[attr] = GROUP_KEYS[attr](value)
            except ValueError as exc:
                raise ValidationError(key, str(exc)) from None
            continue
        if key not in GLOBAL_KEYS:
            raise ValidationError(key, "unknown setting")
        path, conv = GLOBAL_KEYS[key]
        try:
            scenario = _set(scenario, path, conv(value))
        except ValueError as exc:
            raise ValidationError(key, str(exc)) from None
    if groups:
        if min(groups) < 1:
            raise ValidationError(f"group{min(groups)}", "group numbers start at 1")
        scenario = replace(scenario, groups=tuple(GroupConfig(**groups[i]) for i in sorted(groups)))
    validate(scenario)
    return scenario


def render_scenario(s: Scenario) -> str:
    """Inverse of ``parse_scenario``: every setting written out explicitly."""
    lines = []
    for key, (path, _) in GLOBAL_KEYS.items():
        lines.append(f"{key} = {_render(_get(s, path))}")
    for i, g in enumerate(s.groups, start=1):
        for attr in GROUP_KEYS:
            lines.append(f"group{i}.{attr} = {_render(getattr(g, attr))}")
    return "\n".join(lines) + "\n"


def _positive(key: str, v: float) -> None:
    if not v > 0:
        raise ValidationError(key, f"must be positive, got {v}")


def _range_ok(key: str, pair, allow_zero: bool = False) -> None:
    lo, hi = pair
    if (lo < 0 if allow_zero else lo <= 0) or hi < lo:
        raise ValidationError(key, f"invalid range {lo},{hi}")


def validate(s: Scenario) -> Scenario:
    _positive("duration", s.duration)
    _positive("world.width", s.world[0])
    _positive("world.height", s.world[1])
    _positive("report_interval", s.report_interval)
    _positive("link_check_interval", s.link_check_interval)
    _positive("ttl_sweep_interval", s.ttl_sweep_interval)
    _positive("ttl", s.workload.ttl)
    _range_ok("message_interval", s.workload.interval)
    _range_ok("message_size", s.workload.size)
    if not 0 <= s.seed < 2**64:
        raise ValidationError("seed", "must be a 64-bit unsigned integer")
    if s.router not in ROUTERS:
        raise ValidationError("router", f"unknown router {s.router!r}; expected one of {ROUTERS}")
    if not s.groups:
        raise ValidationError("group1.count", "at least one node group is required")
    for name in ("idle_rate", "tx_cost", "rx_cost"):
        if getattr(s.energy, name) < 0:
            raise ValidationError(f"energy.{name}", "must be non-negative")
    for i, g in enumerate(s.groups, start=1):
        p = f"group{i}."
        if g.count < 1:
            raise ValidationError(p + "count", "must be >= 1")
        if g.kind not in GROUP_KINDS:
            raise ValidationError(p + "kind", f"expected one of {GROUP_KINDS}")
        if g.mobility not in VARIANTS:
            raise ValidationError(p + "mobility", f"expected one of {VARIANTS}")
        if g.mobility != "static":
            _range_ok(p + "speed", g.speed)
        _range_ok(p + "pause", g.pause, allow_zero=True)
        if g.mobility == "rwk":
            _range_ok(p + "leg", g.leg)
        if g.mobility == "graph":
            try:
                grid_graph(g.graph, *s.world)
            except ValueError as exc:
                raise ValidationError(p + "graph", str(exc)) from None
        for attr in ("buffer", "energy", "range", "bandwidth"):
            _positive(p + attr, getattr(g, attr))
        if g.buffer < s.workload.size[1]:
            raise ValidationError(p + "buffer", "smaller than the largest message")
    n = s.n_total
    try:
        lo, hi = s.workload.host_range(n)
    except ValueError:
        raise ValidationError("message_hosts", "expected 'all' or 'lo-hi'") from None
    if not (0 <= lo < hi < n):
        raise ValidationError("message_hosts", f"range must hold two ids within 0..{n - 1}")
    c = s.carl
    if c.l_max < 1:
        raise ValidationError("carl.l_max", "must be >= 1")
    if c.hop_cap < 1:
        raise ValidationError("carl.hop_cap", "must be >= 1")
    try:
        QParams(**{f.name: getattr(c.q, f.name) for f in fields(QParams)})
    except ValueError as exc:
        raise ValidationError("carl." + str(exc).split()[0], str(exc)) from None
    if c.social.pop_threshold < 1:
        raise ValidationError("carl.pop_threshold", "must be >= 1")
    if not 0 <= c.social.pop_alpha <= 1:
        raise ValidationError("carl.pop_alpha", "must be in [0, 1]")
    for name in ("ens_window", "pop_window"):
        _positive("carl." + name, getattr(c.social, name))
    for name in ("f_max", "c_max", "tau"):
        _positive("carl.tie_" + name, getattr(c.social.tie, name))
    if not 0 < s.prophet.p_init <= 1:
        raise ValidationError("prophet.p_init", "must be in (0, 1]")
    if s.snw.copies < 1:
        raise ValidationError("snw.copies", "must be >= 1")
    return s
