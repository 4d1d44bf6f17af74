"""Active-backup team runner.

Keeps exactly one port active. With no latched override the active port is
the highest-``prio`` port whose link watch reports it up. A handover away
from the active port happens when its watcher declares the link down or a
policy verdict asks for it; after the first handover the choice is latched
for the rest of the replica (traffic never moves back to LiFi).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from lifiho.channel import WifiChannelConfig
from lifiho.core import MetricSample
from lifiho.linkwatch import ArpWatchConfig, Reason, WatchVerdict

log = logging.getLogger(__name__)


class Technology(str, Enum):
    LIFI = "lifi"
    WIFI = "wifi"


@dataclass
class PortSpec:
    name: str
    prio: int
    technology: Technology
    link_watch: ArpWatchConfig = field(default_factory=ArpWatchConfig)
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class HandoverEvent:
    t: int
    from_port: str
    to_port: str
    reason: Reason

    def __post_init__(self):
        if self.from_port == self.to_port:
            raise ValueError("handover must change port")


@dataclass
class TeamState:
    ports: list[PortSpec]
    active: str | None = None
    notify_peers_count: int = 4
    notify_peers_interval: int = 50
    hwaddr_policy: str = "by_active"
    latch_on_handover: bool = True
    latched: bool = False
    up: dict[str, bool] = field(default_factory=dict)
    activated_at: dict[str, int] = field(default_factory=dict)
    handovers: list[HandoverEvent] = field(default_factory=list)
    event_log: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        names = [p.name for p in self.ports]
        if len(set(names)) != len(names):
            raise ValueError("port names must be distinct")
        prios = [p.prio for p in self.ports]
        if len(set(prios)) != len(prios):
            raise ValueError("port priorities must be distinct")
        for p in self.ports:
            self.up.setdefault(p.name, True)
        if self.active is None:
            best = self._best_up()
            if best is not None:
                self.active = best
                self.activated_at[best] = 0

    def port(self, name: str) -> PortSpec:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    def port_by_technology(self, tech: Technology) -> PortSpec:
        for p in self.ports:
            if p.technology is tech:
                return p
        raise KeyError(tech.value)

    @property
    def active_technology(self) -> Technology | None:
        return None if self.active is None else self.port(self.active).technology

    def _best_up(self, exclude: str | None = None) -> str | None:
        cands = [p for p in self.ports if self.up.get(p.name) and p.name != exclude]
        if not cands:
            return None
        return max(cands, key=lambda p: p.prio).name


def _switch(state: TeamState, to: str | None, t: int, reason: Reason) -> None:
    prev = state.active
    state.active = to
    if to is None:
        state.event_log.append((t, f"total outage: no port up (was {prev})"))
        return
    state.activated_at[to] = t
    if prev is not None:
        state.handovers.append(HandoverEvent(t, prev, to, reason))
        state.event_log.append((t, f"handover {prev} -> {to} ({reason.value})"))
        if state.latch_on_handover:
            state.latched = True
    else:
        state.event_log.append((t, f"activate {to}"))
    for i in range(state.notify_peers_count):
        state.event_log.append((t + i * state.notify_peers_interval, f"notify_peers {to} {i + 1}/{state.notify_peers_count}"))


def runner_step(state: TeamState, verdicts: dict[str, WatchVerdict], t: int) -> TeamState:
    """Apply one tick of per-port verdicts; mutates and returns ``state``."""
    for name, v in verdicts.items():
        state.up[name] = v.link_ok

    if state.active is None:
        best = state._best_up()
        if best is not None:
            _switch(state, best, t, Reason.NONE)
        return state

    v = verdicts.get(state.active, WatchVerdict())
    if v.trigger_handover or not v.link_ok:
        target = state._best_up(exclude=state.active)
        if target is not None:
            reason = v.reason if v.reason is not Reason.NONE else Reason.CONNECTIVITY_LOST
            _switch(state, target, t, reason)
        elif not v.link_ok:
            _switch(state, None, t, Reason.CONNECTIVITY_LOST)
        return state

    if not state.latched:
        best = state._best_up()
        if best is not None and best != state.active:
            _switch(state, best, t, Reason.NONE)
    return state


def effective_goodput(state: TeamState, sample: MetricSample, t: int,
                      wifi: WifiChannelConfig | None = None) -> float:
    """Goodput delivered to the flow through the currently active port."""
    tech = state.active_technology
    if tech is None:
        return 0.0
    if tech is Technology.LIFI:
        return sample.goodput
    wifi = wifi or WifiChannelConfig()
    return wifi.goodput_since(t - state.activated_at.get(state.active, 0))


# ---------------------------------------------------------------------------
# Libteam-shaped configuration

_TEAM_KNOWN = {"device", "notify_peers", "runner", "ports", "latch_on_handover"}
_PORT_KNOWN = {"prio", "link_watch", "technology"}
_WATCH_FIELDS = {"name", "interval", "missed_max", "target_host", "validate_active", "validate_inactive", "send_always"}


@dataclass
class TeamConfig:
    device: str = "team0"
    notify_peers_count: int = 4
    notify_peers_interval: int = 50
    runner_name: str = "activebackup"
    hwaddr_policy: str = "by_active"
    latch_on_handover: bool = True
    ports: list[PortSpec] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def new_state(self) -> TeamState:
        return TeamState(
            ports=self.ports,
            notify_peers_count=self.notify_peers_count,
            notify_peers_interval=self.notify_peers_interval,
            hwaddr_policy=self.hwaddr_policy,
            latch_on_handover=self.latch_on_handover,
        )

    def lifi_port(self) -> PortSpec:
        return next(p for p in self.ports if p.technology is Technology.LIFI)

    def wifi_port(self) -> PortSpec:
        return next(p for p in self.ports if p.technology is Technology.WIFI)


def _expect(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ValueError(f"{where}: {msg}")


def parse_team(data: dict[str, Any], where: str = "team",
               warnings: list[str] | None = None) -> TeamConfig:
    """Parse the Libteam JSON object (``device``, ``notify_peers``, ``runner``, ``ports``)."""
    warn = warnings if warnings is not None else []
    _expect(isinstance(data, dict), where, "must be an object")
    extra = {k: v for k, v in data.items() if k not in _TEAM_KNOWN}
    for k in extra:
        warn.append(f"{where}.{k}: unknown field preserved")
    cfg = TeamConfig(extra=extra)
    if "device" in data:
        _expect(isinstance(data["device"], str), f"{where}.device", "must be a string")
        cfg.device = data["device"]
    if "latch_on_handover" in data:
        _expect(isinstance(data["latch_on_handover"], bool), f"{where}.latch_on_handover", "must be a boolean")
        cfg.latch_on_handover = data["latch_on_handover"]
    np_ = data.get("notify_peers", {})
    _expect(isinstance(np_, dict), f"{where}.notify_peers", "must be an object")
    for k in np_:
        if k not in ("count", "interval"):
            warn.append(f"{where}.notify_peers.{k}: unknown field preserved")
    cfg.notify_peers_count = _int(np_.get("count", 4), f"{where}.notify_peers.count")
    cfg.notify_peers_interval = _int(np_.get("interval", 50), f"{where}.notify_peers.interval")
    runner = data.get("runner", {})
    _expect(isinstance(runner, dict), f"{where}.runner", "must be an object")
    cfg.runner_name = runner.get("name", "activebackup")
    _expect(cfg.runner_name == "activebackup", f"{where}.runner.name", "only activebackup is supported")
    cfg.hwaddr_policy = runner.get("hwaddr_policy", "by_active")
    for k in runner:
        if k not in ("name", "hwaddr_policy"):
            warn.append(f"{where}.runner.{k}: unknown field preserved")
            cfg.extra.setdefault("runner", {})[k] = runner[k]

    ports = data.get("ports")
    _expect(isinstance(ports, dict) and len(ports) >= 2, f"{where}.ports", "must map at least two interface names")
    untagged = []
    for name, spec in ports.items():
        pw = f"{where}.ports.{name}"
        _expect(isinstance(spec, dict), pw, "must be an object")
        prio = _int(spec.get("prio", 0), f"{pw}.prio")
        lw = spec.get("link_watch", {})
        _expect(isinstance(lw, dict), f"{pw}.link_watch", "must be an object")
        for k in lw:
            if k not in _WATCH_FIELDS:
                warn.append(f"{pw}.link_watch.{k}: unknown field ignored")
        watch = ArpWatchConfig(**{k: v for k, v in lw.items() if k in _WATCH_FIELDS})
        for k in ("interval", "missed_max"):
            _int(getattr(watch, k), f"{pw}.link_watch.{k}")
        for k in ("validate_active", "validate_inactive", "send_always"):
            _expect(isinstance(getattr(watch, k), bool), f"{pw}.link_watch.{k}", "must be a boolean")
        try:
            watch.validate()
        except ValueError as exc:
            raise ValueError(f"{pw}.link_watch: {exc}") from None
        tech = spec.get("technology")
        if tech is None:
            untagged.append(name)
            tech_enum = Technology.WIFI
        else:
            try:
                tech_enum = Technology(tech)
            except ValueError:
                raise ValueError(f"{pw}.technology: must be 'lifi' or 'wifi'") from None
        port_extra = {k: v for k, v in spec.items() if k not in _PORT_KNOWN}
        for k in port_extra:
            warn.append(f"{pw}.{k}: unknown field preserved")
        cfg.ports.append(PortSpec(name=name, prio=prio, technology=tech_enum, link_watch=watch, extra=port_extra))

    if untagged:
        # LiFi is the default interface, so the untagged top-priority port is LiFi.
        top = max(cfg.ports, key=lambda p: p.prio)
        for p in cfg.ports:
            if p.name in untagged:
                p.technology = Technology.LIFI if p is top else Technology.WIFI
                warn.append(f"{where}.ports.{p.name}: no technology field, mapped to {p.technology.value} by prio")
    techs = [p.technology for p in cfg.ports]
    _expect(techs.count(Technology.LIFI) == 1 and techs.count(Technology.WIFI) >= 1, f"{where}.ports",
            "need exactly one lifi port and at least one wifi port")
    prios = [p.prio for p in cfg.ports]
    _expect(len(set(prios)) == len(prios), f"{where}.ports", "priorities must be distinct")
    return cfg


def team_to_dict(cfg: TeamConfig) -> dict[str, Any]:
    out: dict[str, Any] = {
        "device": cfg.device,
        "notify_peers": {"count": cfg.notify_peers_count, "interval": cfg.notify_peers_interval},
        "runner": {"name": cfg.runner_name, "hwaddr_policy": cfg.hwaddr_policy, **cfg.extra.get("runner", {})},
        "latch_on_handover": cfg.latch_on_handover,
        "ports": {},
    }
    for p in cfg.ports:
        lw = p.link_watch
        out["ports"][p.name] = {
            "prio": p.prio,
            "technology": p.technology.value,
            "link_watch": {k: getattr(lw, k) for k in ("name", "interval", "missed_max", "target_host",
                                                       "validate_active", "validate_inactive", "send_always")},
            **p.extra,
        }
    for k, v in cfg.extra.items():
        if k != "runner":
            out[k] = v
    return out


def _int(v: Any, where: str) -> int:
    _expect(isinstance(v, int) and not isinstance(v, bool), where, "must be an integer")
    return v


LISTING_TEAM = {
    "device": "team0",
    "notify_peers": {"count": 4, "interval": 50},
    "runner": {"name": "activebackup", "hwaddr_policy": "by_active"},
    "ports": {
        "wlp1s0": {
            "prio": 1,
            "link_watch": {
                "name": "arp_ping", "interval": 100, "missed_max": 2, "target_host": "192.168.1.2",
                "validate_active": False, "validate_inactive": False, "send_always": True,
            },
        },
        "wlx70b3d5958671": {
            "prio": 2,
            "link_watch": {
                "name": "arp_ping", "interval": 100, "missed_max": 2, "target_host": "192.168.1.2",
                "validate_active": False, "validate_inactive": False, "send_always": True,
            },
        },
    },
}


def default_team() -> TeamConfig:
    data = {**LISTING_TEAM, "ports": {k: dict(v) for k, v in LISTING_TEAM["ports"].items()}}
    data["ports"]["wlp1s0"]["technology"] = "wifi"
    data["ports"]["wlx70b3d5958671"]["technology"] = "lifi"
    return parse_team(data)
