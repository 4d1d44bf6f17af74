"""Root configuration file: the Libteam team object plus channel, plan and policy sections.

Parsing is strict about types and lenient about unknown keys, which are
reported as warnings so Libteam fields this model ignores still load.
"""

from __future__ import annotations

import json
import types
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

from lifiho.channel import ConfigError, LifiChannelConfig, WifiChannelConfig
from lifiho.linkwatch import CrcPolicyConfig, SignalPolicyConfig
from lifiho.runner import LISTING_TEAM, TeamConfig, default_team, parse_team, team_to_dict
from lifiho.sim import ExperimentPlan, SimSetup

_ROOT_KEYS = ("team", "channel", "plan", "policies", "signal_policy", "crc_policy", "output")


@dataclass
class OutputConfig:
    dir: str = "out"
    emit_timelines: bool = False
    emit_svg: bool = False


@dataclass
class RootConfig:
    team: TeamConfig = field(default_factory=default_team)
    lifi: LifiChannelConfig = field(default_factory=LifiChannelConfig)
    wifi: WifiChannelConfig = field(default_factory=WifiChannelConfig)
    plan: ExperimentPlan = field(default_factory=ExperimentPlan)
    signal_policy: SignalPolicyConfig = field(default_factory=SignalPolicyConfig)
    crc_policy: CrcPolicyConfig = field(default_factory=CrcPolicyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    warnings: list[str] = field(default_factory=list, compare=False)

    def setup(self) -> SimSetup:
        return SimSetup(lifi=self.lifi, wifi=self.wifi, team=self.team, plan=self.plan,
                        signal_policy=self.signal_policy, crc_policy=self.crc_policy)

    def validate(self) -> None:
        self.lifi.validate()
        self.wifi.validate()
        for name, obj in (("plan", self.plan), ("signal_policy", self.signal_policy), ("crc_policy", self.crc_policy)):
            try:
                obj.validate()
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from None
        for p in self.team.ports:
            if p.link_watch.interval % self.plan.delta_t != 0:
                raise ConfigError(f"team.ports.{p.name}.link_watch.interval must be a multiple of plan.delta_t")


def _coerce(tp: Any, value: Any, where: str, warns: list[str]) -> Any:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, where, warns)
    if is_dataclass(tp):
        return _load(tp, value, where, warns)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: must be a list")
        (item,) = typing.get_args(tp)
        return [_coerce(item, v, f"{where}[{i}]", warns) for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: must be a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: must be an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: must be a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: must be a string")
        return value
    raise ConfigError(f"{where}: unsupported field type {tp!r}")


def _load(cls: type, data: Any, where: str, warns: list[str]) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: must be an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            kwargs[f.name] = _coerce(hints[f.name], data[f.name], f"{where}.{f.name}", warns)
    for k in data:
        if k not in names:
            warns.append(f"{where}.{k}: unknown key ignored")
    return cls(**kwargs)


def parse_config(data: Any, validate: bool = True) -> RootConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    warns: list[str] = []
    for k in data:
        if k not in _ROOT_KEYS:
            warns.append(f"{k}: unknown key ignored")
    cfg = RootConfig()
    if "team" in data:
        try:
            cfg.team = parse_team(data["team"], "team", warns)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    ch = data.get("channel", {})
    if not isinstance(ch, dict):
        raise ConfigError("channel: must be an object")
    for k in ch:
        if k not in ("lifi", "wifi"):
            warns.append(f"channel.{k}: unknown key ignored")
    if "lifi" in ch:
        cfg.lifi = _load(LifiChannelConfig, ch["lifi"], "channel.lifi", warns)
    if "wifi" in ch:
        cfg.wifi = _load(WifiChannelConfig, ch["wifi"], "channel.wifi", warns)
    if "plan" in data:
        plan_data = data["plan"]
        if isinstance(plan_data, dict) and "policies" in plan_data:
            raise ConfigError("plan.policies: list policies at the top level under 'policies'")
        cfg.plan = _load(ExperimentPlan, plan_data, "plan", warns)
    if "policies" in data:
        cfg.plan.policies = _coerce(list[str], data["policies"], "policies", warns)
    if "signal_policy" in data:
        cfg.signal_policy = _load(SignalPolicyConfig, data["signal_policy"], "signal_policy", warns)
    if "crc_policy" in data:
        cfg.crc_policy = _load(CrcPolicyConfig, data["crc_policy"], "crc_policy", warns)
    if "output" in data:
        cfg.output = _load(OutputConfig, data["output"], "output", warns)
    cfg.warnings = warns
    if not validate:
        return cfg
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path, validate: bool = True) -> RootConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(data, validate)


def config_to_dict(cfg: RootConfig) -> dict[str, Any]:
    plan = asdict(cfg.plan)
    policies = plan.pop("policies")
    return {
        "team": team_to_dict(cfg.team),
        "channel": {"lifi": asdict(cfg.lifi), "wifi": asdict(cfg.wifi)},
        "plan": plan,
        "policies": policies,
        "signal_policy": {k: v for k, v in asdict(cfg.signal_policy).items() if k != "lambda_w"},
        "crc_policy": {k: v for k, v in asdict(cfg.crc_policy).items() if k not in ("lambda_e", "lambda_w_confirm")},
        "output": asdict(cfg.output),
    }


def default_config_dict() -> dict[str, Any]:
    d = config_to_dict(RootConfig())
    # keep the Libteam section exactly as shipped, plus the technology tags
    team = json.loads(json.dumps(LISTING_TEAM))
    team["ports"]["wlp1s0"]["technology"] = "wifi"
    team["ports"]["wlx70b3d5958671"]["technology"] = "lifi"
    d["team"] = team
    return d
