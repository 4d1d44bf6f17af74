"""Discrete-time replica engine and experiment-grid orchestration."""

from __future__ import annotations

import csv
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from lifiho.channel import (
    ChannelState,
    ChannelStreams,
    Kinematics,
    LifiChannelConfig,
    TraceRecord,
    WifiChannelConfig,
    arp_success_probability,
    sample_to_record,
    step_channel,
)
from lifiho.core import DELTA_T_MS, STREAM_ARP, MetricSample, replica_seed, rng_stream
from lifiho.linkwatch import (
    ArpWatchState,
    CrcPolicyConfig,
    CrcPolicyState,
    SignalPolicyConfig,
    SignalPolicyState,
    WatchVerdict,
    arp_watch_step,
    crc_policy_step,
    merge_verdicts,
    signal_policy_step,
)
from lifiho.metrics import (
    DEFAULT_QOS_MBPS,
    DEFAULT_SPAN,
    PolicyOutcome,
    ellipse_summary,
    loess_smooth,
    measure_outage,
    takeover_distance,
)
from lifiho.runner import HandoverEvent, TeamConfig, Technology, default_team, effective_goodput, runner_step

DEFAULT_SPEEDS = (0.02, 0.05, 0.10, 0.15)
DEFAULT_POLICIES = (
    "baseline",
    "signal:-62",
    "signal:-64",
    "crc:0.15:-62",
    "crc:0.15:-64",
    "crc:0.20:-62",
    "crc:0.20:-64",
)
MIN_REPLAY_TICKS = 10
STEADY_TAIL_MS = 2000
LOSS_TAIL_MS = 5000

_POLICY_RE = re.compile(r"^(baseline|signal:(-?[\d.]+)|crc:([\d.]+):(-?[\d.]+))$")


@dataclass(frozen=True)
class PolicySpec:
    kind: str  # baseline | signal | crc
    lambda_w: float | None = None
    lambda_e: float | None = None

    @property
    def label(self) -> str:
        if self.kind == "baseline":
            return "baseline"
        if self.kind == "signal":
            return f"signal:{_fmt(self.lambda_w)}"
        return f"crc:{self.lambda_e:.2f}:{_fmt(self.lambda_w)}"


def _fmt(x: float) -> str:
    return f"{x:g}"


def parse_policy(text: str) -> PolicySpec:
    """Parse ``baseline``, ``signal:<dBm>`` or ``crc:<ratio>:<dBm>``."""
    m = _POLICY_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad policy {text!r}; expected baseline | signal:<dBm> | crc:<ratio>:<dBm>")
    if m.group(1) == "baseline":
        return PolicySpec("baseline")
    if m.group(2) is not None:
        lw = float(m.group(2))
        if not lw < 0:
            raise ValueError(f"signal threshold must be negative dBm: {text!r}")
        return PolicySpec("signal", lambda_w=lw)
    le, lw = float(m.group(3)), float(m.group(4))
    if not (0 < le < 1) or not lw < 0:
        raise ValueError(f"bad crc thresholds in {text!r}")
    return PolicySpec("crc", lambda_w=lw, lambda_e=le)


@dataclass
class ExperimentPlan:
    speeds: list[float] = field(default_factory=lambda: list(DEFAULT_SPEEDS))
    policies: list[str] = field(default_factory=lambda: list(DEFAULT_POLICIES))
    replicas: int = 10
    seed: int = 42
    delta_t: int = DELTA_T_MS
    qos_level: float = DEFAULT_QOS_MBPS
    start_distance: float = 15.0
    span: float = DEFAULT_SPAN
    ellipse_sigma: float = 1.0

    def validate(self) -> None:
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if not self.speeds or any(not s > 0 for s in self.speeds):
            raise ValueError("speeds must be positive")
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if not self.qos_level > 0:
            raise ValueError("qos_level must be positive")
        for p in self.policies:
            parse_policy(p)


@dataclass
class SimSetup:
    """Everything a replica needs besides its (speed, policy, index) key."""

    lifi: LifiChannelConfig = field(default_factory=LifiChannelConfig)
    wifi: WifiChannelConfig = field(default_factory=WifiChannelConfig)
    team: TeamConfig = field(default_factory=default_team)
    plan: ExperimentPlan = field(default_factory=ExperimentPlan)
    signal_policy: SignalPolicyConfig = field(default_factory=SignalPolicyConfig)
    crc_policy: CrcPolicyConfig = field(default_factory=CrcPolicyConfig)

    def signal_cfg(self, spec: PolicySpec) -> SignalPolicyConfig:
        sp = self.signal_policy
        return SignalPolicyConfig(lambda_w=spec.lambda_w, alpha=sp.alpha, debounce=sp.debounce)

    def crc_cfg(self, spec: PolicySpec) -> CrcPolicyConfig:
        cp = self.crc_policy
        return CrcPolicyConfig(lambda_e=spec.lambda_e, lambda_w_confirm=spec.lambda_w, alpha=cp.alpha,
                               confirm_on=cp.confirm_on, debounce=cp.debounce)


@dataclass
class ReplicaTimeline:
    t: list[int] = field(default_factory=list)
    distance: list[float] = field(default_factory=list)
    samples: list[MetricSample] = field(default_factory=list)
    effective_goodput: list[float] = field(default_factory=list)
    active_port: list[str | None] = field(default_factory=list)
    active_tech: list[str | None] = field(default_factory=list)
    events: list[HandoverEvent] = field(default_factory=list)
    event_log: list[tuple[int, str]] = field(default_factory=list)
    level: list[int] = field(default_factory=list)
    seed: int | None = None


class _PolicyDriver:
    def __init__(self, spec: PolicySpec, setup: SimSetup):
        self.spec = spec
        self.quiet = spec.kind == "baseline"
        if spec.kind == "signal":
            self.cfg = setup.signal_cfg(spec)
            self.state = SignalPolicyState.new(self.cfg)
            self.fn = signal_policy_step
        elif spec.kind == "crc":
            self.cfg = setup.crc_cfg(spec)
            self.state = CrcPolicyState.new(self.cfg)
            self.fn = crc_policy_step

    def step(self, sample: MetricSample, lifi_active: bool) -> WatchVerdict | None:
        if self.quiet:
            return None
        # filters track every sample; triggers only matter while LiFi carries traffic
        v = self.fn(self.state, sample, self.cfg)
        return v if lifi_active else None


def _drive(samples: Iterable[MetricSample], spec: PolicySpec, setup: SimSetup,
           stop_rule: bool, r_loss: float) -> ReplicaTimeline:
    team_cfg = setup.team
    team = team_cfg.new_state()
    lifi = team_cfg.lifi_port()
    watches = {p.name: ArpWatchState() for p in team_cfg.ports}
    driver = _PolicyDriver(spec, setup)
    tl = ReplicaTimeline()
    steady_need = 0.9 * setup.wifi.steady_goodput
    steady_run: int | None = None
    stop_at: int | None = None
    loss_t: int | None = None

    for sample in samples:
        t = sample.t
        verdicts: dict[str, WatchVerdict] = {}
        for p in team_cfg.ports:
            lw = p.link_watch
            if t % lw.interval != 0:
                verdicts[p.name] = WatchVerdict(link_ok=watches[p.name].link_ok)
                continue
            reply = sample.arp_reply["lifi" if p.technology is Technology.LIFI else "wifi"]
            verdicts[p.name] = arp_watch_step(watches[p.name], t, reply, lw)
        lifi_active = team.active == lifi.name
        pv = driver.step(sample, lifi_active)
        verdicts[lifi.name] = merge_verdicts(verdicts[lifi.name], pv)
        n_before = len(team.handovers)
        runner_step(team, verdicts, t)
        if len(team.handovers) > n_before:
            driver.quiet = True
        eg = effective_goodput(team, sample, t, setup.wifi)

        tl.t.append(t)
        tl.distance.append(sample.distance)
        tl.samples.append(sample)
        tl.effective_goodput.append(eg)
        tl.active_port.append(team.active)
        tech = team.active_technology
        tl.active_tech.append(None if tech is None else tech.value)

        if not stop_rule:
            continue
        if loss_t is None and sample.distance > r_loss:
            loss_t = t
            stop_at = t + LOSS_TAIL_MS if stop_at is None else min(stop_at, t + LOSS_TAIL_MS)
        if tech is Technology.WIFI and eg >= steady_need:
            steady_run = t if steady_run is None else steady_run
            if t - steady_run >= 500:
                cand = t + STEADY_TAIL_MS
                stop_at = cand if stop_at is None else min(stop_at, cand)
        else:
            steady_run = None
        if stop_at is not None and t >= stop_at:
            break

    tl.events = list(team.handovers)
    tl.event_log = list(team.event_log)
    return tl


def _channel_samples(setup: SimSetup, speed: float, seed: int, level_out: list[int]):
    lifi = setup.lifi
    state = ChannelState(lifi=lifi, wifi=setup.wifi)
    kin = Kinematics(start_distance=setup.plan.start_distance, speed=speed)
    streams = ChannelStreams.for_seed(seed)
    dt = setup.plan.delta_t
    # hard ceiling: loss radius + loss tail, a guard for stop-rule bugs
    t_max = int(kin.time_at(lifi.r_loss) + LOSS_TAIL_MS + 10 * dt)
    k = 0
    while k * dt <= t_max:
        s = step_channel(state, kin, k * dt, streams)
        level_out.append(state.level)
        yield s
        k += 1


def run_replica(setup: SimSetup, speed: float, policy: PolicySpec | str, replica_index: int) -> ReplicaTimeline:
    """Simulate one replica. Deterministic in ``(plan.seed, speed, replica_index)``.

    Channel randomness is keyed without the policy, so every policy at a given
    speed and replica index sees the same channel realisation.
    """
    spec = parse_policy(policy) if isinstance(policy, str) else policy
    seed = replica_seed(setup.plan.seed, speed, replica_index)
    levels: list[int] = []
    tl = _drive(_channel_samples(setup, speed, seed, levels), spec, setup, True, setup.lifi.r_loss)
    tl.level = levels[: len(tl.t)]
    tl.seed = seed
    return tl


def replica_outcome(tl: ReplicaTimeline, setup: SimSetup) -> dict[str, Any]:
    sm = loess_smooth(tl.t, tl.effective_goodput, setup.plan.span)
    out = measure_outage(sm, setup.plan.qos_level)
    tk = takeover_distance(tl, setup.wifi)
    ev = tl.events[0] if tl.events else None
    return {
        "outage_s": out.duration,
        "takeover_cm": tk.distance,
        "recovered": out.recovered,
        "steady": tk.steady,
        "handover_t_ms": None if ev is None else ev.t,
        "handover_distance_cm": None if ev is None else tl.distance[tl.t.index(ev.t)],
        "handover_reason": None if ev is None else ev.reason.value,
    }


def _cell_job(args: tuple[SimSetup, float, str, int]) -> tuple[tuple[float, str, int], dict[str, Any], ReplicaTimeline | None]:
    setup, speed, policy, idx = args
    tl = run_replica(setup, speed, policy, idx)
    return (speed, policy, idx), replica_outcome(tl, setup), tl


def grid_keys(plan: ExperimentPlan) -> list[tuple[float, str, int]]:
    return [(s, p, i) for s in plan.speeds for p in plan.policies for i in range(plan.replicas)]


def run_grid(setup: SimSetup, order: list[tuple[float, str, int]] | None = None, workers: int = 1,
             keep_timelines: bool = False) -> dict[str, Any]:
    """Run every (speed, policy, replica) and aggregate per (speed, policy) cell.

    Results are merged by key, so ``order`` and ``workers`` never change the
    summary. With ``keep_timelines`` the returned dict carries a
    ``"_timelines"`` entry mapping keys to timelines (not serialised).
    """
    plan = setup.plan
    plan.validate()
    keys = order if order is not None else grid_keys(plan)
    jobs = [(setup, s, p, i) for s, p, i in keys]
    results: dict[tuple[float, str, int], dict[str, Any]] = {}
    timelines: dict[tuple[float, str, int], ReplicaTimeline] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for key, res, tl in ex.map(_cell_job, jobs, chunksize=4):
                results[key] = res
                if keep_timelines:
                    timelines[key] = tl
    else:
        for job in jobs:
            key, res, tl = _cell_job(job)
            results[key] = res
            if keep_timelines:
                timelines[key] = tl

    cells = []
    for s in plan.speeds:
        for p in plan.policies:
            outs = [dict(replica=i, **results[(s, p, i)]) for i in range(plan.replicas)]
            cells.append(summarize_cell(s, parse_policy(p).label, outs, plan.ellipse_sigma))
    summary: dict[str, Any] = {
        "seed": plan.seed,
        "replicas": plan.replicas,
        "qos_level_mbps": plan.qos_level,
        "span": plan.span,
        "ellipse_sigma": plan.ellipse_sigma,
        "cells": cells,
    }
    if keep_timelines:
        summary["_timelines"] = timelines
    return summary


def summarize_cell(speed: float, policy: str, outcomes: list[dict[str, Any]], sigma: float = 1.0) -> dict[str, Any]:
    pts = [PolicyOutcome(o["outage_s"], o["takeover_cm"]) for o in outcomes]
    mean_out = float(np.mean([p.outage_duration for p in pts]))
    mean_tk = float(np.mean([p.takeover_distance for p in pts]))
    cell: dict[str, Any] = {
        "speed": speed,
        "policy": policy,
        "n": len(pts),
        "mean_outage_s": mean_out,
        "mean_takeover_cm": mean_tk,
        "cov": None,
        "axes": None,
        "outcomes": outcomes,
    }
    if len(pts) >= 2:
        el = ellipse_summary(pts, sigma)
        cell["cov"] = [[float(v) for v in row] for row in el.cov]
        cell["axes"] = [{"length": length, "direction": vec} for length, vec in el.axes]
    return cell


def find_cell(summary: dict[str, Any], speed: float, policy: str) -> dict[str, Any]:
    label = parse_policy(policy).label
    for c in summary["cells"]:
        if abs(c["speed"] - speed) < 1e-12 and c["policy"] == label:
            return c
    raise KeyError((speed, policy))


# ---------------------------------------------------------------------------
# trace replay


def _replay_samples(records: list[TraceRecord], setup: SimSetup, seed: int):
    arp = rng_stream(seed, STREAM_ARP)
    frac = setup.lifi.arp_frame_bytes / setup.lifi.packet_bytes
    wifi_up = setup.wifi.always_up
    for r in records:
        u = arp.random()
        lifi_up = r.crc_ratio < 1.0 or r.goodput > 0
        reply = lifi_up and u < arp_success_probability(r.crc_ratio, frac)
        yield MetricSample(
            t=r.t, distance=r.distance, signal=r.signal, crc_ratio=r.crc_ratio, goodput=r.goodput,
            link_up={"lifi": lifi_up, "wifi": wifi_up},
            arp_reply={"lifi": reply, "wifi": wifi_up},
        )


def replay(records: list[TraceRecord], policy: PolicySpec | str, setup: SimSetup | None = None,
           seed: int = 0) -> ReplicaTimeline:
    """Run the watcher/policy/runner pipeline over a recorded trace.

    ARP outcomes are drawn from the trace's CRC ratio with the same round-trip
    model the simulator uses; passing the originating replica's seed
    reproduces its probe outcomes exactly.
    """
    if len(records) < MIN_REPLAY_TICKS:
        raise ValueError(f"trace has {len(records)} ticks, need at least {MIN_REPLAY_TICKS}")
    setup = setup or SimSetup()
    spec = parse_policy(policy) if isinstance(policy, str) else policy
    tl = _drive(_replay_samples(records, setup, seed), spec, setup, False, setup.lifi.r_loss)
    tl.seed = seed
    return tl


TIMELINE_HEADER = ["t_ms", "distance_cm", "signal_dbm", "crc_ratio", "goodput_mbps", "active_port",
                   "effective_goodput_mbps"]


def write_timeline_csv(path: str | Path, tl: ReplicaTimeline) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMELINE_HEADER)
        for s, port, eg in zip(tl.samples, tl.active_port, tl.effective_goodput):
            r = sample_to_record(s)
            w.writerow([r.t, repr(r.distance), repr(r.signal), repr(r.crc_ratio), repr(r.goodput),
                        port or "", repr(eg)])


def timeline_records(tl: ReplicaTimeline) -> list[TraceRecord]:
    return [sample_to_record(s) for s in tl.samples]
