"""Synthetic LiFi/WiFi channel, radial mobility, and measured-trace ingestion.

The LiFi mean goodput follows three regions: a gently sloping plateau out to
``r_stable``, a speed-dependent decay out to ``r_knee``, and a steeper fall to
zero at ``r_loss``. Packet failures grow with distance past ``r_stable`` and
are pushed back by a robustness-adaptation loop that trades goodput cap for a
lower failure probability.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from lifiho.core import (
    DELTA_T_MS,
    INJECTION_RATE_MBPS,
    STREAM_ARP,
    STREAM_CRC,
    STREAM_GOODPUT,
    STREAM_SIGNAL,
    EwmaFilter,
    MetricSample,
    clamp_signal,
    ewma_update,
    rng_stream,
)

TRACE_HEADER = ["t_ms", "distance_cm", "signal_dbm", "crc_ratio", "goodput_mbps"]


class ConfigError(ValueError):
    pass


class TraceError(ValueError):
    """Malformed or invalid trace file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Kinematics:
    start_distance: float = 15.0
    speed: float = 0.10  # m/s, radial outward

    def distance(self, t_ms: int) -> float:
        # m/s * ms -> cm: speed * 100 cm/m * t / 1000
        return self.start_distance + self.speed * t_ms / 10.0

    def time_at(self, distance: float) -> float:
        """Time in ms at which the device reaches ``distance``."""
        return (distance - self.start_distance) * 10.0 / self.speed


@dataclass
class AdaptationLevel:
    goodput_cap: float
    failure_multiplier: float


def _default_levels() -> list[AdaptationLevel]:
    return [
        AdaptationLevel(40.0, 1.0),
        AdaptationLevel(25.6, 0.81),
        AdaptationLevel(20.9, 0.48),
        AdaptationLevel(16.2, 0.29),
    ]


@dataclass
class AdaptationConfig:
    levels: list[AdaptationLevel] = field(default_factory=_default_levels)
    trigger_ratio: float = 0.144
    reaction_delay: int = 400
    estimator_alpha: float = 0.95

    def validate(self) -> None:
        if not self.levels:
            raise ConfigError("adaptation needs at least one level")
        for a, b in zip(self.levels, self.levels[1:]):
            if not b.goodput_cap < a.goodput_cap:
                raise ConfigError("adaptation goodput_cap must strictly decrease across levels")
            if not b.failure_multiplier < a.failure_multiplier:
                raise ConfigError("adaptation failure_multiplier must strictly decrease across levels")
        for lv in self.levels:
            if not (0.0 < lv.failure_multiplier <= 1.0):
                raise ConfigError("failure_multiplier must lie in (0, 1]")
        if not (0.0 <= self.trigger_ratio <= 1.0):
            raise ConfigError("trigger_ratio must lie in [0, 1]")
        if self.reaction_delay < 0:
            raise ConfigError("reaction_delay must be non-negative")


@dataclass
class LifiChannelConfig:
    r_stable: float = 90.0
    r_knee: float = 120.0
    r_loss: float = 135.0
    injection_rate: float = INJECTION_RATE_MBPS
    packet_bytes: int = 1470
    # goodput curve
    g_plateau: float = 29.0
    g_plateau_slope: float = 0.0  # Mbps/cm
    g_mid_slope: float = 0.006  # Mbps/cm decay at zero speed, middle region
    speed_decay_gain: float = 32.3  # per m/s steepening of the middle region
    goodput_noise_sigma: float = 0.5
    # received signal
    signal_at_center: float = -41.2
    signal_slope: float = -0.0633  # dB/cm in the plateau
    signal_mid_factor: float = 12.38  # slope multiplier on (r_stable, r_knee]
    signal_edge_factor: float = 1.0  # slope multiplier beyond r_knee
    signal_noise_sigma: float = 0.54
    # packet failures
    crc_base: float = 0.0
    crc_onset: float = 96.3  # cm where failures start rising above crc_base
    crc_saturation: float = 113.8  # cm where the rise reaches crc_peak
    crc_peak: float = 0.98
    crc_jitter_sigma: float = 0.016
    arp_frame_bytes: int = 28
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    stochastic: bool = True

    def validate(self) -> None:
        if not (0 < self.r_stable < self.r_knee < self.r_loss):
            raise ConfigError("need 0 < r_stable < r_knee < r_loss")
        if not self.g_plateau > 20.0:
            raise ConfigError(f"g_plateau must exceed 20 Mbps so the QoS level is attainable, got {self.g_plateau}")
        if not (0.0 <= self.crc_base <= 1.0):
            raise ConfigError("crc_base must lie in [0, 1]")
        if not (0 <= self.crc_onset < self.crc_saturation <= self.r_loss):
            raise ConfigError("need 0 <= crc_onset < crc_saturation <= r_loss")
        if not (self.crc_base <= self.crc_peak <= 1.0):
            raise ConfigError("crc_peak must lie in [crc_base, 1]")
        if not (0 < self.arp_frame_bytes <= self.packet_bytes):
            raise ConfigError("arp_frame_bytes must lie in (0, packet_bytes]")
        for name in ("goodput_noise_sigma", "signal_noise_sigma", "crc_jitter_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        self.adaptation.validate()

    def noiseless(self) -> "LifiChannelConfig":
        """Copy with every random effect disabled (expected values, deterministic ARP)."""
        return replace(
            self,
            goodput_noise_sigma=0.0,
            signal_noise_sigma=0.0,
            crc_jitter_sigma=0.0,
            stochastic=False,
        )


@dataclass
class WifiChannelConfig:
    steady_goodput: float = 45.0
    ramp_time: int = 200
    always_up: bool = True
    settling_delay: int = 0

    def validate(self) -> None:
        if not self.steady_goodput > 20.0:
            raise ConfigError("WiFi steady_goodput must exceed 20 Mbps")
        if self.ramp_time < 0 or self.settling_delay < 0:
            raise ConfigError("ramp_time and settling_delay must be non-negative")

    def goodput_since(self, elapsed_ms: int) -> float:
        """Noise-free WiFi goodput ``elapsed_ms`` after it became active."""
        ramp = self.ramp_time + self.settling_delay
        if elapsed_ms <= self.settling_delay:
            return 0.0 if ramp > 0 else self.steady_goodput
        if elapsed_ms >= ramp:
            return self.steady_goodput
        return self.steady_goodput * (elapsed_ms - self.settling_delay) / self.ramp_time


@dataclass
class TraceRecord:
    t: int
    distance: float
    signal: float
    crc_ratio: float
    goodput: float


# ---------------------------------------------------------------------------
# mean curves


def lifi_mean_goodput(d: float, speed: float, cfg: LifiChannelConfig) -> float:
    """Noise-free LiFi goodput in Mbps at distance ``d`` cm and speed m/s."""
    if d > cfg.r_loss:
        return 0.0
    g_stable = cfg.g_plateau + cfg.g_plateau_slope * cfg.r_stable
    if d <= cfg.r_stable:
        g = cfg.g_plateau + cfg.g_plateau_slope * d
    else:
        mid = cfg.g_mid_slope * (1.0 + cfg.speed_decay_gain * speed)
        g_knee = max(0.0, g_stable - mid * (cfg.r_knee - cfg.r_stable))
        if d <= cfg.r_knee:
            g = max(0.0, g_stable - mid * (d - cfg.r_stable))
        else:
            g = g_knee * (cfg.r_loss - d) / (cfg.r_loss - cfg.r_knee)
    return min(cfg.injection_rate, max(0.0, g))


def lifi_mean_signal(d: float, cfg: LifiChannelConfig) -> float:
    """Mean received LiFi signal power (dBm); piecewise linear, non-increasing in ``d``."""
    s = cfg.signal_slope
    mid_span = min(max(d - cfg.r_stable, 0.0), cfg.r_knee - cfg.r_stable)
    edge_span = max(d - cfg.r_knee, 0.0)
    w = (
        cfg.signal_at_center
        + s * min(d, cfg.r_stable)
        + s * cfg.signal_mid_factor * mid_span
        + s * cfg.signal_edge_factor * edge_span
    )
    return clamp_signal(w)


def raw_failure_probability(d: float, cfg: LifiChannelConfig) -> float:
    """Packet failure probability before robustness adaptation."""
    if d >= cfg.r_loss:
        return 1.0
    u = min(1.0, max(0.0, (d - cfg.crc_onset) / (cfg.crc_saturation - cfg.crc_onset)))
    # smoothstep: flat at both ends, steepest halfway
    return cfg.crc_base + (cfg.crc_peak - cfg.crc_base) * u * u * (3.0 - 2.0 * u)


def failure_probability(d: float, level: int, cfg: LifiChannelConfig) -> float:
    return raw_failure_probability(d, cfg) * cfg.adaptation.levels[level].failure_multiplier


def arp_success_probability(failure_ratio: float, frame_fraction: float) -> float:
    """Probability that one ARP request/reply round trip completes.

    ``failure_ratio`` is measured on full data frames. Errors are treated as
    independent per byte, so a frame ``frame_fraction`` times as long survives
    with probability ``(1 - failure_ratio) ** frame_fraction``. The request
    and the reply legs are independent.
    """
    ok = 1.0 - min(1.0, max(0.0, failure_ratio))
    return (ok ** frame_fraction) ** 2


def mean_signal_crossing(cfg: LifiChannelConfig, level: float = -62.0, start: float = 0.0,
                         stop: float = 200.0, step: float = 0.1) -> float | None:
    """Smallest swept distance whose mean signal is at or below ``level``."""
    for d in np.arange(start, stop + step / 2, step):
        if lifi_mean_signal(float(d), cfg) <= level:
            return round(float(d), 6)
    return None


# ---------------------------------------------------------------------------
# stepping


@dataclass
class ChannelStreams:
    signal: np.random.Generator
    crc: np.random.Generator
    arp: np.random.Generator
    goodput: np.random.Generator

    @classmethod
    def for_seed(cls, seed: int) -> "ChannelStreams":
        return cls(
            signal=rng_stream(seed, STREAM_SIGNAL),
            crc=rng_stream(seed, STREAM_CRC),
            arp=rng_stream(seed, STREAM_ARP),
            goodput=rng_stream(seed, STREAM_GOODPUT),
        )


@dataclass
class ChannelState:
    lifi: LifiChannelConfig
    wifi: WifiChannelConfig = field(default_factory=WifiChannelConfig)
    level: int = 0
    estimator: EwmaFilter | None = None
    above_since: int | None = None
    level_trace: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.estimator is None:
            self.estimator = EwmaFilter(self.lifi.adaptation.estimator_alpha)


def adaptation_step(state: ChannelState, crc_estimate: float, t: int) -> int:
    """Advance the robustness level once the failure estimate has stayed above
    the trigger ratio for ``reaction_delay`` ms. Levels never retreat."""
    ad = state.lifi.adaptation
    if crc_estimate > ad.trigger_ratio:
        if state.above_since is None:
            state.above_since = t
        if t - state.above_since >= ad.reaction_delay and state.level < len(ad.levels) - 1:
            state.level += 1
            state.above_since = None
    else:
        state.above_since = None
    return state.level


def packets_per_window(rate_mbps: float, cfg: LifiChannelConfig, delta_t: int = DELTA_T_MS) -> int:
    bits = rate_mbps * 1e6 * delta_t / 1000.0
    return max(10, int(round(bits / (cfg.packet_bytes * 8))))


def step_channel(state: ChannelState, kin: Kinematics, t: int, streams: ChannelStreams | None) -> MetricSample:
    """Produce the observables at grid tick ``t`` and update adaptation state.

    Every stream is drawn exactly once per tick, whatever the branch taken,
    so enabling or disabling one effect never shifts another's sequence.
    """
    cfg = state.lifi
    d = kin.distance(t)
    lifi_up = d <= cfg.r_loss
    stochastic = cfg.stochastic and streams is not None

    z_sig = streams.signal.standard_normal() if streams is not None else 0.0
    z_jit = streams.crc.standard_normal() if streams is not None else 0.0
    u_arp = streams.arp.random() if streams is not None else 0.0
    z_gp = streams.goodput.standard_normal() if streams is not None else 0.0

    signal = clamp_signal(lifi_mean_signal(d, cfg) + cfg.signal_noise_sigma * z_sig)

    level = state.level
    cap = cfg.adaptation.levels[level].goodput_cap
    g_mean = lifi_mean_goodput(d, kin.speed, cfg)
    p = failure_probability(d, level, cfg)
    if cfg.crc_jitter_sigma > 0 and 0.0 < p < 1.0:
        s = cfg.crc_jitter_sigma
        p = min(1.0, p * math.exp(s * z_jit - 0.5 * s * s))

    if not lifi_up:
        crc = 1.0
    elif stochastic:
        n = packets_per_window(min(cap, cfg.injection_rate, max(g_mean, 1.0)), cfg)
        crc = streams.crc.binomial(n, p) / n
    else:
        crc = p

    if lifi_up:
        g = min(cfg.injection_rate, g_mean) * (1.0 - crc) + cfg.goodput_noise_sigma * z_gp
        goodput = min(cap, cfg.injection_rate, max(0.0, g))
    else:
        goodput = 0.0

    if stochastic:
        lifi_reply = lifi_up and u_arp < arp_success_probability(crc, cfg.arp_frame_bytes / cfg.packet_bytes)
    else:
        lifi_reply = lifi_up

    est = ewma_update(state.estimator, crc)
    adaptation_step(state, est, t)
    state.level_trace.append(state.level)

    wifi_up = state.wifi.always_up
    return MetricSample(
        t=t,
        distance=d,
        signal=signal,
        crc_ratio=crc,
        goodput=goodput,
        link_up={"lifi": lifi_up, "wifi": wifi_up},
        arp_reply={"lifi": lifi_reply, "wifi": wifi_up},
    )


# ---------------------------------------------------------------------------
# trace files


def _validate_record(rec: TraceRecord, line: int) -> None:
    for name in ("distance", "signal", "crc_ratio", "goodput"):
        if not math.isfinite(getattr(rec, name)):
            raise TraceError(f"{name} is not finite", line)
    if rec.t < 0:
        raise TraceError("t_ms must be non-negative", line)
    if rec.distance < 0:
        raise TraceError("distance_cm must be non-negative", line)
    if not (0.0 <= rec.crc_ratio <= 1.0):
        raise TraceError(f"crc_ratio {rec.crc_ratio} outside [0, 1]", line)
    if rec.goodput < 0:
        raise TraceError("goodput_mbps must be non-negative", line)


def load_trace(path: str | Path) -> list[TraceRecord]:
    """Parse a trace CSV. Extra trailing columns (timeline exports) are ignored."""
    records: list[TraceRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError("missing header", 1) from None
        if [h.strip() for h in header[: len(TRACE_HEADER)]] != TRACE_HEADER:
            raise TraceError(f"header must start with {','.join(TRACE_HEADER)}", 1)
        prev_t = None
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(TRACE_HEADER):
                raise TraceError(f"expected {len(TRACE_HEADER)} fields, got {len(row)}", line)
            try:
                rec = TraceRecord(
                    t=int(row[0]),
                    distance=float(row[1]),
                    signal=float(row[2]),
                    crc_ratio=float(row[3]),
                    goodput=float(row[4]),
                )
            except ValueError as exc:
                raise TraceError(f"cannot parse row: {exc}", line) from None
            _validate_record(rec, line)
            if prev_t is not None and rec.t <= prev_t:
                raise TraceError(f"time {rec.t} not strictly after {prev_t}", line)
            prev_t = rec.t
            records.append(rec)
    return records


def write_trace(path: str | Path, records: list[TraceRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in records:
            w.writerow([r.t, repr(r.distance), repr(r.signal), repr(r.crc_ratio), repr(r.goodput)])


def sample_to_record(s: MetricSample) -> TraceRecord:
    return TraceRecord(t=s.t, distance=s.distance, signal=s.signal, crc_ratio=s.crc_ratio, goodput=s.goodput)
