"""Link watchers and handover trigger policies.

Three mechanisms feed the team runner:

* ``arp_watch_step`` declares a port down after ``missed_max`` consecutive
  unanswered probe round trips (the connectivity-loss baseline);
* ``signal_policy_step`` fires when the EWMA of the received signal power
  drops below a threshold;
* ``crc_policy_step`` fires when the EWMA of the CRC failure ratio exceeds a
  threshold *and* the signal power confirms the link is genuinely degrading.

Policies never latch; the runner quiesces them after a handover.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from lifiho.core import EwmaFilter, MetricSample, ewma_update


class Reason(str, Enum):
    NONE = "none"
    CONNECTIVITY_LOST = "connectivity_lost"
    SIGNAL_BELOW = "signal_below"
    CRC_ABOVE_CONFIRMED = "crc_above_confirmed"


@dataclass(frozen=True)
class WatchVerdict:
    link_ok: bool = True
    trigger_handover: bool = False
    reason: Reason = Reason.NONE

    def __post_init__(self):
        if self.trigger_handover and self.reason is Reason.NONE:
            raise ValueError("a triggering verdict needs a reason")


OK = WatchVerdict()


def merge_verdicts(link: WatchVerdict, policy: WatchVerdict | None) -> WatchVerdict:
    """Combine a link-watch verdict with an optional policy verdict for one port."""
    if policy is None or not policy.trigger_handover:
        return link
    return WatchVerdict(link_ok=link.link_ok, trigger_handover=True, reason=policy.reason)


# ---------------------------------------------------------------------------
# arp_ping


@dataclass
class ArpWatchConfig:
    name: str = "arp_ping"
    interval: int = 100
    missed_max: int = 2
    target_host: str = "192.168.1.2"
    validate_active: bool = False
    validate_inactive: bool = False
    send_always: bool = True

    def validate(self) -> None:
        if self.name != "arp_ping":
            raise ValueError(f"unsupported link_watch {self.name!r}; only arp_ping is modelled")
        if self.interval <= 0:
            raise ValueError("link_watch interval must be positive")
        if self.missed_max < 1:
            raise ValueError("link_watch missed_max must be at least 1")


@dataclass
class ArpWatchState:
    missed: int = 0
    link_ok: bool = True
    down_at: int | None = None


def arp_watch_step(state: ArpWatchState, tick: int, reply_received: bool, cfg: ArpWatchConfig) -> WatchVerdict:
    if reply_received:
        state.missed = 0
        state.link_ok = True
    else:
        state.missed += 1
        if state.link_ok and state.missed >= cfg.missed_max:
            state.link_ok = False
            state.down_at = tick
    if state.link_ok:
        return OK
    return WatchVerdict(link_ok=False, reason=Reason.CONNECTIVITY_LOST)


# ---------------------------------------------------------------------------
# threshold policies


@dataclass
class SignalPolicyConfig:
    lambda_w: float = -62.0
    alpha: float = 0.05
    debounce: int = 1  # consecutive ticks the condition must hold

    def validate(self) -> None:
        if not self.lambda_w < 0:
            raise ValueError("signal threshold must be negative (dBm)")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.debounce < 1:
            raise ValueError("debounce must be at least 1")


@dataclass
class SignalPolicyState:
    signal: EwmaFilter
    run: int = 0

    @classmethod
    def new(cls, cfg: SignalPolicyConfig) -> "SignalPolicyState":
        return cls(EwmaFilter(cfg.alpha))


def signal_policy_step(state: SignalPolicyState, sample: MetricSample, cfg: SignalPolicyConfig) -> WatchVerdict:
    w = ewma_update(state.signal, sample.signal)
    state.run = state.run + 1 if w < cfg.lambda_w else 0
    if state.run >= cfg.debounce:
        return WatchVerdict(trigger_handover=True, reason=Reason.SIGNAL_BELOW)
    return OK


@dataclass
class CrcPolicyConfig:
    lambda_e: float = 0.20
    lambda_w_confirm: float = -62.0
    alpha: float = 0.05
    # "raw" compares the instantaneous signal reading, "ewma" its smoothed value
    confirm_on: str = "raw"
    debounce: int = 1

    def validate(self) -> None:
        if not (0.0 < self.lambda_e < 1.0):
            raise ValueError("CRC threshold must lie in (0, 1)")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.confirm_on not in ("raw", "ewma"):
            raise ValueError("confirm_on must be 'raw' or 'ewma'")
        if self.debounce < 1:
            raise ValueError("debounce must be at least 1")


@dataclass
class CrcPolicyState:
    crc: EwmaFilter
    signal: EwmaFilter
    run: int = 0
    last_confirm_value: float = field(default=float("nan"))

    @classmethod
    def new(cls, cfg: CrcPolicyConfig) -> "CrcPolicyState":
        return cls(EwmaFilter(cfg.alpha), EwmaFilter(cfg.alpha))


def crc_policy_step(state: CrcPolicyState, sample: MetricSample, cfg: CrcPolicyConfig) -> WatchVerdict:
    e = ewma_update(state.crc, sample.crc_ratio)
    w = ewma_update(state.signal, sample.signal)
    confirm = w if cfg.confirm_on == "ewma" else sample.signal
    state.last_confirm_value = confirm
    hit = e > cfg.lambda_e and confirm < cfg.lambda_w_confirm
    state.run = state.run + 1 if hit else 0
    if state.run >= cfg.debounce:
        return WatchVerdict(trigger_handover=True, reason=Reason.CRC_ABOVE_CONFIRMED)
    return OK
