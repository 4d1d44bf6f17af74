"""Shared value types, the EWMA filter and the seeded random-stream contract."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DELTA_T_MS = 100
INJECTION_RATE_MBPS = 40.0
SIGNAL_FLOOR_DBM = -100.0
SIGNAL_CEIL_DBM = 0.0

# Per-subsystem stream ids; one noise source never perturbs another.
STREAM_SIGNAL = 0
STREAM_CRC = 1
STREAM_ARP = 2
STREAM_GOODPUT = 3


class InputDomainError(ValueError):
    """Raised when a numeric input lies outside the domain an operation accepts."""


@dataclass(frozen=True)
class MetricSample:
    """One grid tick worth of channel observables.

    ``link_up`` maps a technology name (``"lifi"``, ``"wifi"``) to whether the
    physical link exists at this tick. ``arp_reply`` holds the outcome of the
    probe round trip sent on each port at this tick.
    """

    t: int
    distance: float
    signal: float
    crc_ratio: float
    goodput: float
    link_up: dict[str, bool] = field(default_factory=dict)
    arp_reply: dict[str, bool] = field(default_factory=dict)


@dataclass
class EwmaFilter:
    alpha: float = 0.05
    state: float = 0.0
    seeded: bool = False

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InputDomainError(f"alpha must lie in (0, 1], got {self.alpha}")

    def update(self, x: float) -> float:
        return ewma_update(self, x)

    def reset(self) -> None:
        self.state = 0.0
        self.seeded = False


def ewma_update(filt: EwmaFilter, x: float) -> float:
    """Advance ``filt`` by one sample and return the new smoothed value.

    The first sample seeds the state; afterwards
    ``state = (1 - alpha) * state + alpha * x``.
    """
    if not math.isfinite(x):
        raise InputDomainError(f"EWMA input must be finite, got {x!r}")
    if not filt.seeded:
        filt.state = float(x)
        filt.seeded = True
    else:
        filt.state = (1.0 - filt.alpha) * filt.state + filt.alpha * x
    return filt.state


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent deterministic generator for ``(seed, stream_id)``.

    PCG64 seeded through ``SeedSequence`` gives the same sequence on every
    platform, and distinct ``stream_id`` values give unrelated sequences.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream_id)])))


def replica_seed(seed: int, speed: float, replica_index: int) -> int:
    """Master seed of one replica, keyed by indices rather than execution order."""
    speed_key = int(round(speed * 10_000))
    ss = np.random.SeedSequence([int(seed), speed_key, int(replica_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def clamp_signal(dbm: float) -> float:
    return min(SIGNAL_CEIL_DBM, max(SIGNAL_FLOOR_DBM, dbm))


def tick_times(n: int, delta_t: int = DELTA_T_MS) -> list[int]:
    return [k * delta_t for k in range(n)]
