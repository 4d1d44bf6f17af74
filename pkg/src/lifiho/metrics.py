"""Post-processing of replica timelines: smoothing, QoS outage, takeover
distance and covariance-ellipse aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

DEFAULT_QOS_MBPS = 20.0
DEFAULT_SPAN = 0.2
TAKEOVER_CAP_CM = 135.0


@dataclass
class SmoothedSeries:
    t: np.ndarray  # ms
    value: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def loess_window(n: int, span: float) -> int:
    return max(3, int(round(span * n)))


def _window_starts(t: np.ndarray, q: int) -> np.ndarray:
    # Window for point i is [lo, lo + q): the q nearest neighbours, ties to the earlier index.
    n = len(t)
    lo = np.empty(n, dtype=np.int64)
    j = 0
    for i in range(n):
        while j + q < n and (t[j + q] - t[i]) < (t[i] - t[j]):
            j += 1
        lo[i] = j
    return lo


def loess_smooth(t: Sequence[float], g: Sequence[float], span: float = DEFAULT_SPAN) -> SmoothedSeries:
    """Locally weighted linear regression (tricube weights, nearest-neighbour windows).

    Each point is replaced by the value at that point of a weighted
    least-squares line fitted to its ``max(3, round(span * n))`` nearest
    neighbours. The bandwidth is the distance to the farthest neighbour plus
    the smallest sampling step, so every point of the window keeps a positive
    weight. Weights do not depend on ``g``, so the smoother is linear.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(g, dtype=float)
    n = len(t)
    if n < 3:
        raise ValueError("LOESS needs at least 3 points")
    if y.shape != t.shape:
        raise ValueError("t and g must have equal length")
    if not (0.0 < span <= 1.0):
        raise ValueError("span must lie in (0, 1]")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValueError("t must be strictly increasing")
    q = loess_window(n, span)
    lo = _window_starts(t, q)
    idx = lo[:, None] + np.arange(q)[None, :]
    x = t[idx] - t[:, None]
    h = np.abs(x).max(axis=1, keepdims=True) + steps.min()
    w = (1.0 - (np.abs(x) / h) ** 3) ** 3
    yw = y[idx]
    s0 = w.sum(axis=1)
    s1 = (w * x).sum(axis=1)
    s2 = (w * x * x).sum(axis=1)
    t0 = (w * yw).sum(axis=1)
    t1 = (w * x * yw).sum(axis=1)
    det = s0 * s2 - s1 * s1
    value = (s2 * t0 - s1 * t1) / det
    return SmoothedSeries(t=t, value=value)


@dataclass
class Outage:
    duration: float  # s
    start: float | None  # s
    end: float | None  # s
    recovered: bool = True


def _crossing(t0: float, v0: float, t1: float, v1: float, level: float) -> float:
    if v1 == v0:
        return t0
    return t0 + (level - v0) / (v1 - v0) * (t1 - t0)


def measure_outage(smoothed: SmoothedSeries, qos_level: float = DEFAULT_QOS_MBPS) -> Outage:
    """Interval from the first dip below ``qos_level`` to the final recovery above it.

    Crossings between grid points are placed by linear interpolation. If the
    series ends below the level the outage runs to the last sample and is
    flagged as not recovered.
    """
    if not qos_level > 0:
        raise ValueError("qos_level must be positive")
    t = np.asarray(smoothed.t, dtype=float) / 1000.0
    v = np.asarray(smoothed.value, dtype=float)
    below = v < qos_level
    if not below.any():
        return Outage(0.0, None, None, True)
    first = int(np.argmax(below))
    last = len(v) - 1 - int(np.argmax(below[::-1]))
    start = t[0] if first == 0 else _crossing(t[first - 1], v[first - 1], t[first], v[first], qos_level)
    if last == len(v) - 1:
        return Outage(t[-1] - start, start, t[-1], recovered=False)
    end = _crossing(t[last], v[last], t[last + 1], v[last + 1], qos_level)
    return Outage(end - start, start, end, True)


def outage_duration(smoothed: SmoothedSeries, qos_level: float = DEFAULT_QOS_MBPS) -> float:
    return measure_outage(smoothed, qos_level).duration


@dataclass
class Takeover:
    distance: float
    handover: bool
    steady: bool


def takeover_distance(timeline: Any, wifi_cfg: Any, cap: float = TAKEOVER_CAP_CM,
                      factor: float = 0.9, sustain_ms: int = 500) -> Takeover:
    """Distance at which WiFi goodput is confirmed steady after the handover.

    Steady means at least ``factor * steady_goodput`` on every tick of a
    ``sustain_ms`` stretch; the distance is taken at the tick completing that
    stretch. Missing handover or confirmation yields the ``cap`` value.
    """
    if not timeline.events:
        return Takeover(cap, False, False)
    th = timeline.events[0].t
    need = factor * wifi_cfg.steady_goodput
    run_start = None
    for j, tj in enumerate(timeline.t):
        if tj < th:
            continue
        ok = timeline.active_tech[j] == "wifi" and timeline.effective_goodput[j] >= need
        if not ok:
            run_start = None
            continue
        if run_start is None:
            run_start = tj
        if tj - run_start >= sustain_ms:
            return Takeover(min(cap, float(timeline.distance[j])), True, True)
    return Takeover(cap, True, False)


@dataclass
class PolicyOutcome:
    outage_duration: float
    takeover_distance: float

    def __post_init__(self):
        if self.outage_duration < 0:
            raise ValueError("outage duration must be non-negative")
        self.takeover_distance = min(self.takeover_distance, TAKEOVER_CAP_CM)


@dataclass
class EllipseSummary:
    mean: np.ndarray
    cov: np.ndarray
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns match eigenvalues
    n: int
    sigma: float = 1.0

    @property
    def axes(self) -> list[tuple[float, list[float]]]:
        """Semi-axis length and unit direction, major axis first."""
        return [
            (self.sigma * math.sqrt(max(0.0, float(lam))), [float(c) for c in self.eigenvectors[:, k]])
            for k, lam in enumerate(self.eigenvalues)
        ]

    @property
    def angle(self) -> float:
        """Major-axis angle from the outage axis, radians."""
        v = self.eigenvectors[:, 0]
        return math.atan2(v[1], v[0])


def sample_covariance(points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    centered = points - points.mean(axis=0)
    return centered.T @ centered / (n - 1)


def ellipse_summary(outcomes: Sequence[PolicyOutcome], sigma: float = 1.0) -> EllipseSummary:
    if len(outcomes) < 2:
        raise ValueError("an ellipse needs at least 2 outcomes")
    pts = np.array([[o.outage_duration, o.takeover_distance] for o in outcomes], dtype=float)
    cov = sample_covariance(pts)
    cov = 0.5 * (cov + cov.T)
    lam, vec = np.linalg.eigh(cov)
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    vec = vec[:, order]
    # sign convention: first nonzero component positive
    for k in range(vec.shape[1]):
        col = vec[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-15)
        if nz.size and col[nz[0]] < 0:
            vec[:, k] = -col
    return EllipseSummary(mean=pts.mean(axis=0), cov=cov, eigenvalues=lam, eigenvectors=vec,
                          n=len(outcomes), sigma=sigma)
