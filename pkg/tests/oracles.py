"""Independent reference implementations shared by the unit and acceptance suites."""

import math

import numpy as np

from lifiho.core import MetricSample
from lifiho.linkwatch import CrcPolicyConfig, CrcPolicyState, SignalPolicyConfig, SignalPolicyState, crc_policy_step, signal_policy_step


def ewma_direct(alpha, xs):
    """Closed form of the recursion seeded by the first sample."""
    n = len(xs) - 1
    return (1 - alpha) ** n * xs[0] + sum(alpha * (1 - alpha) ** (n - k) * xs[k] for k in range(1, n + 1))


def sample(signal=-55.0, crc=0.0, t=0):
    return MetricSample(t=t, distance=50.0, signal=signal, crc_ratio=crc, goodput=25.0)


def reference_downs(replies, interval, missed_max):
    """Independent restatement: a down is declared at the tick where a run of
    consecutive misses reaches length missed_max."""
    downs, run = [], 0
    for k, r in enumerate(replies):
        run = 0 if r else run + 1
        if run == missed_max:
            downs.append(k * interval)
    return downs


def signal_trigger_tick(signals, lam, alpha=0.05):
    cfg = SignalPolicyConfig(lambda_w=lam, alpha=alpha)
    s = SignalPolicyState.new(cfg)
    for k, w in enumerate(signals):
        if signal_policy_step(s, sample(signal=w), cfg).trigger_handover:
            return k
    return None


def crc_trigger_tick(signals, crcs, lam_e, lam_w, confirm_on="raw"):
    cfg = CrcPolicyConfig(lambda_e=lam_e, lambda_w_confirm=lam_w, confirm_on=confirm_on)
    s = CrcPolicyState.new(cfg)
    for k, (w, e) in enumerate(zip(signals, crcs)):
        if crc_policy_step(s, sample(signal=w, crc=e), cfg).trigger_handover:
            return k
    return None


def random_trace(rng, n=400):
    d = np.linspace(0, 1, n)
    signal = -50 - 25 * d ** rng.uniform(0.5, 3) + rng.normal(0, rng.uniform(0.2, 3), n)
    crc = np.clip(0.4 * d ** rng.uniform(0.5, 3) + rng.normal(0, 0.05, n), 0, 1)
    return signal.tolist(), crc.tolist()


def later_or_equal(a, b):
    """Trigger tick a is no earlier than b (None means never)."""
    if a is None:
        return True
    return b is not None and a >= b


def loess_oracle(t, y, span):
    """Per-point weighted least squares by brute force: sort every point by
    (distance, index), keep the nearest q, solve the 2x2 normal equations."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    n = len(t)
    q = max(3, int(round(span * n)))
    min_step = np.min(np.diff(t))
    out = np.empty(n)
    for i in range(n):
        dist = np.abs(t - t[i])
        order = np.lexsort((np.arange(n), dist))[:q]
        d = dist[order]
        h = d.max() + min_step
        w = (1 - (d / h) ** 3) ** 3
        X = np.column_stack([np.ones(q), t[order] - t[i]])
        A = X.T @ (w[:, None] * X)
        b = X.T @ (w * y[order])
        beta = np.linalg.solve(A, b)
        out[i] = beta[0]
    return out


def closed_form_eigen(cov):
    """Roots of the characteristic polynomial and matching eigenvectors of a symmetric 2x2."""
    a, b, c = cov[0][0], cov[0][1], cov[1][1]
    tr, det = a + c, a * c - b * b
    disc = math.sqrt(max(0.0, tr * tr / 4 - det))
    lams = [tr / 2 + disc, tr / 2 - disc]
    vecs = []
    for lam in lams:
        if abs(b) > 1e-300:
            v = (b, lam - a) if abs(lam - a) >= abs(lam - c) else (lam - c, b)
        else:
            v = (1.0, 0.0) if (abs(a - lam) <= abs(c - lam)) else (0.0, 1.0)
        norm = math.hypot(*v)
        vecs.append((v[0] / norm, v[1] / norm))
    return lams, vecs


def two_pass_cov(pts):
    n = len(pts)
    mx = sum(p[0] for p in pts) / n
    my = sum(p[1] for p in pts) / n
    sxx = sum((p[0] - mx) ** 2 for p in pts) / (n - 1)
    syy = sum((p[1] - my) ** 2 for p in pts) / (n - 1)
    sxy = sum((p[0] - mx) * (p[1] - my) for p in pts) / (n - 1)
    return [[sxx, sxy], [sxy, syy]]
