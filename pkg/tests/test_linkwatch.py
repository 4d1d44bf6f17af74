import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lifiho.linkwatch import (
    ArpWatchConfig,
    ArpWatchState,
    CrcPolicyConfig,
    CrcPolicyState,
    Reason,
    SignalPolicyConfig,
    SignalPolicyState,
    WatchVerdict,
    arp_watch_step,
    crc_policy_step,
    merge_verdicts,
    signal_policy_step,
)

from oracles import crc_trigger_tick, later_or_equal, random_trace, reference_downs, sample, signal_trigger_tick


def run_arp(replies, cfg=ArpWatchConfig()):
    st_ = ArpWatchState()
    downs = []
    for k, r in enumerate(replies):
        was = st_.link_ok
        v = arp_watch_step(st_, k * cfg.interval, r, cfg)
        if was and not v.link_ok:
            downs.append(k * cfg.interval)
    return downs


def test_arp_replies_keep_link_up():
    assert run_arp([True] * 500) == []


def test_arp_listing_example():
    assert run_arp([True, False, False]) == [200]


def test_arp_alternating_never_down():
    assert run_arp([False, True] * 100) == []


def test_arp_recovers_on_first_reply():
    cfg = ArpWatchConfig()
    s = ArpWatchState()
    for k, r in enumerate([False, False, False, True]):
        v = arp_watch_step(s, k * 100, r, cfg)
    assert v.link_ok and s.missed == 0


def test_arp_matches_reference_automaton():
    rng = np.random.default_rng(7)
    cfg = ArpWatchConfig(interval=100, missed_max=2)
    for _ in range(10_000):
        n = int(rng.integers(1, 40))
        replies = list(rng.random(n) < rng.uniform(0.2, 0.95))
        assert run_arp(replies, cfg) == reference_downs(replies, 100, 2)


@given(st.lists(st.booleans(), max_size=60), st.integers(1, 5), st.sampled_from([50, 100, 200]))
def test_arp_property_any_parameters(replies, missed_max, interval):
    cfg = ArpWatchConfig(interval=interval, missed_max=missed_max)
    assert run_arp(replies, cfg) == reference_downs(replies, interval, missed_max)


@pytest.mark.parametrize("kw", [dict(interval=0), dict(missed_max=0), dict(name="ethtool")])
def test_arp_config_validation(kw):
    with pytest.raises(ValueError):
        ArpWatchConfig(**kw).validate()


def test_verdict_needs_reason():
    with pytest.raises(ValueError):
        WatchVerdict(trigger_handover=True)


def test_merge_keeps_link_state():
    down = WatchVerdict(link_ok=False, reason=Reason.CONNECTIVITY_LOST)
    trig = WatchVerdict(trigger_handover=True, reason=Reason.SIGNAL_BELOW)
    m = merge_verdicts(down, trig)
    assert not m.link_ok and m.trigger_handover and m.reason is Reason.SIGNAL_BELOW
    assert merge_verdicts(down, None) is down


def test_signal_constant_above_never_triggers():
    assert signal_trigger_tick([-55.0] * 1000, -62) is None


def test_signal_seeded_below_triggers_first_tick():
    assert signal_trigger_tick([-70.0] * 5, -62) == 0


def test_signal_step_input_closed_form():
    # signal sits at -55 up to and including tick t0, then steps to -70
    t0 = 50
    trace = [-55.0] * (t0 + 1) + [-70.0] * 100
    n = math.ceil(math.log(8 / 15) / math.log(0.95))
    assert n == 13
    assert signal_trigger_tick(trace, -62) == t0 + n
    # direct iteration agrees
    w, k = -55.0, 0
    while w >= -62:
        w = 0.95 * w + 0.05 * -70.0
        k += 1
    assert k == n


def test_signal_reason():
    cfg = SignalPolicyConfig()
    v = signal_policy_step(SignalPolicyState.new(cfg), sample(signal=-80), cfg)
    assert v.trigger_handover and v.reason is Reason.SIGNAL_BELOW


def test_signal_debounce():
    assert signal_trigger_tick([-70.0] * 5, -62) == 0
    cfg = SignalPolicyConfig(debounce=3)
    s = SignalPolicyState.new(cfg)
    hits = [signal_policy_step(s, sample(signal=-70), cfg).trigger_handover for _ in range(4)]
    assert hits == [False, False, True, True]


def crc_state(e, w):
    cfg = CrcPolicyConfig(lambda_e=0.20, lambda_w_confirm=-62, confirm_on="ewma")
    s = CrcPolicyState.new(cfg)
    s.crc.state, s.crc.seeded = e, True
    s.signal.state, s.signal.seeded = w, True
    return s, cfg


@pytest.mark.parametrize("e,w,expected", [(0.25, -63.0, True), (0.25, -55.0, False), (0.10, -65.0, False)])
def test_crc_condition_table(e, w, expected):
    s, cfg = crc_state(e, w)
    # feeding the current values keeps both filters where they are
    v = crc_policy_step(s, sample(signal=w, crc=e), cfg)
    assert v.trigger_handover is expected
    if expected:
        assert v.reason is Reason.CRC_ABOVE_CONFIRMED


def test_crc_raw_confirmation_uses_instant_signal():
    cfg = CrcPolicyConfig(confirm_on="raw")
    s = CrcPolicyState.new(cfg)
    s.crc.state, s.crc.seeded = 0.3, True
    s.signal.state, s.signal.seeded = -55.0, True
    assert crc_policy_step(s, sample(signal=-70, crc=0.3), cfg).trigger_handover
    assert not crc_policy_step(s, sample(signal=-55, crc=0.3), cfg).trigger_handover


def test_policy_never_latches():
    cfg = SignalPolicyConfig(alpha=1.0)
    s = SignalPolicyState.new(cfg)
    out = [signal_policy_step(s, sample(signal=w), cfg).trigger_handover for w in (-70, -50, -70)]
    assert out == [True, False, True]


def test_threshold_monotonicity_random_traces():
    rng = np.random.default_rng(11)
    for _ in range(100):
        sig, crc = random_trace(rng)
        lams = sorted(rng.uniform(-70, -55, 4), reverse=True)
        ticks = [signal_trigger_tick(sig, lam) for lam in lams]
        assert all(later_or_equal(b, a) for a, b in zip(ticks, ticks[1:]))
        for mode in ("raw", "ewma"):
            les = sorted(rng.uniform(0.05, 0.35, 3))
            ticks = [crc_trigger_tick(sig, crc, le, -62, mode) for le in les]
            assert all(later_or_equal(b, a) for a, b in zip(ticks, ticks[1:]))
            lws = sorted(rng.uniform(-70, -55, 3))
            ticks = [crc_trigger_tick(sig, crc, 0.15, lw, mode) for lw in lws]
            # relaxing the confirmation toward 0 dBm never delays the trigger
            assert all(later_or_equal(a, b) for a, b in zip(ticks, ticks[1:]))


@given(st.lists(st.floats(-90, -40), min_size=1, max_size=80), st.floats(-80, -50), st.floats(0.1, 10))
def test_signal_monotonicity_property(sig, lam, delta):
    assert later_or_equal(signal_trigger_tick(sig, lam - delta), signal_trigger_tick(sig, lam))
