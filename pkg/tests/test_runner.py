import copy
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lifiho.core import MetricSample
from lifiho.linkwatch import Reason, WatchVerdict
from lifiho.runner import (
    LISTING_TEAM,
    HandoverEvent,
    PortSpec,
    TeamState,
    Technology,
    default_team,
    effective_goodput,
    parse_team,
    runner_step,
    team_to_dict,
)
from lifiho.channel import WifiChannelConfig

LIFI, WIFI = "wlx70b3d5958671", "wlp1s0"
OK = WatchVerdict()
DOWN = WatchVerdict(link_ok=False)
CRC_TRIGGER = WatchVerdict(trigger_handover=True, reason=Reason.CRC_ABOVE_CONFIRMED)

# the configuration listing from the testbed, verbatim
LISTING_TEXT = """
{
  "device": "team0",
  "notify_peers": {"count": 4, "interval": 50},
  "runner": {"name": "activebackup", "hwaddr_policy": "by_active"},
  "ports": {
    "wlp1s0": {
      "prio": 1,
      "link_watch": {"name": "arp_ping", "interval": 100, "missed_max": 2,
                     "target_host": "192.168.1.2", "validate_active": false,
                     "validate_inactive": false, "send_always": true}
    },
    "wlx70b3d5958671": {
      "prio": 2,
      "link_watch": {"name": "arp_ping", "interval": 100, "missed_max": 2,
                     "target_host": "192.168.1.2", "validate_active": false,
                     "validate_inactive": false, "send_always": true}
    }
  }
}
"""


def _team():
    return default_team().new_state()


def _sample(g=25.0):
    return MetricSample(t=0, distance=50.0, signal=-50.0, crc_ratio=0.0, goodput=g,
                        link_up={"lifi": True, "wifi": True}, arp_reply={"lifi": True, "wifi": True})


def test_highest_prio_up_port_starts_active():
    st_ = _team()
    assert st_.active == LIFI
    assert st_.active_technology is Technology.LIFI


def test_no_trigger_keeps_active():
    st_ = _team()
    for t in range(0, 1000, 100):
        runner_step(st_, {LIFI: OK, WIFI: OK}, t)
    assert st_.active == LIFI and st_.handovers == []


def test_connectivity_loss_hands_over():
    st_ = _team()
    runner_step(st_, {LIFI: OK, WIFI: OK}, 0)
    runner_step(st_, {LIFI: OK, WIFI: OK}, 100)
    runner_step(st_, {LIFI: DOWN, WIFI: OK}, 200)
    assert st_.handovers == [HandoverEvent(200, LIFI, WIFI, Reason.CONNECTIVITY_LOST)]
    assert st_.active == WIFI


def test_policy_trigger_hands_over_and_wifi_ramps():
    st_ = _team()
    k = 700
    runner_step(st_, {LIFI: CRC_TRIGGER, WIFI: OK}, k)
    assert st_.handovers[0].t == k and st_.handovers[0].reason is Reason.CRC_ABOVE_CONFIRMED
    wifi = WifiChannelConfig()
    assert effective_goodput(st_, _sample(), k + wifi.ramp_time, wifi) == wifi.steady_goodput
    assert effective_goodput(st_, _sample(), k + wifi.ramp_time - 100, wifi) < wifi.steady_goodput


def test_latched_after_handover():
    st_ = _team()
    runner_step(st_, {LIFI: CRC_TRIGGER, WIFI: OK}, 100)
    for t in range(200, 2000, 100):
        runner_step(st_, {LIFI: OK, WIFI: OK}, t)
    assert st_.active == WIFI and len(st_.handovers) == 1


def test_without_latch_returns_to_priority_port():
    st_ = _team()
    st_.latch_on_handover = False
    runner_step(st_, {LIFI: DOWN, WIFI: OK}, 100)
    runner_step(st_, {LIFI: OK, WIFI: OK}, 200)
    assert st_.active == LIFI


def test_total_outage_and_recovery():
    st_ = _team()
    runner_step(st_, {LIFI: DOWN, WIFI: DOWN}, 100)
    assert st_.active is None
    assert effective_goodput(st_, _sample(), 100) == 0.0
    assert any("total outage" in e for _, e in st_.event_log)
    runner_step(st_, {LIFI: DOWN, WIFI: OK}, 200)
    assert st_.active == WIFI


def test_notify_peers_burst_logged():
    st_ = _team()
    runner_step(st_, {LIFI: DOWN, WIFI: OK}, 300)
    notes = [(t, e) for t, e in st_.event_log if e.startswith("notify_peers")]
    assert [t for t, _ in notes] == [300, 350, 400, 450]


def test_lifi_goodput_passthrough():
    st_ = _team()
    assert effective_goodput(st_, _sample(23.5), 0) == 23.5


@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_active_port_is_up_whenever_one_is(steps):
    st_ = _team()
    for k, (lifi_ok, wifi_ok, trig) in enumerate(steps):
        lv = WatchVerdict(link_ok=lifi_ok, trigger_handover=trig and lifi_ok,
                          reason=Reason.SIGNAL_BELOW if trig and lifi_ok else Reason.NONE)
        runner_step(st_, {LIFI: lv, WIFI: WatchVerdict(link_ok=wifi_ok)}, k * 100)
        if lifi_ok or wifi_ok:
            assert st_.active is not None
            assert st_.up[st_.active]
        for ev in st_.handovers:
            assert ev.from_port != ev.to_port


def test_handover_event_needs_distinct_ports():
    with pytest.raises(ValueError):
        HandoverEvent(0, LIFI, LIFI, Reason.NONE)


def test_duplicate_priorities_rejected():
    ports = [PortSpec("a", 1, Technology.LIFI), PortSpec("b", 1, Technology.WIFI)]
    with pytest.raises(ValueError):
        TeamState(ports=ports)


def test_verbatim_listing_parses_with_only_mapping_warnings():
    warns = []
    cfg = parse_team(json.loads(LISTING_TEXT), warnings=warns)
    assert len(warns) == 2
    assert all("mapped to" in w for w in warns)
    assert cfg.lifi_port().name == LIFI and cfg.wifi_port().name == WIFI
    lw = cfg.lifi_port().link_watch
    assert (lw.interval, lw.missed_max, lw.send_always) == (100, 2, True)
    assert (cfg.notify_peers_count, cfg.notify_peers_interval) == (4, 50)


def test_unknown_fields_warn_and_survive_round_trip():
    data = copy.deepcopy(LISTING_TEAM)
    data["mtu"] = 1500
    data["runner"]["tx_balancer"] = {"name": "basic"}
    data["ports"][WIFI]["technology"] = "wifi"
    data["ports"][LIFI]["technology"] = "lifi"
    data["ports"][LIFI]["queue_id"] = 3
    warns = []
    cfg = parse_team(data, warnings=warns)
    assert len(warns) == 3
    again = team_to_dict(parse_team(team_to_dict(cfg)))
    assert again == team_to_dict(cfg)
    assert again["mtu"] == 1500 and again["ports"][LIFI]["queue_id"] == 3


@pytest.mark.parametrize("mutate,msg", [
    (lambda d: d["ports"].pop(LIFI), "at least two"),
    (lambda d: d["ports"][LIFI].update(prio="high"), "prio"),
    (lambda d: d["runner"].update(name="roundrobin"), "activebackup"),
    (lambda d: d["ports"][LIFI]["link_watch"].update(missed_max=0), "missed_max"),
])
def test_bad_team_config_names_the_field(mutate, msg):
    data = copy.deepcopy(LISTING_TEAM)
    mutate(data)
    with pytest.raises(ValueError, match=msg):
        parse_team(data)
