import json

import pytest

from lifiho.cli import main
from lifiho.config import default_config_dict


@pytest.fixture
def default_json(tmp_path):
    p = tmp_path / "default.json"
    p.write_text(json.dumps(default_config_dict(), indent=2))
    return p


def _cfg(tmp_path, patch):
    d = default_config_dict()
    patch(d)
    p = tmp_path / "patched.json"
    p.write_text(json.dumps(d))
    return p


def test_config_command_prints_parseable_json(capsys):
    assert main(["config"]) == 0
    assert json.loads(capsys.readouterr().out) == default_config_dict()


def test_simulate_full_grid(tmp_path, default_json):
    out = tmp_path / "o"
    assert main(["simulate", "-c", str(default_json), "--out", str(out), "--emit-svg"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["cells"]) == 28
    assert all(c["n"] == 10 for c in summary["cells"])
    svg = (out / "ellipses.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 28


def test_simulate_filters(tmp_path):
    out = tmp_path / "o"
    rc = main(["simulate", "--speeds", "0.02", "--policies", "baseline", "--replicas", "2", "--out", str(out)])
    assert rc == 0
    cells = json.loads((out / "summary.json").read_text())["cells"]
    assert [(c["speed"], c["policy"]) for c in cells] == [(0.02, "baseline")]


def test_simulate_same_seed_byte_identical(tmp_path, default_json):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        args = ["simulate", "-c", str(default_json), "--seed", "7", "--speeds", "0.05,0.15",
                "--replicas", "3", "--out", str(out)]
        assert main(args) == 0
        runs.append((out / "summary.json").read_bytes())
    assert runs[0] == runs[1]


def test_simulate_bad_policy_flag():
    assert main(["simulate", "--policies", "signal:+3"]) == 2


def test_simulate_bad_config_exit_2(tmp_path, capsys):
    p = _cfg(tmp_path, lambda d: d["plan"].update(replicas=0))
    assert main(["simulate", "-c", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "replicas" in capsys.readouterr().err


def _export(tmp_path):
    out = tmp_path / "o"
    args = ["simulate", "--speeds", "0.1", "--policies", "crc:0.20:-62", "--replicas", "2",
            "--out", str(out), "--emit-timelines"]
    assert main(args) == 0
    index = json.loads((out / "timelines" / "index.json").read_text())
    summary = json.loads((out / "summary.json").read_text())
    return out / "timelines", index, summary


def test_replay_closure_single_policy(tmp_path, capsys):
    tdir, index, summary = _export(tmp_path)
    capsys.readouterr()
    for entry in index:
        rc = main(["replay", str(tdir / entry["file"]), "--policy", entry["policy"], "--seed", str(entry["seed"])])
        assert rc == 0
        got = json.loads(capsys.readouterr().out)
        assert got["policy"] == "crc:0.20:-62"
        want = summary["cells"][0]["outcomes"][entry["replica"]]
        for k in ("outage_s", "takeover_cm", "handover_t_ms", "handover_reason"):
            assert got[k] == want[k]


def test_replay_all_policies(tmp_path, capsys):
    tdir, index, _ = _export(tmp_path)
    capsys.readouterr()
    assert main(["replay", str(tdir / index[0]["file"])]) == 0
    got = json.loads(capsys.readouterr().out)
    assert len(got["outcomes"]) == 7


def test_replay_truncated_trace_exit_2(tmp_path):
    p = tmp_path / "short.csv"
    p.write_text("t_ms,distance_cm,signal_dbm,crc_ratio,goodput_mbps\n0,15,-50,0,28\n100,15.1,-50,0,28\n")
    assert main(["replay", str(p)]) == 2


def test_replay_malformed_trace_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("t_ms,distance_cm,signal_dbm,crc_ratio,goodput_mbps\n0,15,-50,0,28\n100,15.1,-50,1.2,28\n")
    assert main(["replay", str(p)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_calibrate_default_passes(default_json, capsys):
    assert main(["calibrate", "-c", str(default_json)]) == 0
    assert "targets: ok" in capsys.readouterr().out


def test_calibrate_json(capsys):
    assert main(["calibrate", "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert 100 <= rep["signal_crossing_cm"] <= 115
    assert rep["failures"] == []


def test_calibrate_flat_signal_fails(tmp_path, capsys):
    p = _cfg(tmp_path, lambda d: d["channel"]["lifi"].update(signal_slope=0.0))
    assert main(["calibrate", "-c", str(p)]) == 1
    assert "never reaches" in capsys.readouterr().out


def test_calibrate_low_plateau_fails(tmp_path):
    p = _cfg(tmp_path, lambda d: d["channel"]["lifi"].update(g_plateau=15.0))
    assert main(["calibrate", "-c", str(p)]) == 1


def test_missing_subcommand_exit_2():
    assert main([]) == 2
