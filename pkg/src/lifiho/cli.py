"""``lifiho`` command line: simulate, replay, calibrate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from lifiho.channel import (
    ConfigError,
    TraceError,
    lifi_mean_goodput,
    load_trace,
    mean_signal_crossing,
)
from lifiho.config import RootConfig, default_config_dict, load_config
from lifiho.sim import parse_policy, replay, replica_outcome, run_grid, write_timeline_csv
from lifiho.svg import ellipses_svg

log = logging.getLogger("lifiho")

EXIT_OK = 0
EXIT_TARGET = 1
EXIT_INPUT = 2

CALIBRATION_POINTS = (10.0, 90.0, 120.0, 135.0)
PLATEAU_BAND = (28.0, 30.0)
CROSSING_BAND = (100.0, 115.0)
CROSSING_LEVEL = -62.0


class InputError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _policy_list(text: str) -> list[str]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    for item in items:
        try:
            parse_policy(item)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return items


def _load(path: str | None, validate: bool = True) -> RootConfig:
    cfg = load_config(path, validate) if path else RootConfig()
    for w in cfg.warnings:
        log.warning("%s", w)
    return cfg


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _slug(policy: str) -> str:
    return policy.replace(":", "_").replace("-", "m")


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    plan = cfg.plan
    if args.seed is not None:
        plan.seed = args.seed
    if args.speeds:
        plan.speeds = args.speeds
    if args.policies:
        plan.policies = args.policies
    if args.replicas is not None:
        plan.replicas = args.replicas
    try:
        plan.validate()
    except ValueError as exc:
        raise ConfigError(f"plan: {exc}") from None
    emit_tl = args.emit_timelines or cfg.output.emit_timelines
    emit_svg = args.emit_svg or cfg.output.emit_svg
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)

    summary = run_grid(cfg.setup(), workers=args.workers, keep_timelines=emit_tl)
    timelines = summary.pop("_timelines", {})
    (out / "summary.json").write_text(_dump(summary))
    if emit_tl:
        tdir = out / "timelines"
        tdir.mkdir(exist_ok=True)
        index = []
        for (speed, policy, idx), tl in sorted(timelines.items()):
            label = parse_policy(policy).label
            name = f"v{speed:g}_{_slug(label)}_r{idx:02d}.csv"
            write_timeline_csv(tdir / name, tl)
            index.append({"file": name, "speed": speed, "policy": label, "replica": idx, "seed": tl.seed})
        (tdir / "index.json").write_text(_dump(index))
    if emit_svg:
        (out / "ellipses.svg").write_text(ellipses_svg(summary))
    log.info("wrote %d cells to %s", len(summary["cells"]), out / "summary.json")
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = _load(args.config)
    try:
        records = load_trace(args.trace)
    except TraceError as exc:
        raise InputError(str(exc)) from None
    except OSError as exc:
        raise InputError(f"{args.trace}: {exc.strerror}") from None
    setup = cfg.setup()
    policies = args.policy or cfg.plan.policies
    results = {}
    for p in policies:
        try:
            tl = replay(records, p, setup, seed=args.seed)
        except ValueError as exc:
            raise InputError(f"{args.trace}: {exc}") from None
        results[parse_policy(p).label] = replica_outcome(tl, setup)
    if args.policy and len(args.policy) == 1:
        payload = dict(policy=parse_policy(args.policy[0]).label, **results[parse_policy(args.policy[0]).label])
    else:
        payload = {"trace": str(args.trace), "outcomes": results}
    sys.stdout.write(_dump(payload))
    return EXIT_OK


def calibration_report(cfg: RootConfig) -> tuple[dict, list[str]]:
    """Noise-free sweep of the channel curves plus the list of failed targets."""
    lifi = cfg.lifi
    failures: list[str] = []
    try:
        lifi.validate()
    except ConfigError as exc:
        failures.append(f"invalid channel: {exc}")
    speeds = sorted(cfg.plan.speeds)
    goodput = {f"{s:g}": {f"{d:g}": lifi_mean_goodput(d, s, lifi) for d in CALIBRATION_POINTS} for s in speeds}
    slope = {f"{s:g}": (lifi_mean_goodput(lifi.r_stable, s, lifi) - lifi_mean_goodput(lifi.r_knee, s, lifi))
             / (lifi.r_knee - lifi.r_stable) for s in speeds}
    crossing = mean_signal_crossing(lifi, CROSSING_LEVEL)

    lo, hi = PLATEAU_BAND
    for s in speeds:
        g10 = goodput[f"{s:g}"]["10"]
        if not lo <= g10 <= hi:
            failures.append(f"goodput at 10 cm, {s:g} m/s: {g10:.3f} outside [{lo:g}, {hi:g}]")
        beyond = lifi_mean_goodput(lifi.r_loss + 0.1, s, lifi)
        if beyond != 0.0:
            failures.append(f"goodput beyond {lifi.r_loss:g} cm, {s:g} m/s: {beyond:.3f} != 0")
    if len(speeds) >= 2:
        slow, fast = slope[f"{speeds[0]:g}"], slope[f"{speeds[-1]:g}"]
        if not fast > slow:
            failures.append(f"middle-region decay at {speeds[-1]:g} m/s ({fast:.4f}) not steeper than at {speeds[0]:g} m/s ({slow:.4f})")
    lo, hi = CROSSING_BAND
    if crossing is None:
        failures.append(f"mean signal never reaches {CROSSING_LEVEL:g} dBm")
    elif not lo <= crossing <= hi:
        failures.append(f"{CROSSING_LEVEL:g} dBm crossing at {crossing:g} cm outside [{lo:g}, {hi:g}]")
    report = {
        "goodput_mbps": goodput,
        "middle_decay_mbps_per_cm": slope,
        "signal_crossing_cm": crossing,
        "failures": failures,
    }
    return report, failures


def cmd_calibrate(args) -> int:
    cfg = _load(args.config, validate=False)
    report, failures = calibration_report(cfg)
    if args.json:
        sys.stdout.write(_dump(report))
    else:
        cols = "".join(f"{d:>9g}cm" for d in CALIBRATION_POINTS)
        print(f"{'speed':>8}{cols}{'decay':>10}")
        for s, row in report["goodput_mbps"].items():
            vals = "".join(f"{v:11.3f}" for v in row.values())
            print(f"{s:>8}{vals}{report['middle_decay_mbps_per_cm'][s]:10.4f}")
        cr = report["signal_crossing_cm"]
        print(f"{CROSSING_LEVEL:g} dBm crossing: " + ("none" if cr is None else f"{cr:g} cm"))
        for f in failures:
            print(f"FAIL {f}")
        print("targets: " + ("FAIL" if failures else "ok"))
    return EXIT_TARGET if failures else EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(_dump(default_config_dict()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lifiho", description="LiFi/WiFi vertical handover simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run the experiment grid and write summary.json")
    sp.add_argument("-c", "--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--speeds", type=_float_list, help="comma-separated m/s values")
    sp.add_argument("--policies", type=_policy_list, help="comma-separated, e.g. baseline,signal:-62,crc:0.20:-62")
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--out")
    sp.add_argument("--emit-timelines", action="store_true")
    sp.add_argument("--emit-svg", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("replay", help="run the handover policies over a recorded trace")
    rp.add_argument("trace")
    rp.add_argument("-c", "--config")
    rp.add_argument("--policy", action="append", type=lambda s: _policy_list(s)[0])
    rp.add_argument("--seed", type=int, default=0, help="seed for the ARP probe outcomes")
    rp.set_defaults(func=cmd_replay)

    cp = sub.add_parser("calibrate", help="check the noise-free channel against its calibration targets")
    cp.add_argument("-c", "--config")
    cp.add_argument("--json", action="store_true")
    cp.set_defaults(func=cmd_calibrate)

    dp = sub.add_parser("config", help="print the default configuration")
    dp.set_defaults(func=cmd_config)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
