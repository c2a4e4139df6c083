"""Command-line entry point: ``volte-lab {gen,guess,analyze,mapid,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .analysis import (AnalysisConfig, analyze_records, event_dict, guess_phy,
                       map_identities)
from .identity_map import AttackerCallLog
from .pdcp_stream import PayloadUnderflow, ReassemblyError
from .phy_sched import PucchObservation
from .profiles import PROFILES, ProfileError, get_profile
from .sip_classify import BUNDLED_DBS, FingerprintError, Scenario, bundled_db, load_db
from .trace_gen import (DEFAULT_SUBSCRIBER, ScenarioMismatch, ScenarioSpec, Side, Subscriber,
                        gen_attach_trace,
                        gen_call_trace, gen_phy_param_corpus, gen_population)
from .traceio import SchemaError, read_trace, write_trace

log = logging.getLogger("volte_lab")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_SCHEMA = 5
EXIT_MISMATCH = 6
EXIT_ANALYSIS = 7


class ConfigError(ValueError):
    pass


class ProfileMismatch(ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- configuration ------------------------------------------------------------------

def _profile(args):
    try:
        return get_profile(args.profile)
    except ProfileError as exc:
        raise ConfigError(str(exc)) from None


def _db(args, profile):
    if getattr(args, "db", None):
        return load_db(Path(args.db))
    device = args.device.lower()
    if not any(dev == device for _, dev in BUNDLED_DBS):
        raise ConfigError(f"unknown device {args.device!r}")
    try:
        return bundled_db(profile.name, device)
    except KeyError:
        raise ProfileMismatch(f"device {args.device} has no fingerprints for {profile.name}") from None


def _analysis_config(args) -> AnalysisConfig:
    try:
        return AnalysisConfig(cn_threshold=args.cn_threshold, ta_tolerance_us=args.ta_tol,
                              snr_min_db=args.snr_min, window_ms=args.window_ms,
                              use_priors=not args.no_priors)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _config_dict(args) -> dict:
    skip = {"func", "out", "text"}  # output locations do not change the content
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# -- gen ------------------------------------------------------------------------------

def cmd_gen(args) -> int:
    profile = _profile(args)
    if not args.out:
        raise ConfigError("gen needs --out")
    out = Path(args.out)
    if args.what == "call":
        if args.device.lower() not in profile.devices:
            raise ProfileMismatch(f"device {args.device} not available on {profile.name}")
        spec = ScenarioSpec(
            Scenario(args.scenario), carrier=profile.name, device=args.device.lower(),
            victim=Subscriber.from_seed(args.seed) if args.random_victim else DEFAULT_SUBSCRIBER,
            caller_side=Side.VICTIM if args.caller == "victim" else Side.REMOTE,
            conversation_length_ms=args.length_ms, seed=args.seed,
            speaking_fraction=tuple(args.speaking), tamper_attach=args.tamper,
        )
        trace = gen_call_trace(spec)
        write_trace(out, trace.records, trace.truth, trace.ground.to_dict())
    elif args.what == "attach":
        sub = Subscriber.from_seed(args.seed)
        trace = gen_attach_trace(sub, args.tamper, args.seed, identity_kind=profile.identity_kind)
        write_trace(out, trace.records, trace.truth, trace.ground.to_dict())
    elif args.what == "population":
        out.mkdir(parents=True, exist_ok=True)
        if args.device.lower() not in profile.devices:
            raise ProfileMismatch(f"device {args.device} not available on {profile.name}")
        pop = gen_population(args.n, args.seed, profile.name, (args.device.lower(),))
        for i, trace in enumerate(pop.traces):
            write_trace(out / f"victim_{i:02d}.jsonl", trace.records, trace.truth,
                        trace.ground.to_dict())
        (out / "attacker.json").write_text(_dump(pop.attacker_log.to_list()), encoding="utf-8")
        (out / "identities.json").write_text(_dump(pop.table), encoding="utf-8")
    else:  # corpus
        out.mkdir(parents=True, exist_ok=True)
        for i, item in enumerate(gen_phy_param_corpus(args.n, profile, args.seed, args.loss)):
            meta = {"sr_config": asdict(item.sr_config), "lcid": item.lcid,
                    "cqi_config": asdict(item.cqi_config) if item.cqi_config else None}
            write_trace(out / f"stream_{i:04d}.jsonl", item.stream,
                        [{"role": o.kind.value.lower()} for o in item.stream], meta)
    return EXIT_OK


# -- analysis commands ------------------------------------------------------------------

def _load(paths):
    traces = []
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(p)
        traces.append((str(p), read_trace(p)))
    return traces


def _attacker_log(path) -> AttackerCallLog:
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    try:
        return AttackerCallLog.from_list(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad attacker log ({exc})") from exc


def build_report(args, sections) -> dict:
    profile = _profile(args)
    cfg = _analysis_config(args)
    traces = _load(args.inputs)
    report = {"provenance": {"tool": "volte-lab", "version": __version__,
                             "config": _config_dict(args),
                             "stages": []}}
    stages = report["provenance"]["stages"]

    if sections == {"phy_params"}:
        report["phy_params"] = []
        for path, records in traces:
            phy = [r for r in records if isinstance(r, PucchObservation)]
            report["phy_params"].append({"trace": path, **guess_phy(phy, profile, cfg).to_dict()})
        stages.append({"stage": "guess", "traces": len(traces)})
        return report

    db = _db(args, profile)
    results = []
    for path, records in traces:
        try:
            results.append((path, analyze_records(records, profile, db, cfg)))
        except (ReassemblyError, PayloadUnderflow) as exc:
            raise ProfileMismatch(f"{path}: {exc} (trace does not fit this profile)") from exc
    stages.append({"stage": "analyze", "traces": len(traces),
                   "fingerprints": f"{db.carrier}/{db.device}"})

    if "phy_params" in sections:
        report["phy_params"] = [{"trace": p, **r.phy.to_dict()} for p, r in results]
    if "signalling_log" in sections:
        report["signalling_log"] = [{"trace": p, "identity": r.identity,
                                     "events": [event_dict(e) for e in r.events]}
                                    for p, r in results]
    if "call_records" in sections:
        report["call_records"] = [{"trace": p, **c.to_dict()} for p, r in results for c in r.calls]
    if "activity" in sections:
        report["activity"] = [{"trace": p, **r.activity.to_dict()} for p, r in results]
    if "bindings" in sections:
        bindings = []
        if args.attacker:
            attacker = _attacker_log(args.attacker)
            bindings = [b.to_dict() for b in map_identities(attacker, [r for _, r in results],
                                                            cfg.window_ms)]
            stages.append({"stage": "mapid", "attacker_calls": len(attacker.entries)})
        report["bindings"] = bindings
        report["imsi"] = [{"trace": p, "imsi": r.imsi, "provenance": r.imsi_provenance}
                          for p, r in results if r.imsi]
    return report


def render_text(report: dict) -> str:
    lines = [f"volte-lab {report['provenance']['version']} report"]
    for entry in report.get("phy_params", []):
        sr, cqi = entry.get("sr_config"), entry.get("cqi_config")
        lines.append(f"[phy] {entry['trace']}")
        if sr:
            lines.append(f"  SR  period {sr['periodicity_ms']} ms, offset {sr['subframe_offset']}, "
                         f"index {sr['sr_config_index']}, pucch {sr['sr_pucch_resource_index']}")
        if cqi:
            lines.append(f"  CQI pmi index {cqi['cqi_pmi_config_index']}, ri index "
                         f"{cqi['ri_config_index']}, pucch {cqi['cqi_pucch_resource_index']}")
        for err in entry.get("errors", []):
            lines.append(f"  error: {err}")
    for entry in report.get("signalling_log", []):
        lines.append(f"[sip] {entry['trace']} ({entry['identity'] or 'unknown identity'})")
        for ev in entry["events"]:
            arrow = "UL" if ev["direction"] == "UL" else "DL"
            lines.append(f"  {ev['time_ms']:>12.3f} {arrow} {ev['payload_size']:>5}  {ev['resolved']}")
    for call in report.get("call_records", []):
        lines.append(f"[call] {call['identity']} t={call['timestamp_ms']} {call['call_direction']} "
                     f"{call['establish_status']} {call['termination_cause']} {call['duration_s']} s")
    for entry in report.get("activity", []):
        for d in ("UL", "DL"):
            ivs = entry.get(d, [])
            speaking = sum(i["end_ms"] - i["start_ms"] for i in ivs if i["state"] == "Speaking")
            total = sum(i["end_ms"] - i["start_ms"] for i in ivs)
            if total:
                lines.append(f"[voice] {entry['trace']} {d}: {len(ivs)} intervals, "
                             f"speaking {100.0 * speaking / total:.1f}%")
    for b in report.get("bindings", []):
        lines.append(f"[bind] {b['identity']} -> {b['phone_number']} ({b['method']}, {b['confidence']})")
    return "\n".join(lines) + "\n"


def _report_cmd(sections):
    def run(args) -> int:
        report = build_report(args, sections)
        _emit(_dump(report), args.out)
        if getattr(args, "text", None):
            Path(args.text).write_text(render_text(report), encoding="utf-8")
        elif args.out and sections == REPORT_SECTIONS:
            Path(args.out).with_suffix(".txt").write_text(render_text(report), encoding="utf-8")
        return EXIT_OK
    return run


REPORT_SECTIONS = {"phy_params", "signalling_log", "call_records", "activity", "bindings"}


# -- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volte-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", default="carrier1", help=f"one of {', '.join(PROFILES)}")
    common.add_argument("--device", default="s7")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (stdout when omitted)")

    thresholds = argparse.ArgumentParser(add_help=False)
    thresholds.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="TRACE")
    thresholds.add_argument("--db", help="fingerprint database JSON instead of the bundled one")
    thresholds.add_argument("--window-ms", type=float, default=5000.0)
    thresholds.add_argument("--cn-threshold", type=int, default=10)
    thresholds.add_argument("--ta-tol", type=float, default=2.0)
    thresholds.add_argument("--snr-min", type=float, default=10.0)
    thresholds.add_argument("--no-priors", action="store_true",
                            help="ignore carrier-fixed SR periodicity and RI index")
    thresholds.add_argument("--attacker", help="attacker call log JSON (mapid/report)")
    thresholds.add_argument("--text", help="also write a text rendering here")

    g = sub.add_parser("gen", parents=[common], help="generate traces with ground truth")
    g.add_argument("--what", choices=("call", "attach", "population", "corpus"), default="call")
    g.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), default=2)
    g.add_argument("--caller", choices=("victim", "remote"), default="victim")
    g.add_argument("--length-ms", type=int, default=30000)
    g.add_argument("--speaking", type=float, nargs=2, default=(0.5, 0.5), metavar=("UL", "DL"))
    g.add_argument("--tamper", action="store_true", help="tamper the victim's attach request")
    g.add_argument("--random-victim", action="store_true", help="derive the victim from --seed")
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--loss", type=float, default=0.0)
    g.set_defaults(func=cmd_gen)

    for name, sections, text in (
            ("guess", {"phy_params"}, "recover SR/CQI configuration from PHY records"),
            ("analyze", {"signalling_log", "call_records", "activity"},
             "signalling log, call records and voice activity"),
            ("mapid", {"call_records", "bindings"}, "bind identities to dialled numbers"),
            ("report", REPORT_SECTIONS, "consolidated report")):
        p = sub.add_parser(name, parents=[common, thresholds], help=text)
        p.set_defaults(func=_report_cmd(sections))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "gen" and not 0.0 <= args.loss < 1.0:
        print("error: --loss must be in [0, 1)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, f"config error: {exc}"
    except FileNotFoundError as exc:
        code, msg = EXIT_MISSING, f"missing file: {exc.filename or exc}"
    except (SchemaError, FingerprintError) as exc:
        code, msg = EXIT_SCHEMA, f"schema violation: {exc}"
    except (ProfileMismatch, ScenarioMismatch) as exc:
        code, msg = EXIT_MISMATCH, f"profile mismatch: {exc}"
    except (ValueError, LookupError) as exc:
        code, msg = EXIT_ANALYSIS, f"analysis error: {exc}"
    print(f"error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
