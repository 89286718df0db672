"""Command-line front door: schedule, simulate, sweep, stats, serve.

Machine-readable output goes to stdout in the declared format (JSON by
default, CSV where row data is natural); diagnostics go to stderr. Exit
codes are stable: 0 success, 2 validation error, 3 infeasible instance,
4 runtime or environment failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import socket
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .curves import PowerModel, ThroughputProfile, curve_from_profile, validated_curve
from .errors import CarbonSchedError, InfeasibleError
from .policies import Policy, plan
from .presets import PRESETS, preset_curve, preset_power
from .schedule import JobSpec, planned_carbon, schedule_to_dict
from .sim import SWEEP_AXES, SimConfig, simulate, sweep_parameter, sweep_start_times
from .trace import parse_trace, region_stats

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME = 4

ENV_TRACES = "CARBONSCHED_TRACES"
ENV_ADDR = "CARBONSCHED_ADDR"


def _load_trace(path: str):
    with open(path) as handle:
        return parse_trace(handle, region=Path(path).stem)


def _load_job(args):
    """A job file bundles the job fields with its capacity curve.

    Curve sources, exactly one of: ``mc`` (validated marginals),
    ``throughput`` (converted), ``preset`` (named shape), or
    ``curve_file`` (separate curve document, fields merged in).
    Command-line flags override file fields.
    """
    with open(args.job) as handle:
        doc = json.load(handle)
    if "curve_file" in doc:
        curve_path = Path(args.job).parent / doc.pop("curve_file")
        with open(curve_path) as handle:
            curve_doc = json.load(handle)
        for key in ("m", "M", "mc", "throughput", "power_watts"):
            if key in curve_doc and key not in doc:
                doc[key] = curve_doc[key]

    arrival = args.start if args.start is not None else int(doc.get("arrival_slot", 0))
    length = args.length if args.length is not None else float(doc["length_slots"])
    span = args.completion if args.completion is not None else int(doc["completion_slots"])
    m = int(doc.get("m", 1))
    M = int(doc["M"])
    power_watts = doc.get("power_watts")
    power = PowerModel(power_watts) if power_watts else None

    sources = [key for key in ("mc", "throughput", "preset") if doc.get(key) is not None]
    if len(sources) != 1:
        raise CarbonSchedError(
            f"job file needs exactly one of mc, throughput, preset; found {sources}"
        )
    if "mc" in sources:
        curve = validated_curve(m, M, doc["mc"], name=doc.get("name", ""))
    elif "throughput" in sources:
        samples = {int(j): float(v) for j, v in doc["throughput"].items()}
        curve = curve_from_profile(
            ThroughputProfile(samples=samples, m=m, M=M), name=doc.get("name", "")
        )
    else:
        name = doc["preset"]
        if name not in PRESETS:
            raise CarbonSchedError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        curve = preset_curve(name, m, M)
        power = power or preset_power(name)

    job = JobSpec(
        name=doc.get("name", Path(args.job).stem),
        arrival_slot=arrival,
        base_length_slots=length,
        min_servers=m,
        max_servers=M,
        completion_slot=arrival + span,
        power=power,
    )
    return job, curve


def _parse_policy(args) -> Policy:
    policy = Policy.parse(args.policy)
    if policy.kind == "static" and args.k is not None:
        policy = replace(policy, scale=args.k)
    if policy.kind == "sr_threshold" and args.percentile is not None:
        policy = replace(policy, percentile=args.percentile)
    return policy


def _accounting(mode: str) -> str:
    return "whole_slot" if mode == "whole" else mode


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_schedule(args) -> int:
    trace = _load_trace(args.trace)
    job, curve = _load_job(args)
    policy = _parse_policy(args)
    schedule = plan(policy, job, curve, trace)
    metrics = planned_carbon(schedule, trace, power=job.power, mode=_accounting(args.mode))
    doc = schedule_to_dict(schedule, metrics)
    _emit(json.dumps(doc, indent=2), args.out)
    if args.plot:
        from .plots import schedule_overlay_figure

        window = range(job.arrival_slot, max(job.completion_slot, schedule.window_end))
        schedule_overlay_figure(
            [trace[s] for s in window],
            job.arrival_slot,
            {schedule.policy: list(schedule.allocations)},
            args.plot,
        )
        print(f"wrote {args.plot}", file=sys.stderr)
    return EXIT_OK


def _sim_config(args, seed: int) -> SimConfig:
    threshold = None if args.recompute_threshold in ("none", None) else float(args.recompute_threshold)
    if args.recompute_threshold is None:
        threshold = 0.05
    return SimConfig(
        forecast_error_pct=args.forecast_error,
        profile_error_pct=args.profile_error,
        denial_probability=args.denial,
        recompute_threshold=threshold,
        accounting_mode=_accounting(args.mode),
        scaling_overhead_s=args.overhead,
        rng_seed=seed,
    )


def _result_dict(result) -> dict:
    return {
        "policy": result.policy,
        "carbon_g": result.carbon_g,
        "compute_slot_hours": result.compute_slot_hours,
        "completion_slot": result.completion_slot,
        "met_deadline": result.met_deadline,
        "work_done": result.work_done,
        "recomputes": result.recomputes,
        "timeline": [
            {
                "slot": r.slot,
                "requested_servers": r.requested_servers,
                "granted_servers": r.granted_servers,
                "intensity_actual": r.intensity_actual,
                "intensity_forecast": r.intensity_forecast,
                "work_done": r.work_done,
                "recomputed": r.recomputed,
            }
            for r in result.timeline
        ],
    }


def cmd_simulate(args) -> int:
    trace = _load_trace(args.trace)
    job, curve = _load_job(args)
    policy = _parse_policy(args)
    results = [
        simulate(job, curve, trace, policy, _sim_config(args, args.seed + i))
        for i in range(args.runs)
    ]
    if args.runs == 1:
        _emit(json.dumps(_result_dict(results[0]), indent=2), args.out)
    elif args.format == "csv":
        lines = ["seed,carbon_g,compute_slot_hours,completion_slot,met_deadline"]
        for i, r in enumerate(results):
            lines.append(
                f"{args.seed + i},{r.carbon_g!r},{r.compute_slot_hours!r},"
                f"{r.completion_slot!r},{str(r.met_deadline).lower()}"
            )
        _emit("\n".join(lines) + "\n", args.out)
    else:
        carbons = [r.carbon_g for r in results]
        doc = {
            "runs": [
                {k: v for k, v in _result_dict(r).items() if k != "timeline"}
                for r in results
            ],
            "summary": {
                "mean_carbon_g": float(np.mean(carbons)),
                "p95_carbon_g": float(np.percentile(carbons, 95)),
                "met_deadline_rate": float(np.mean([r.met_deadline for r in results])),
            },
        }
        _emit(json.dumps(doc, indent=2), args.out)
    if args.plot:
        from .plots import schedule_overlay_figure

        result = results[0]
        granted = {r.slot: r.granted_servers for r in result.timeline}
        last = max(granted, default=job.arrival_slot)
        window = range(job.arrival_slot, max(job.completion_slot, last + 1))
        schedule_overlay_figure(
            [trace[s] for s in window],
            job.arrival_slot,
            {result.policy: [granted.get(s, 0) for s in window]},
            args.plot,
        )
        print(f"wrote {args.plot}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    trace = _load_trace(args.trace)
    stats = region_stats(trace)
    doc = {
        "region": trace.region,
        "slots": len(trace),
        "mean": stats.mean,
        "std_dev": stats.std_dev,
        "coefficient_of_variation": stats.coefficient_of_variation,
    }
    _emit(json.dumps(doc, indent=2), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    trace = _load_trace(args.trace)
    job, curve = _load_job(args)
    policies = [Policy.parse(p) for p in args.policies]
    config = _sim_config(args, args.seed)
    if args.axis == "start_time":
        table = sweep_start_times(
            job, curve, trace, policies, config, stride=args.stride, runs=args.runs
        )
    else:
        if not args.values:
            raise CarbonSchedError(f"--values is required for axis {args.axis}")
        table = sweep_parameter(
            job, curve, trace, args.axis, args.values, policies, config, runs=args.runs
        )
    summary = table.summary()
    if args.format == "csv":
        _emit(table.to_csv(), args.out)
    else:
        _emit(json.dumps(summary, indent=2), args.out)
    if args.report_dir:
        from .plots import sweep_figure

        report = Path(args.report_dir)
        report.mkdir(parents=True, exist_ok=True)
        (report / "sweep.csv").write_text(table.to_csv())
        (report / "summary.json").write_text(json.dumps(summary, indent=2))
        sweep_figure(summary, report / "sweep_carbon.png")
        print(f"wrote {report}/sweep.csv, summary.json, sweep_carbon.png", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_trace_dir

    trace_dir = args.traces or os.environ.get(ENV_TRACES)
    if not trace_dir:
        print(f"error: --traces or {ENV_TRACES} is required", file=sys.stderr)
        return EXIT_VALIDATION
    if not Path(trace_dir).is_dir():
        print(f"error: trace directory {trace_dir!r} does not exist", file=sys.stderr)
        return EXIT_VALIDATION
    addr = args.addr or os.environ.get(ENV_ADDR, "127.0.0.1:8080")
    host, _, port_text = addr.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        print(f"error: bad address {addr!r}, expected HOST:PORT", file=sys.stderr)
        return EXIT_VALIDATION
    host = host or "127.0.0.1"

    traces = load_trace_dir(trace_dir)
    app = create_app(traces, cell_budget=args.budget)
    if args.ui:
        if not Path(args.ui).is_dir():
            print(f"error: ui directory {args.ui!r} does not exist", file=sys.stderr)
            return EXIT_VALIDATION
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.ui, html=True), name="ui")

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as err:
        print(f"error: cannot bind {host}:{port}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        probe.close()

    print(f"serving {len(traces)} region(s) on {host}:{port}", file=sys.stderr)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def _add_job_flags(parser):
    parser.add_argument("--trace", required=True, help="trace CSV file")
    parser.add_argument("--job", required=True, help="job JSON file (see README)")
    parser.add_argument("--start", type=int, default=None, help="override arrival slot")
    parser.add_argument("--length", type=float, default=None, help="override job length (slots)")
    parser.add_argument("--completion", type=int, default=None,
                        help="override completion time (slots from arrival)")
    parser.add_argument("--mode", choices=("whole", "prorated"), default="prorated",
                        help="carbon accounting mode")
    parser.add_argument("--out", default=None, help="write output to a file instead of stdout")


def _add_policy_flags(parser):
    parser.add_argument("--policy", required=True,
                        help="greedy | agnostic | sr_deadline | sr_threshold[:P] | static[:K]")
    parser.add_argument("--k", type=int, default=None, help="scale factor for static policy")
    parser.add_argument("--percentile", type=float, default=None,
                        help="percentile for sr_threshold policy")


def _add_sim_flags(parser):
    parser.add_argument("--forecast-error", type=float, default=0.0, metavar="X",
                        help="forecast error, +-X%%")
    parser.add_argument("--profile-error", type=float, default=0.0, metavar="X",
                        help="capacity-curve error, +-X%%")
    parser.add_argument("--denial", type=float, default=0.0, metavar="P",
                        help="per-server scale-up denial probability")
    parser.add_argument("--recompute-threshold", default=None,
                        help="relative deviation triggering replan (default 0.05, 'none' disables)")
    parser.add_argument("--overhead", type=float, default=0.0, metavar="SECONDS",
                        help="dead time per allocation change")
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carbonsched",
        description="Carbon-aware scaling schedules for elastic batch jobs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="compute a schedule for one policy")
    _add_job_flags(p)
    _add_policy_flags(p)
    p.add_argument("--plot", default=None, help="render the schedule overlay PNG here")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="simulate execution against ground truth")
    _add_job_flags(p)
    _add_policy_flags(p)
    _add_sim_flags(p)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--plot", default=None, help="render the realized overlay PNG here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="summary statistics of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sweep", help="sensitivity sweeps over one axis")
    _add_job_flags(p)
    _add_sim_flags(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES + ("start_time",))
    p.add_argument("--values", type=float, nargs="*", default=None)
    p.add_argument("--policies", nargs="+", default=["greedy", "sr_deadline"])
    p.add_argument("--stride", type=int, default=1, help="start_time axis stride")
    p.add_argument("--runs", type=int, default=1, help="seeds per cell")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--report-dir", default=None,
                   help="also write sweep.csv, summary.json and figures here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the what-if advisor service")
    p.add_argument("--traces", default=None, help=f"trace directory (or {ENV_TRACES})")
    p.add_argument("--addr", default=None, help=f"HOST:PORT (or {ENV_ADDR})")
    p.add_argument("--budget", type=int, default=20000, help="sweep cell budget")
    p.add_argument("--ui", default=None, help="serve a built web UI from this directory")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CarbonSchedError, ValueError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
