"""Command-line entry point: oppnet-lab gen-trace | density | simulate | sweep."""
import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import OppnetError, ScenarioValidationError, TraceFormatError
from .results_manager import (
    RESULTS_DIR,
    ensure_results_directory,
    log_directory,
    save_generated_trace,
    save_results,
    social_directory,
)
from .scenario import (
    apply_axis,
    build_synthetic,
    execute_job,
    label_by_density,
    load_scenario,
    load_sweep,
    materialize,
    plan_jobs,
)
from .social import DEFAULT_WINDOW_LENGTH
from .trace_io import aggregate, network_density, read_contact_trace, trace_stats
from .utils import format_report_row

logger = logging.getLogger(__name__)

PROG = "oppnet-lab"
EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _print_json(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_gen_trace(args):
    scenario = load_scenario(args.config)
    if scenario.synthetic is None:
        raise ScenarioValidationError(f"{args.config}: gen-trace needs a synthetic section")
    seed = args.seed if args.seed is not None else scenario.seeds[0]
    built = build_synthetic(scenario.synthetic, seed)
    density = network_density(aggregate(built.trace))
    trace_path, sidecar_path = save_generated_trace(built, args.out, {"seed": seed, "density": density})
    _print_json({
        "trace": str(trace_path),
        "sidecar": str(sidecar_path),
        "nodes": built.trace.node_count,
        "contacts": len(built.trace.events),
        "density": density,
        "mean_movements": built.mean_movements,
    })
    return EXIT_OK


def cmd_density(args):
    if (args.trace is None) == (args.config is None):
        raise ScenarioValidationError("density needs either a trace file or --config")
    if args.config is not None:
        scenario = load_scenario(args.config)
        trace = materialize(scenario, scenario.seeds[0]).trace
    else:
        trace = read_contact_trace(args.trace, format=args.format, node_count=args.nodes)
    stats = trace_stats(trace)
    _print_json(stats.to_dict(include_pairs=args.pairs))
    return EXIT_OK


def _job_context(job):
    return f"{job.protocol.name} {job.param_name}={job.param_value} seed {job.seed}"


def run_jobs(jobs, workers=1):
    """Run every job, in a worker pool when asked; records come back sorted"""
    records = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(job, pool.submit(execute_job, job)) for job in jobs]
            for job, future in futures:
                records.append(_collect(job, future.result))
    else:
        for job in jobs:
            records.append(_collect(job, lambda job=job: execute_job(job)))
    records.sort(key=lambda record: record.key)
    return records


def _collect(job, outcome):
    try:
        return outcome()
    except (ScenarioValidationError, TraceFormatError) as e:
        raise ScenarioValidationError(f"{_job_context(job)}: {e}") from e
    except OppnetError as e:
        raise OppnetError(f"{_job_context(job)}: {e}") from e


def _output_dirs(args):
    out_dir = ensure_results_directory(args.out or RESULTS_DIR)
    log_dir = None
    if args.log is True:
        log_dir = log_directory(out_dir)
    elif args.log is not None:
        log_dir = ensure_results_directory(args.log)
    dump_dir = social_directory(out_dir) if args.dump_social else None
    return out_dir, log_dir, dump_dir


def _finish(records, out_dir, plot_data):
    report, paths = save_results(records, out_dir, plot_data=plot_data)
    for _, row in report.iterrows():
        print(format_report_row(row))
    print(f"report: {paths['report']}")
    return EXIT_OK


def cmd_simulate(args):
    scenario = load_scenario(args.config)
    out_dir, log_dir, dump_dir = _output_dirs(args)
    jobs = plan_jobs(scenario, log_dir, dump_dir, args.dump_social)
    logger.info("Running %d jobs for %s", len(jobs), scenario.name)
    records = run_jobs(jobs, args.jobs)
    return _finish(records, out_dir, args.plot_data)


def cmd_sweep(args):
    sweep, source_dir = load_sweep(args.config)
    out_dir, log_dir, dump_dir = _output_dirs(args)
    jobs = []
    for value in sweep.values:
        variant = apply_axis(sweep.base, sweep.axis, value, source_dir)
        jobs.extend(plan_jobs(variant, log_dir, dump_dir, args.dump_social))
    logger.info("Sweep over %s: %d values, %d jobs", sweep.axis, len(sweep.values), len(jobs))
    records = run_jobs(jobs, args.jobs)
    if sweep.axis == "density":
        records = label_by_density(records)
    return _finish(records, out_dir, args.plot_data)


def _add_run_options(parser):
    parser.add_argument("--config", required=True, type=Path, help="scenario or sweep JSON file")
    parser.add_argument("--out", type=Path, default=None, help=f"output directory (default {RESULTS_DIR})")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--log", type=Path, nargs="?", const=True, default=None, metavar="DIR",
                        help="write one JSON-lines event log per run (default DIR is <out>/events)")
    parser.add_argument("--plot-data", action="store_true", help="write per-metric tables for plotting")
    parser.add_argument("--dump-social", type=float, nargs="?", const=DEFAULT_WINDOW_LENGTH, default=None,
                        metavar="SECONDS", help="snapshot social state every SECONDS of simulated time")


def build_parser():
    parser = argparse.ArgumentParser(prog=PROG, description="Opportunistic network forwarding lab")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-trace", help="generate a synthetic contact trace")
    gen.add_argument("--config", required=True, type=Path, help="scenario JSON with a synthetic section")
    gen.add_argument("--out", required=True, type=Path, help="trace CSV to write")
    gen.add_argument("--seed", type=int, default=None, help="override the scenario's first seed")
    gen.set_defaults(handler=cmd_gen_trace)

    density = commands.add_parser("density", help="network density and contact statistics of a trace")
    density.add_argument("trace", type=Path, nargs="?", default=None)
    density.add_argument("--config", type=Path, default=None, help="scenario JSON whose trace to measure")
    density.add_argument("--format", choices=["canonical", "crawdad"], default="canonical")
    density.add_argument("--nodes", type=int, default=None, help="declared node count")
    density.add_argument("--pairs", action="store_true", help="include per-pair statistics")
    density.set_defaults(handler=cmd_density)

    simulate = commands.add_parser("simulate", help="run every protocol and seed of a scenario")
    _add_run_options(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    sweep = commands.add_parser("sweep", help="run a parameter sweep")
    _add_run_options(sweep)
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.handler(args)
    except (ScenarioValidationError, TraceFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OppnetError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
