#!/usr/bin/env python3
"""
Battery-swapping station scheduler: data generation, single runs, sweeps, trace inspection.

  python src/cli.py generate       [--config F] [--set section.key=value ...]
  python src/cli.py run            [--config F] [--seed N] [--json] [--dump]
  python src/cli.py sweep --axis A [--values v1,v2,...] [--seeds N] [--workers N]
  python src/cli.py inspect-trace PATH [--station N]

Logs go to stderr; tables and JSON go to stdout.
Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from config import SWEEP_AXES, load_config
from errors import BSSError, ConfigError
from experiments import (build_scenario, load_demand, load_traffic, run_sweep, scenario_shift, sweep_from_config,
                         write_sweep_outputs)
from flowcore import build_time_expanded_network, extract_plan, format_network, format_plan, solve_min_cost_flow
from simulate import (compute_metrics, hindsight_instance, read_trace_csv, run_simulation, summarize_trace,
                      write_trace_csv)
from topology import load_topology, save_topology
from traffic import EDGE, apply_shift, write_traffic_csv

logger = logging.getLogger("bss")

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config" / "default.yaml"
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _load(args):
    overrides = list(args.set)
    if args.hours is not None:
        overrides.append(f"simulation.hours={args.hours}")
    if args.horizon is not None:
        overrides.append(f"policy.h={args.horizon}")
    return load_config(args.config, overrides=overrides,
                       output_dir=Path(args.output_dir) if args.output_dir else None)


def cmd_generate(args) -> int:
    cfg = _load(args)
    topo = load_topology(cfg.topology_path)
    out = cfg.output_dir
    written = [save_topology(topo, out / "topology.txt")]
    seed = cfg.seeds[0]
    shift = scenario_shift(cfg, topo, seed, cfg.traffic.shift_hours)
    traffic = load_traffic(cfg, topo, seed)
    if traffic.kind == EDGE:
        edges = apply_shift(traffic, shift, topo) if shift else traffic
        written.append(write_traffic_csv(edges, out / "edge_traffic.csv"))
    written.append(write_traffic_csv(load_demand(cfg, topo, seed, shift), out / "traffic.csv"))
    for p in written:
        logger.info("Wrote %s", p)
    print("\n".join(str(p) for p in written))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    topo = load_topology(cfg.topology_path)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    scenario = build_scenario(cfg, topo, seed)
    fleet = scenario.fleet

    policy = replace(cfg.policy, forecaster=replace(cfg.policy.forecaster, seed=seed))
    trace = run_simulation(topo, scenario.demand, fleet.F, scenario.Q_init, policy,
                           cfg.hours, cfg.start_hour)
    inst = hindsight_instance(topo, scenario.demand, fleet.F, scenario.Q_init, cfg.hours, cfg.start_hour)
    ten = build_time_expanded_network(inst)
    plan = extract_plan(inst, solve_min_cost_flow(ten.network))
    baseline = plan.objective
    metrics = compute_metrics(trace, baseline)
    metrics.update({
        "seed": seed, "h": policy.h, "forecaster": policy.forecaster.kind,
        "fleet_total": fleet.total, "fleet_mobile": fleet.mobile, "fleet_fixed": fleet.fixed_total,
        "relative_to_oracle": None if metrics["relative_infinite"] else metrics["relative_to_oracle"],
    })

    trace_path = write_trace_csv(trace, cfg.output_dir / "trace.csv")
    metrics_path = cfg.output_dir / "metrics.json"
    metrics_path.write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
    logger.info("Saved trace to: %s", trace_path)
    logger.info("Saved metrics to: %s", metrics_path)
    if args.dump:
        network_path = cfg.output_dir / "hindsight_network.txt"
        plan_path = cfg.output_dir / "hindsight_plan.txt"
        network_path.write_text(format_network(ten.network), encoding="utf-8")
        plan_path.write_text(format_plan(plan, topo.names), encoding="utf-8")
        logger.info("Saved hindsight network and plan to: %s, %s", network_path, plan_path)

    if args.json:
        print(json.dumps(metrics, indent=2))
    else:
        rel = metrics["relative_to_oracle"]
        print(f"hours={metrics['hours']} demand={metrics['total_demand']} served={metrics['total_served']} "
              f"lost={metrics['total_lost']} lost_ratio={metrics['lost_ratio']:.4f} "
              f"hindsight_lost={metrics['hindsight_lost']} "
              f"relative_to_oracle={'inf' if rel is None else f'{rel:.4f}'}")
    return EXIT_OK


def _parse_values(text):
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    if args.workers is not None and args.workers < 1:
        raise ConfigError(f"--workers must be >= 1, got {args.workers}")
    if args.seeds is not None and args.seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {args.seeds}")
    cfg = _load(args)
    seeds = list(range(args.seeds)) if args.seeds else None
    spec = sweep_from_config(cfg, args.axis, values=_parse_values(args.values), seeds=seeds)
    results, errors = run_sweep(spec, cfg, workers=args.workers, progress=not args.no_progress)
    csv_path, json_path = write_sweep_outputs(spec.axis, results, errors, cfg.output_dir)
    print(csv_path)
    print(json_path)
    return EXIT_OK


def cmd_inspect_trace(args) -> int:
    frame = read_trace_csv(args.path)
    table = summarize_trace(frame, station=args.station)
    sys.stdout.write(table.to_csv(index=False, float_format="%.4f", lineterminator="\n"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Mobile battery scheduling for battery-swapping stations")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", default=str(DEFAULT_CONFIG), help="YAML experiment config")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config value (repeatable)")
        p.add_argument("--out", "--output-dir", dest="output_dir", default=None,
                       help="output directory (overrides config and $BSS_OUTPUT_DIR)")
        p.add_argument("--hours", type=int, default=None, help="simulated hours (simulation.hours)")
        p.add_argument("--horizon", type=int, default=None, help="planning horizon h (policy.h)")
        return p

    p = with_config(sub.add_parser("generate", help="write synthetic traffic and the topology echo"))
    p.set_defaults(func=cmd_generate)

    p = with_config(sub.add_parser("run", help="simulate one scenario and write its trace"))
    p.add_argument("--seed", type=int, default=None, help="scenario seed (default: first configured seed)")
    p.add_argument("--json", action="store_true", help="print the metrics record as JSON")
    p.add_argument("--dump", action="store_true",
                   help="also write the hindsight flow network and plan as text")
    p.set_defaults(func=cmd_run)

    p = with_config(sub.add_parser("sweep", help="sweep one parameter over seeds and policies"))
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", default=None, help="comma-separated axis values (default: from config)")
    p.add_argument("--seeds", type=int, default=None, help="number of seeds 0..N-1 (default: from config)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: from config)")
    p.add_argument("--no-progress", action="store_true", help="hide the progress bar")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect-trace", help="per-station totals of a trace CSV")
    p.add_argument("path")
    p.add_argument("--station", type=int, default=None, help="print this station's hourly rows instead")
    p.set_defaults(func=cmd_inspect_trace)
    return parser


def setup_logging(verbose: int = 0, quiet: bool = False):
    level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr, force=True,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except (BSSError, OSError) as e:
        logger.error("%s", e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
