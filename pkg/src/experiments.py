#!/usr/bin/env python3
"""
Parameter sweeps: inventory level, planning horizon, mobile ratio and demand shift.

Every (axis value, seed) cell builds one scenario (demand, fleet, initial mobile
placement), runs each forecasting policy plus the hindsight optimum on it, and
reports lost demand. All policies in a cell share the same demand and starting
placement, so the hindsight optimum is a lower bound for each of them.

Outputs (per axis):
  sweep_<axis>.csv        one row per (axis value, policy, seed)
  sweep_<axis>_plot.json  mean/std/95% t-CI per (axis value, policy) + forecast errors
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from allocation import Fleet, FleetConfig, allocate_mobile_initial, size_fleet
from config import SWEEP_AXES, RunConfig
from errors import ConfigError
from forecast import error_sums, errors_from_sums, predict
from scheduler import PolicyConfig
from simulate import compute_metrics, hindsight_optimum, run_simulation
from topology import Topology, load_topology
from traffic import (EDGE, STATION, ShiftSpec, TrafficSeries, apply_shift, edge_to_station_demand,
                     generate_synthetic, generate_synthetic_edges, read_traffic_csv, round_half_up,
                     select_shift_stations)

logger = logging.getLogger(__name__)

HINDSIGHT = "hindsight"
RESULT_COLUMNS = ["axis_value", "policy", "seed", "total_demand", "total_lost", "lost_ratio",
                  "relative_to_oracle"]
MAX_SWEEP_HORIZON = 6


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: Tuple[float, ...]
    seeds: Tuple[int, ...]

    def validate(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {SWEEP_AXES}")
        if not self.values:
            raise ConfigError(f"sweep over {self.axis} has no values")
        if not self.seeds:
            raise ConfigError("sweep needs at least one seed")
        for v in self.values:
            if self.axis == "inventory" and not 0.0 < v <= 1.5:
                raise ConfigError(f"inventory level must be in (0, 1.5], got {v}")
            if self.axis == "mobile_ratio" and not 0.0 <= v <= 1.0:
                raise ConfigError(f"mobile ratio must be in [0, 1], got {v}")
            if self.axis == "horizon" and (v != int(v) or not 1 <= v <= MAX_SWEEP_HORIZON):
                raise ConfigError(f"horizon must be an integer in 1..{MAX_SWEEP_HORIZON}, got {v}")
            if self.axis == "shift" and (v != int(v) or not 0 <= v <= 23):
                raise ConfigError(f"shift must be an integer number of hours in 0..23, got {v}")


@dataclass(frozen=True)
class Scenario:
    demand: TrafficSeries     # station demand, warm-up included
    fleet: Fleet
    Q_init: Tuple[int, ...]
    shifted: frozenset


@dataclass(frozen=True)
class CellResult:
    axis_value: float
    seed: int
    rows: Tuple[dict, ...]
    errors: Tuple[Tuple[str, pd.DataFrame], ...]


def load_traffic(cfg: RunConfig, topo: Topology, seed: int) -> TrafficSeries:
    """Raw traffic for one seed, station demand or edge traffic: synthetic (seeded) or read from CSV."""
    t = cfg.traffic
    if t.source == "csv":
        return read_traffic_csv(t.csv_path, kind=EDGE if t.kind == "edge" else STATION)
    if t.kind == "edge":
        return generate_synthetic_edges(topo, t.days, t.seed + seed, t.seasonality)
    return generate_synthetic(topo, t.days, t.seed + seed, t.seasonality)


def scenario_shift(cfg: RunConfig, topo: Topology, seed: int, shift_hours: int) -> Optional[ShiftSpec]:
    """The stations shifted for this seed; the same set for every shift size."""
    if not shift_hours:
        return None
    shifted = select_shift_stations(topo, cfg.traffic.shift_fraction, cfg.traffic.seed + seed)
    return ShiftSpec(shifted, int(shift_hours))


def load_demand(cfg: RunConfig, topo: Topology, seed: int, shift: Optional[ShiftSpec] = None) -> TrafficSeries:
    """
    Station demand for one seed.

    A shift applies to the raw traffic: for edge traffic every link touching a
    shifted station moves, so neighbouring stations change too.
    """
    traffic = load_traffic(cfg, topo, seed)
    if shift is not None:
        traffic = apply_shift(traffic, shift, topo)
    if traffic.kind == EDGE:
        traffic = edge_to_station_demand(traffic, topo, cfg.traffic.swap_rate)
    if traffic.m != topo.station_count:
        raise ConfigError(f"traffic has {traffic.m} stations, topology has {topo.station_count}")
    if cfg.start_hour + cfg.hours > traffic.horizon:
        raise ConfigError(f"traffic covers {traffic.horizon} hours, simulation needs "
                          f"{cfg.start_hour + cfg.hours}")
    return traffic


def build_scenario(cfg: RunConfig, topo: Topology, seed: int, fleet_cfg: Optional[FleetConfig] = None,
                   shift_hours: Optional[int] = None) -> Scenario:
    """
    Demand (with an optional shift on a random subset of stations), fleet sized on
    the simulated period's average demand, and the initial mobile placement.
    """
    fleet_cfg = fleet_cfg or cfg.fleet
    shift_hours = cfg.traffic.shift_hours if shift_hours is None else int(shift_hours)
    shift = scenario_shift(cfg, topo, seed, shift_hours)
    demand = load_demand(cfg, topo, seed, shift)
    shifted = shift.shifted_stations if shift else frozenset()

    start, stop = cfg.start_hour, cfg.start_hour + cfg.hours
    avg = demand.values[start:stop].mean(axis=0)
    fleet = size_fleet(fleet_cfg, avg)

    T = min(cfg.allocation_T, cfg.hours)
    spec = replace(cfg.allocation_forecaster, seed=seed)
    history = demand.window(0, start) if start > 0 else None
    window = predict(spec, history, demand.window(start, start + T), T)
    Q_init = allocate_mobile_initial(topo, T, fleet.F, window.values, fleet.mobile)
    return Scenario(demand=demand, fleet=fleet, Q_init=Q_init, shifted=shifted)


def plan_sweep(spec: SweepSpec) -> List[Tuple[float, int]]:
    """Cells in output order: axis value major, seed minor."""
    spec.validate()
    return [(value, seed) for value in spec.values for seed in spec.seeds]


def _cell_settings(cfg: RunConfig, axis: str, value: float) -> Tuple[FleetConfig, int, int]:
    fleet_cfg, h, shift = cfg.fleet, cfg.policy.h, cfg.traffic.shift_hours
    if axis == "inventory":
        fleet_cfg = replace(fleet_cfg, inventory_level=float(value))
    elif axis == "mobile_ratio":
        fleet_cfg = replace(fleet_cfg, mobile_ratio=float(value))
    elif axis == "horizon":
        h = int(value)
    elif axis == "shift":
        shift = int(value)
    return fleet_cfg, h, shift


def run_cell(cfg: RunConfig, topo: Topology, axis: str, value: float, seed: int) -> CellResult:
    fleet_cfg, h, shift = _cell_settings(cfg, axis, value)
    scenario = build_scenario(cfg, topo, seed, fleet_cfg=fleet_cfg, shift_hours=shift)
    F, Q_init, demand = scenario.fleet.F, scenario.Q_init, scenario.demand

    baseline = hindsight_optimum(topo, demand, F, Q_init, cfg.hours, cfg.start_hour)
    actual = demand.values[cfg.start_hour:cfg.start_hour + cfg.hours]
    total_demand = int(round_half_up(actual).sum())
    rows = [{
        "axis_value": value, "policy": HINDSIGHT, "seed": seed, "total_demand": total_demand,
        "total_lost": baseline, "lost_ratio": baseline / total_demand if total_demand else 0.0,
        "relative_to_oracle": 1.0,
    }]
    errors = []
    for name, forecaster in cfg.policies:
        policy = PolicyConfig(h=h, forecaster=replace(forecaster, seed=seed))
        trace = run_simulation(topo, demand, F, Q_init, policy, cfg.hours, cfg.start_hour)
        m = compute_metrics(trace, baseline)
        rows.append({
            "axis_value": value, "policy": name, "seed": seed, "total_demand": m["total_demand"],
            "total_lost": m["total_lost"], "lost_ratio": m["lost_ratio"],
            "relative_to_oracle": m["relative_to_oracle"],
        })
        errors.append((name, error_sums(trace.windows, demand)))
    logger.debug("%s=%s seed=%d: hindsight lost %d of %d", axis, value, seed, baseline, total_demand)
    return CellResult(axis_value=value, seed=seed, rows=tuple(rows), errors=tuple(errors))


def _run_cell_job(job) -> CellResult:
    return run_cell(*job)


def run_sweep(spec: SweepSpec, cfg: RunConfig, workers: Optional[int] = None,
              progress: bool = True) -> Tuple[pd.DataFrame, Dict[str, pd.DataFrame]]:
    """
    Run every cell; returns the results frame and per-policy forecast errors.

    Output is identical for any worker count: cells are collected in plan order.
    """
    topo = load_topology(cfg.topology_path)
    cells = plan_sweep(spec)
    jobs = [(cfg, topo, spec.axis, value, seed) for value, seed in cells]
    workers = workers or cfg.workers
    logger.info("Sweep over %s: %d values x %d seeds, %d workers",
                spec.axis, len(spec.values), len(spec.seeds), workers)

    bar = tqdm(total=len(jobs), desc=f"Sweep {spec.axis}", disable=not progress)
    results: List[CellResult] = []
    if workers == 1:
        for job in jobs:
            results.append(_run_cell_job(job))
            bar.update(1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(_run_cell_job, jobs):
                results.append(result)
                bar.update(1)
    bar.close()

    frame = pd.DataFrame([row for r in results for row in r.rows], columns=RESULT_COLUMNS)
    by_policy: Dict[str, List[pd.DataFrame]] = {}
    for r in results:
        for name, err in r.errors:
            by_policy.setdefault(name, []).append(err)
    return frame, {name: combine_forecast_errors(frames) for name, frames in by_policy.items()}


def combine_forecast_errors(frames: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """Pool per-step error sums (from error_sums) of many runs into one error table."""
    frames = [f for f in frames if not f.empty]
    if not frames:
        return errors_from_sums(pd.DataFrame())
    return errors_from_sums(pd.concat(frames, ignore_index=True))


def t_interval(x: pd.Series) -> dict:
    """Mean, std, n and 95% t confidence interval of the mean."""
    r = pd.to_numeric(x, errors="coerce").dropna().astype(float)
    n = len(r)
    mu = r.mean() if n else np.nan
    sd = r.std(ddof=1) if n > 1 else np.nan
    if n < 2 or sd == 0:
        return dict(n=n, mean=mu, std=sd if n > 1 else np.nan, ci_lo=mu, ci_hi=mu)
    se = sd / np.sqrt(n)
    q = stats.t.ppf(0.975, df=n - 1)
    return dict(n=n, mean=mu, std=sd, ci_lo=mu - q * se, ci_hi=mu + q * se)


def summarize_results(results: pd.DataFrame) -> pd.DataFrame:
    """One row per (axis value, policy), policies in first-seen order."""
    policies = list(dict.fromkeys(results["policy"]))
    values = list(dict.fromkeys(results["axis_value"]))
    out = []
    for value in values:
        for policy in policies:
            g = results[(results["axis_value"] == value) & (results["policy"] == policy)]
            if g.empty:
                continue
            lr = t_interval(g["lost_ratio"])
            rel = g["relative_to_oracle"].astype(float)
            finite = rel[np.isfinite(rel)]
            out.append({
                "axis_value": value, "policy": policy, "n": lr["n"],
                "mean_lost_ratio": lr["mean"], "std_lost_ratio": lr["std"],
                "ci_lo": lr["ci_lo"], "ci_hi": lr["ci_hi"],
                "mean_relative": finite.mean() if len(finite) else np.nan,
                "std_relative": finite.std(ddof=1) if len(finite) > 1 else np.nan,
                "n_infinite": int((~np.isfinite(rel)).sum()),
            })
    return pd.DataFrame(out)


def _clean(x):
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(float(x)) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def plot_data(axis: str, summary: pd.DataFrame, errors: Dict[str, pd.DataFrame]) -> dict:
    values = list(dict.fromkeys(summary["axis_value"]))
    data = {"axis": axis, "values": [_clean(v) for v in values], "policies": {}, "forecast_errors": {}}
    for policy in dict.fromkeys(summary["policy"]):
        g = summary[summary["policy"] == policy].set_index("axis_value").reindex(values)
        data["policies"][policy] = {
            col: [_clean(v) for v in g[col]]
            for col in ("mean_lost_ratio", "std_lost_ratio", "ci_lo", "ci_hi", "mean_relative", "std_relative")
        }
    for policy, df in errors.items():
        data["forecast_errors"][policy] = [
            {k: _clean(v) for k, v in row.items()} for row in df.to_dict(orient="records")
        ]
    return data


def write_sweep_outputs(axis: str, results: pd.DataFrame, errors: Dict[str, pd.DataFrame],
                        out_dir) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"sweep_{axis}.csv"
    json_path = out_dir / f"sweep_{axis}_plot.json"
    results.to_csv(csv_path, index=False, float_format="%.10g", lineterminator="\n")
    payload = plot_data(axis, summarize_results(results), errors)
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    logger.info("Wrote %s and %s", csv_path, json_path)
    return csv_path, json_path


def sweep_from_config(cfg: RunConfig, axis: str, values: Optional[Sequence[float]] = None,
                      seeds: Optional[Sequence[int]] = None) -> SweepSpec:
    values = tuple(values) if values is not None else cfg.sweep_values(axis)
    spec = SweepSpec(axis=axis, values=tuple(values), seeds=tuple(seeds) if seeds else cfg.seeds)
    spec.validate()
    return spec

