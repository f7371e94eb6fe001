#!/usr/bin/env python3
"""
Hour-by-hour execution of the rolling policy against realised demand.

Each hour: forecast the next h hours from the observed prefix, plan, execute the
first-hour moves. Batteries moving i -> j (j != i) are on the road for the hour
and serve nobody; stayers plus the fixed stock serve the realised demand;
whatever is left over is lost (no backlog).
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import ForecastError, InstanceError
from flowcore import SchedulingInstance, solve_instance
from forecast import ForecastWindow, predict
from scheduler import PolicyConfig, plan_step
from topology import Topology
from traffic import TrafficSeries, round_half_up

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["hour", "station", "positions_before", "positions_after", "moves_out", "moves_in",
                 "stayers", "fixed", "actual", "forecast", "served", "lost"]


@dataclass(frozen=True)
class HourRecord:
    hour: int
    positions_before: np.ndarray
    moves: Dict[Tuple[int, int], int]
    stayers: np.ndarray
    actual: np.ndarray
    window: ForecastWindow    # full prediction the plan was built on
    served: np.ndarray
    lost: np.ndarray
    positions_after: np.ndarray

    @property
    def forecast(self) -> np.ndarray:
        return self.window.values[0]


@dataclass
class SimulationTrace:
    F: Tuple[int, ...]
    records: List[HourRecord] = field(default_factory=list)

    @property
    def total_lost(self) -> int:
        return int(sum(r.lost.sum() for r in self.records))

    @property
    def total_demand(self) -> int:
        return int(sum(r.actual.sum() for r in self.records))

    @property
    def total_served(self) -> int:
        return int(sum(r.served.sum() for r in self.records))

    @property
    def windows(self) -> List[ForecastWindow]:
        return [r.window for r in self.records]

    @property
    def lost_ratio(self) -> float:
        demand = self.total_demand
        return self.total_lost / demand if demand else 0.0


def _check_inputs(topo: Topology, actual: TrafficSeries, F: Sequence[int], Q_init: Sequence[int],
                  hours: int, start_hour: int):
    n = topo.station_count
    if actual.m != n:
        raise InstanceError(f"demand has {actual.m} series, topology has {n} stations")
    if len(F) != n or len(Q_init) != n:
        raise InstanceError(f"F and Q_init need {n} entries, got {len(F)} and {len(Q_init)}")
    if min(list(F) + list(Q_init), default=0) < 0:
        raise InstanceError("F and Q_init must be non-negative")
    if hours < 1 or start_hour < 0:
        raise InstanceError(f"need hours >= 1 and start_hour >= 0, got {hours}, {start_hour}")
    if start_hour + hours > actual.horizon:
        raise InstanceError(f"demand covers {actual.horizon} hours, simulation needs {start_hour + hours}")


def run_simulation(topo: Topology, actual_demand: TrafficSeries, F: Sequence[int],
                   Q_init: Sequence[int], cfg: PolicyConfig, hours: int,
                   start_hour: int = 0) -> SimulationTrace:
    """
    Simulate `hours` hours starting at `start_hour`; earlier hours are history only.

    The planning window is cut at the end of the simulated period, so the last
    hours plan over fewer than cfg.h hours.
    """
    cfg.validate()
    _check_inputs(topo, actual_demand, F, Q_init, hours, start_hour)
    if start_hour < cfg.forecaster.min_history:
        raise ForecastError(f"{cfg.forecaster.kind} needs {cfg.forecaster.min_history} hours of history, "
                            f"simulation starts at hour {start_hour}")
    n = topo.station_count
    fixed = np.asarray(F, dtype=np.int64)
    realised = round_half_up(actual_demand.values)
    stop = start_hour + hours
    positions = np.asarray(Q_init, dtype=np.int64)
    mobile_total = int(positions.sum())
    trace = SimulationTrace(F=tuple(int(f) for f in F))

    for hour in range(start_hour, stop):
        window = min(cfg.h, stop - hour)
        if window == cfg.h - 1:
            logger.debug("Planning window truncated to %d hours from hour %d on", window, hour)
        history = actual_demand.window(0, hour) if hour > 0 else None
        future = actual_demand.window(hour, hour + window)
        forecast = predict(cfg.forecaster, history, future, window)

        step = plan_step(positions, F, forecast, topo, cfg)
        stayers = step.stayers(n)
        served = np.minimum(realised[hour], fixed + stayers)
        lost = realised[hour] - served
        after = step.arrivals(n)
        if int(after.sum()) != mobile_total:
            raise InstanceError(f"hour {hour}: mobile battery count changed "
                                f"from {mobile_total} to {int(after.sum())}")

        trace.records.append(HourRecord(
            hour=hour, positions_before=positions, moves=step.moves, stayers=stayers,
            actual=realised[hour].copy(), window=forecast,
            served=served, lost=lost, positions_after=after,
        ))
        positions = after

    logger.debug("Simulated hours %d..%d: lost %d of %d", start_hour, stop - 1,
                 trace.total_lost, trace.total_demand)
    return trace


def hindsight_instance(topo: Topology, actual_demand: TrafficSeries, F: Sequence[int],
                       Q_init: Sequence[int], hours: int, start_hour: int = 0) -> SchedulingInstance:
    """The whole simulated period as one scheduling instance on realised demand."""
    _check_inputs(topo, actual_demand, F, Q_init, hours, start_hour)
    D = round_half_up(actual_demand.values[start_hour:start_hour + hours])
    return SchedulingInstance(topo=topo, T=hours, Q=tuple(Q_init), F=tuple(F), D=D)


def hindsight_optimum(topo: Topology, actual_demand: TrafficSeries, F: Sequence[int],
                      Q_init: Sequence[int], hours: int, start_hour: int = 0) -> int:
    """Optimal lost demand with the realised demand known for the whole period: a lower bound for any policy."""
    return solve_instance(hindsight_instance(topo, actual_demand, F, Q_init, hours, start_hour)).objective


def relative_to_oracle(lost: int, baseline: int) -> float:
    if baseline == 0:
        return 1.0 if lost == 0 else math.inf
    return lost / baseline


def compute_metrics(trace: SimulationTrace, baseline: int) -> dict:
    """Lost ratio and lost demand relative to the hindsight optimum."""
    if baseline < 0:
        raise InstanceError(f"hindsight baseline must be >= 0, got {baseline}")
    lost, demand = trace.total_lost, trace.total_demand
    relative = relative_to_oracle(lost, baseline)
    return {
        "hours": len(trace.records),
        "total_demand": demand,
        "total_served": trace.total_served,
        "total_lost": lost,
        "lost_ratio": lost / demand if demand else 0.0,
        "hindsight_lost": int(baseline),
        "relative_to_oracle": relative,
        "relative_infinite": math.isinf(relative),
    }


def trace_to_frame(trace: SimulationTrace) -> pd.DataFrame:
    rows = []
    for r in trace.records:
        n = len(r.actual)
        out = np.zeros(n, dtype=np.int64)
        into = np.zeros(n, dtype=np.int64)
        for (i, j), c in r.moves.items():
            if i != j:
                out[i] += c
                into[j] += c
        for i in range(n):
            rows.append({
                "hour": r.hour, "station": i,
                "positions_before": int(r.positions_before[i]),
                "positions_after": int(r.positions_after[i]),
                "moves_out": int(out[i]), "moves_in": int(into[i]),
                "stayers": int(r.stayers[i]), "fixed": trace.F[i],
                "actual": int(r.actual[i]), "forecast": float(r.forecast[i]),
                "served": int(r.served[i]), "lost": int(r.lost[i]),
            })
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def write_trace_csv(trace: SimulationTrace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_to_frame(trace).to_csv(path, index=False, float_format="%.4f", lineterminator="\n")
    return path


def read_trace_csv(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trace file not found: {path}")
    df = pd.read_csv(path)
    missing = set(TRACE_COLUMNS) - set(df.columns)
    if missing:
        raise InstanceError(f"{path}: not a trace file, missing columns {sorted(missing)}")
    return df


def summarize_trace(frame: pd.DataFrame, station: Optional[int] = None) -> pd.DataFrame:
    """Per-station totals of a trace frame, or one station's hourly rows."""
    if station is not None:
        rows = frame[frame["station"] == station]
        if rows.empty:
            raise InstanceError(f"station {station} not in trace")
        return rows.reset_index(drop=True)
    summary = (frame.groupby("station", as_index=False)
               .agg(actual=("actual", "sum"), served=("served", "sum"), lost=("lost", "sum"),
                    moves_out=("moves_out", "sum"), moves_in=("moves_in", "sum"),
                    fixed=("fixed", "first")))
    summary["lost_ratio"] = np.where(summary["actual"] > 0,
                                     summary["lost"] / summary["actual"].where(summary["actual"] > 0, 1), 0.0)
    return summary
