#!/usr/bin/env python3
"""
Hourly traffic and swap-demand series: synthetic generation with a daily
cycle, edge-to-station conversion, peak shifting and CSV I/O.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Optional, Tuple

import numpy as np
import pandas as pd

from errors import TrafficError
from topology import Topology

logger = logging.getLogger(__name__)

EDGE = "edge-traffic"
STATION = "station-demand"
KINDS = (EDGE, STATION)
HOURS_PER_DAY = 24


@dataclass(frozen=True)
class TrafficSeries:
    values: np.ndarray  # [hour x series], non-negative
    kind: str = STATION

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise TrafficError(f"traffic values must be 2-D [hour x series], got shape {values.shape}")
        if values.shape[0] < 1:
            raise TrafficError("traffic horizon must be at least 1 hour")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise TrafficError("traffic values must be finite and non-negative")
        if self.kind not in KINDS:
            raise TrafficError(f"unknown traffic kind {self.kind!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def window(self, start: int, stop: int) -> "TrafficSeries":
        return TrafficSeries(self.values[start:stop], self.kind)


@dataclass(frozen=True)
class ShiftSpec:
    shifted_stations: FrozenSet[int]
    shift_hours: int


@dataclass(frozen=True)
class SeasonalitySpec:
    """Daily demand profile: base level times (1 + bumps), times noise."""

    base_mean: float = 10.0
    base_spread: float = 0.3         # per-station base drawn in mean*(1 +/- spread)
    peak_hours: Tuple[float, ...] = (9.0, 17.0)
    peak_amplitude: float = 1.5
    peak_width: float = 2.0          # hours (std-dev of each bump)
    peak_jitter: float = 0.0         # per-station peak offset in +/- hours
    night_level: float = 0.3         # multiplier of the base around 3 am
    noise: float = 0.2               # multiplicative uniform noise in (1 - n, 1 + n)

    def validate(self):
        if self.base_mean < 0:
            raise TrafficError(f"negative base level {self.base_mean}")
        if not 0 <= self.base_spread < 1:
            raise TrafficError(f"base_spread must be in [0, 1), got {self.base_spread}")
        if not 0 <= self.noise < 1:
            raise TrafficError(f"noise coefficient must be in [0, 1), got {self.noise}")
        if self.peak_amplitude < 0 or self.peak_width <= 0:
            raise TrafficError("peak_amplitude must be >= 0 and peak_width > 0")
        if self.peak_jitter < 0 or not 0 <= self.night_level <= 1:
            raise TrafficError("peak_jitter must be >= 0 and night_level in [0, 1]")


def round_half_up(x) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


def _circular_distance(a: np.ndarray, b: float) -> np.ndarray:
    d = np.abs(a - b) % HOURS_PER_DAY
    return np.minimum(d, HOURS_PER_DAY - d)


def daily_profile(params: SeasonalitySpec, base: float, offset: float = 0.0) -> np.ndarray:
    """Expected demand for each hour of the day (length 24)."""
    hours = np.arange(HOURS_PER_DAY, dtype=float)
    shape = np.zeros(HOURS_PER_DAY)
    for peak in params.peak_hours:
        d = _circular_distance(hours, peak + offset)
        shape += np.exp(-0.5 * (d / params.peak_width) ** 2)
    # low overnight, 1.0 during the day, bumps on top
    night = _circular_distance(hours, 3.0 + offset)
    daytime = params.night_level + (1.0 - params.night_level) * np.clip(night / 6.0, 0.0, 1.0)
    return base * (daytime + params.peak_amplitude * shape)


def profile_matrix(n_series: int, seed: int, params: SeasonalitySpec) -> np.ndarray:
    """Per-series 24-hour expected profiles [24 x n_series], deterministic in seed."""
    params.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    bases = params.base_mean * (1.0 + params.base_spread * rng.uniform(-1.0, 1.0, n_series))
    offsets = params.peak_jitter * rng.uniform(-1.0, 1.0, n_series)
    return np.column_stack([daily_profile(params, bases[k], offsets[k]) for k in range(n_series)])


def _realize(profiles: np.ndarray, days: int, seed: int, noise: float) -> np.ndarray:
    expected = np.tile(profiles, (days, 1))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    factor = 1.0 + noise * rng.uniform(-1.0, 1.0, expected.shape)
    return round_half_up(expected * factor).astype(float)


def generate_synthetic(topo: Topology, days: int, seed: int,
                       params: Optional[SeasonalitySpec] = None) -> TrafficSeries:
    """
    Hourly station swap demand with a 24-hour cycle.

    Each station gets a base level and peak offset drawn once from the seed; every
    hour is the profile value times (1 + U(-noise, noise)), rounded half-up.
    """
    params = params or SeasonalitySpec()
    if days < 1:
        raise TrafficError(f"days must be >= 1, got {days}")
    profiles = profile_matrix(topo.station_count, seed, params)
    values = _realize(profiles, days, seed, params.noise)
    logger.info("Generated %d days of synthetic demand for %d stations (seed=%d)",
                days, topo.station_count, seed)
    return TrafficSeries(values, STATION)


def generate_synthetic_edges(topo: Topology, days: int, seed: int,
                             params: Optional[SeasonalitySpec] = None) -> TrafficSeries:
    """Same seasonality model, one series per link in topology link order."""
    params = params or SeasonalitySpec()
    if days < 1:
        raise TrafficError(f"days must be >= 1, got {days}")
    if not topo.links:
        raise TrafficError("topology has no links to carry edge traffic")
    profiles = profile_matrix(len(topo.links), seed, params)
    return TrafficSeries(_realize(profiles, days, seed, params.noise), EDGE)


def edge_to_station_demand(traffic: TrafficSeries, topo: Topology, swap_rate: float) -> TrafficSeries:
    """demand[t][i] = round_half_up(swap_rate * sum of traffic on links incident to i)."""
    if traffic.kind != EDGE:
        raise TrafficError(f"expected {EDGE} series, got {traffic.kind}")
    if traffic.m != len(topo.links):
        raise TrafficError(f"edge series count {traffic.m} != topology links {len(topo.links)}")
    if not 0.0 <= swap_rate <= 1.0:
        raise TrafficError(f"swap_rate must be in [0, 1], got {swap_rate}")

    incidence = np.zeros((len(topo.links), topo.station_count))
    for k, (a, b) in enumerate(topo.links):
        incidence[k, a] = 1.0
        incidence[k, b] = 1.0
    demand = round_half_up(swap_rate * (traffic.values @ incidence))
    return TrafficSeries(demand.astype(float), STATION)


def apply_shift(traffic: TrafficSeries, spec: ShiftSpec, topo: Optional[Topology] = None) -> TrafficSeries:
    """
    Advance the selected series by `shift_hours` (circular): value[t] = original[t + s].

    For station demand the selected stations' columns move; for edge traffic every
    link incident to a selected station moves, which needs the topology.
    """
    s = spec.shift_hours
    if s < 0 or s >= traffic.horizon:
        raise TrafficError(f"shift_hours must be in [0, {traffic.horizon}), got {s}")

    if traffic.kind == STATION:
        columns = sorted(spec.shifted_stations)
        if any(not 0 <= c < traffic.m for c in columns):
            raise TrafficError(f"shifted station out of range 0..{traffic.m - 1}")
    else:
        if topo is None:
            raise TrafficError("shifting edge traffic requires the topology")
        if any(not 0 <= i < topo.station_count for i in spec.shifted_stations):
            raise TrafficError(f"shifted station out of range 0..{topo.station_count - 1}")
        columns = sorted({k for i in spec.shifted_stations for k in topo.incident_links(i)})

    values = np.array(traffic.values)
    if s and columns:
        values[:, columns] = np.roll(values[:, columns], -s, axis=0)
    return TrafficSeries(values, traffic.kind)


def select_shift_stations(topo: Topology, fraction: float, seed: int) -> FrozenSet[int]:
    """round(fraction * |S|) stations drawn uniformly without replacement."""
    if not 0.0 <= fraction <= 1.0:
        raise TrafficError(f"shift fraction must be in [0, 1], got {fraction}")
    k = int(round_half_up(fraction * topo.station_count))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    picked = rng.choice(topo.station_count, size=k, replace=False)
    return frozenset(int(i) for i in picked)


def write_traffic_csv(traffic: TrafficSeries, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(round_half_up(traffic.values),
                      columns=[f"series_{k}" for k in range(traffic.m)])
    df.insert(0, "hour", np.arange(traffic.horizon))
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# kind={traffic.kind}\n")
        df.to_csv(f, index=False, lineterminator="\n")
    return path


def read_traffic_csv(path, kind: Optional[str] = None) -> TrafficSeries:
    """Read the traffic CSV; `kind` fills in for a missing '# kind=' line and must agree with one."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Traffic file not found: {path}")
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    file_kind = first.split("=", 1)[1].strip() if first.startswith("# kind=") else None
    if kind and file_kind and kind != file_kind:
        raise TrafficError(f"{path}: file holds {file_kind}, expected {kind}")
    kind = kind or file_kind or STATION

    df = pd.read_csv(path, comment="#")
    if "hour" not in df.columns:
        raise TrafficError(f"{path}: missing 'hour' column")
    series_cols = [c for c in df.columns if c != "hour"]
    expected = [f"series_{k}" for k in range(len(series_cols))]
    if series_cols != expected:
        raise TrafficError(f"{path}: expected columns {expected}, got {series_cols}")
    df = df.sort_values("hour")
    if list(df["hour"]) != list(range(len(df))):
        raise TrafficError(f"{path}: hours must be 0..{len(df) - 1} without gaps")
    if df[series_cols].isnull().any().any():
        raise TrafficError(f"{path}: missing values")
    return TrafficSeries(df[series_cols].to_numpy(dtype=float), kind)


def mean_by_hour_of_day(traffic: TrafficSeries) -> np.ndarray:
    """Average over days for each hour-of-day [24 x series] (complete days only)."""
    days = traffic.horizon // HOURS_PER_DAY
    if days < 1:
        raise TrafficError("need at least one full day")
    cube = traffic.values[: days * HOURS_PER_DAY].reshape(days, HOURS_PER_DAY, traffic.m)
    return cube.mean(axis=0)

