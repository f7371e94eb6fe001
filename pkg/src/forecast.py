#!/usr/bin/env python3
"""
Demand forecasters for the rolling scheduler.

Every forecaster maps the observed prefix (hours 0..t-1) to a window of
predictions for hours t..t+h-1. Oracle kinds read the realised future instead
of learning anything; the baselines only look at the history.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from errors import ForecastError
from traffic import HOURS_PER_DAY, TrafficSeries

logger = logging.getLogger(__name__)

ORACLE = "oracle"
NOISY_ORACLE = "noisy-oracle"
SEASONAL_NAIVE = "seasonal-naive"
HISTORICAL_AVERAGE = "historical-average"
PERSISTENCE = "persistence"
EXTERNAL_FILE = "external-file"
FORECASTER_KINDS = (ORACLE, NOISY_ORACLE, SEASONAL_NAIVE, HISTORICAL_AVERAGE, PERSISTENCE, EXTERNAL_FILE)


@dataclass(frozen=True)
class ForecastWindow:
    start_hour: int
    values: np.ndarray  # [h x stations]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ForecastError(f"forecast window must be [h >= 1 x stations], got {values.shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ForecastError("forecast values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def h(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ForecasterSpec:
    kind: str = ORACLE
    noise: float = 0.0          # noisy-oracle: std-dev of the relative error at step 1
    noise_slope: float = 0.0    # noisy-oracle: added std-dev per extra step ahead
    period: int = HOURS_PER_DAY
    window_days: Optional[int] = None   # historical-average: None = all history
    path: Optional[str] = None          # external-file
    seed: int = 0

    def validate(self):
        if self.kind not in FORECASTER_KINDS:
            raise ForecastError(f"unknown forecaster kind {self.kind!r}; choose from {FORECASTER_KINDS}")
        if self.noise < 0 or self.noise_slope < 0:
            raise ForecastError("noise coefficients must be >= 0")
        if self.period < 1:
            raise ForecastError(f"period must be >= 1, got {self.period}")
        if self.window_days is not None and self.window_days < 1:
            raise ForecastError(f"window_days must be >= 1, got {self.window_days}")
        if self.seed < 0:
            raise ForecastError(f"seed must be >= 0, got {self.seed}")
        if self.kind == EXTERNAL_FILE and not self.path:
            raise ForecastError("external-file forecaster needs a path")

    @property
    def needs_future(self) -> bool:
        return self.kind in (ORACLE, NOISY_ORACLE)

    @property
    def min_history(self) -> int:
        """Hours of observed demand needed before the first prediction."""
        if self.kind == HISTORICAL_AVERAGE:
            return self.period
        if self.kind in (SEASONAL_NAIVE, PERSISTENCE):
            return 1
        return 0


def step_noise(spec: ForecasterSpec, h: int) -> np.ndarray:
    return spec.noise + spec.noise_slope * np.arange(h)


def _oracle(actual_future: Optional[TrafficSeries], h: int, t: int) -> np.ndarray:
    if actual_future is None:
        raise ForecastError(f"oracle forecaster needs the actual future for hours {t}..{t + h - 1}")
    if actual_future.horizon < h:
        raise ForecastError(f"actual future covers {actual_future.horizon} hours, need {h} from hour {t}")
    return np.array(actual_future.values[:h], dtype=float)


def _noisy(spec: ForecasterSpec, truth: np.ndarray, t: int) -> np.ndarray:
    # one stream per (seed, t), drawn step-major, so entry (step, station) does
    # not depend on h
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, t]))
    eps = rng.standard_normal(truth.shape) * step_noise(spec, truth.shape[0])[:, None]
    return np.maximum(0.0, truth * (1.0 + eps))


def _history_values(history: Optional[TrafficSeries]) -> np.ndarray:
    return np.empty((0, 0)) if history is None else history.values


def _persistence(hist: np.ndarray, h: int, t: int) -> np.ndarray:
    if hist.shape[0] < 1:
        raise ForecastError(f"no history before hour {t}")
    return np.repeat(hist[-1:], h, axis=0)


def _seasonal_naive(spec: ForecasterSpec, hist: np.ndarray, h: int, t: int) -> np.ndarray:
    if hist.shape[0] < spec.period:
        logger.warning("seasonal-naive at hour %d: %d hours of history < period %d, using persistence",
                       t, hist.shape[0], spec.period)
        return _persistence(hist, h, t)
    out = np.empty((h, hist.shape[1]))
    for s in range(h):
        # same hour one period back; for windows longer than the period, roll further back
        lag = spec.period * (s // spec.period + 1)
        out[s] = hist[t + s - lag]
    return out


def _historical_average(spec: ForecasterSpec, hist: np.ndarray, h: int, t: int) -> np.ndarray:
    if hist.shape[0] < spec.period:
        raise ForecastError(f"historical-average needs >= {spec.period} hours of history, have {hist.shape[0]}")
    out = np.empty((h, hist.shape[1]))
    for s in range(h):
        target = t + s
        lags = np.arange(target - spec.period, -1, -spec.period)
        lags = lags[lags < t]
        if spec.window_days is not None:
            lags = lags[: spec.window_days]
        out[s] = hist[lags].mean(axis=0)
    return out


def predict(spec: ForecasterSpec, history: Optional[TrafficSeries],
            actual_future: Optional[TrafficSeries], h: int) -> ForecastWindow:
    """
    Predict demand for the h hours following the history prefix.

    history       -- observed demand for hours 0..t-1 (None when t = 0)
    actual_future -- realised demand for hours t..t+h-1; only oracle kinds read it
    """
    spec.validate()
    if h < 1:
        raise ForecastError(f"forecast length must be >= 1, got {h}")
    hist = _history_values(history)
    t = hist.shape[0]

    if spec.kind == ORACLE:
        values = _oracle(actual_future, h, t)
    elif spec.kind == NOISY_ORACLE:
        values = _noisy(spec, _oracle(actual_future, h, t), t)
    elif spec.kind == SEASONAL_NAIVE:
        values = _seasonal_naive(spec, hist, h, t)
    elif spec.kind == HISTORICAL_AVERAGE:
        values = _historical_average(spec, hist, h, t)
    elif spec.kind == PERSISTENCE:
        values = _persistence(hist, h, t)
    else:
        return load_external_forecast(spec.path, t, h)
    return ForecastWindow(start_hour=t, values=values)


# keyed on the modification time too, so a rewritten file is read again
@lru_cache(maxsize=8)
def _read_forecast_table(path: str, mtime_ns: int) -> Tuple[Dict[Tuple[int, int, int], float], int]:
    df = pd.read_csv(path)
    missing = {"t", "step", "station", "value"} - set(df.columns)
    if missing:
        raise ForecastError(f"{path}: missing columns {sorted(missing)}")
    if (df["value"] < 0).any():
        bad = df.loc[df["value"] < 0].iloc[0]
        raise ForecastError(f"{path}: negative value at t={int(bad['t'])}, step={int(bad['step'])}, "
                            f"station={int(bad['station'])}")
    table = {(int(r.t), int(r.step), int(r.station)): float(r.value) for r in df.itertuples(index=False)}
    stations = int(df["station"].max()) + 1 if len(df) else 0
    return table, stations


def load_external_forecast(path, t: int, h: int, stations: Optional[int] = None) -> ForecastWindow:
    """Read the stored predictions made at hour t for steps 1..h, verbatim."""
    if not Path(path).exists():
        raise ForecastError(f"External forecast file not found: {path}")
    table, file_stations = _read_forecast_table(str(path), Path(path).stat().st_mtime_ns)
    stations = file_stations if stations is None else stations
    if stations < 1:
        raise ForecastError(f"{path}: no forecast rows")
    values = np.empty((h, stations))
    for step in range(1, h + 1):
        for i in range(stations):
            try:
                values[step - 1, i] = table[(t, step, i)]
            except KeyError:
                raise ForecastError(f"{path}: missing forecast for (t={t}, step={step}), station {i}") from None
    return ForecastWindow(start_hour=t, values=values)


def write_external_forecast(windows: Iterable[ForecastWindow], path) -> Path:
    rows = []
    for w in windows:
        for s in range(w.h):
            for i in range(w.values.shape[1]):
                rows.append({"t": w.start_hour, "step": s + 1, "station": i, "value": w.values[s, i]})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=["t", "step", "station", "value"]).to_csv(path, index=False)
    _read_forecast_table.cache_clear()
    return path


ERROR_SUM_COLUMNS = ["step", "sq", "abs", "truth_sq", "n"]
ERROR_COLUMNS = ["step", "rmse", "mae", "rel_rmse", "n"]


def error_sums(windows: Iterable[ForecastWindow], actual: TrafficSeries) -> pd.DataFrame:
    """Per-step sums of squared error, absolute error and squared truth; these pool across runs."""
    acc: Dict[int, list] = {}
    for w in windows:
        for s in range(w.h):
            hour = w.start_hour + s
            if hour >= actual.horizon:
                break
            err = w.values[s] - actual.values[hour]
            row = acc.setdefault(s + 1, [0.0, 0.0, 0.0, 0])
            row[0] += float(np.sum(err ** 2))
            row[1] += float(np.sum(np.abs(err)))
            row[2] += float(np.sum(actual.values[hour] ** 2))
            row[3] += err.size
    rows = [[step] + acc[step] for step in sorted(acc)]
    return pd.DataFrame(rows, columns=ERROR_SUM_COLUMNS)


def errors_from_sums(sums: pd.DataFrame) -> pd.DataFrame:
    if sums.empty:
        return pd.DataFrame(columns=ERROR_COLUMNS)
    sums = sums.groupby("step", as_index=False)[["sq", "abs", "truth_sq", "n"]].sum().sort_values("step")
    out = pd.DataFrame({
        "step": sums["step"].astype(int),
        "rmse": np.sqrt(sums["sq"] / sums["n"]),
        "mae": sums["abs"] / sums["n"],
        "rel_rmse": np.sqrt(sums["sq"] / sums["truth_sq"].where(sums["truth_sq"] > 0)),
        "n": sums["n"].astype(int),
    })
    return out.reset_index(drop=True)[ERROR_COLUMNS]


def forecast_errors(windows: Iterable[ForecastWindow], actual: TrafficSeries) -> pd.DataFrame:
    """Per-step RMSE, MAE and relative RMSE of a set of windows against realised demand."""
    return errors_from_sums(error_sums(windows, actual))
