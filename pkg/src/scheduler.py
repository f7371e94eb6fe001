#!/usr/bin/env python3
"""
Rolling-horizon policy: plan the next h hours from the forecast, execute hour one.
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from errors import ConfigError, InstanceError
from flowcore import MovePlan, SchedulingInstance, solve_instance
from forecast import ForecasterSpec, ForecastWindow
from topology import Topology
from traffic import round_half_up

MAX_HORIZON = 24


@dataclass(frozen=True)
class PolicyConfig:
    h: int = 6
    forecaster: ForecasterSpec = field(default_factory=ForecasterSpec)
    integerization: str = "half-up"

    def validate(self):
        if not 1 <= self.h <= MAX_HORIZON:
            raise ConfigError(f"planning horizon h must be in 1..{MAX_HORIZON}, got {self.h}")
        if self.integerization != "half-up":
            raise ConfigError(f"unsupported integerization {self.integerization!r}")
        self.forecaster.validate()


@dataclass(frozen=True)
class FirstStepMoves:
    moves: Dict[Tuple[int, int], int]  # (i, j) -> count, stays included

    def stayers(self, stations: int) -> np.ndarray:
        out = np.zeros(stations, dtype=np.int64)
        for (i, j), c in self.moves.items():
            if i == j:
                out[i] += c
        return out

    def arrivals(self, stations: int) -> np.ndarray:
        out = np.zeros(stations, dtype=np.int64)
        for (_, j), c in self.moves.items():
            out[j] += c
        return out

    def departures(self, stations: int) -> np.ndarray:
        out = np.zeros(stations, dtype=np.int64)
        for (i, _), c in self.moves.items():
            out[i] += c
        return out


def build_instance(positions: Sequence[int], F: Sequence[int], forecast: ForecastWindow,
                   topo: Topology) -> SchedulingInstance:
    if forecast.values.shape[1] != topo.station_count:
        raise InstanceError(f"forecast covers {forecast.values.shape[1]} stations, "
                            f"topology has {topo.station_count}")
    return SchedulingInstance(topo=topo, T=forecast.h, Q=tuple(positions), F=tuple(F),
                              D=round_half_up(forecast.values))


def plan_step(positions: Sequence[int], F: Sequence[int], forecast: ForecastWindow,
              topo: Topology, cfg: PolicyConfig) -> FirstStepMoves:
    """
    Solve the scheduling program over the forecast window and keep only hour one.

    The window may be shorter than cfg.h near the end of a simulation, never longer.
    """
    if forecast.h > cfg.h:
        raise InstanceError(f"forecast window of {forecast.h} hours exceeds planning horizon {cfg.h}")
    plan: MovePlan = solve_instance(build_instance(positions, F, forecast, topo))
    return FirstStepMoves(moves=plan.moves(1))
