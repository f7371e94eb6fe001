#!/usr/bin/env python3
"""
Fleet sizing and initial placement of mobile batteries.

Total batteries = inventory level x network average hourly demand, split into
mobile and fixed by the mobile ratio; fixed batteries are apportioned to
stations proportionally to their average demand, and the mobile ones are placed
by solving the scheduling program with the per-station starting stock left
free (only its total is given).
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, InstanceError
from flowcore import (SOURCE, SchedulingInstance, build_time_expanded_network,
                      solve_min_cost_flow)
from topology import Topology
from traffic import round_half_up

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FleetConfig:
    inventory_level: float = 0.75
    mobile_ratio: float = 0.3

    def validate(self):
        if not 0.0 < self.inventory_level <= 1.5:
            raise ConfigError(f"inventory_level must be in (0, 1.5], got {self.inventory_level}")
        if not 0.0 <= self.mobile_ratio <= 1.0:
            raise ConfigError(f"mobile_ratio must be in [0, 1], got {self.mobile_ratio}")


@dataclass(frozen=True)
class Fleet:
    total: int
    mobile: int
    fixed_total: int
    F: Tuple[int, ...]


def allocate_fixed(avg_demand: Sequence[float], fixed_total: int) -> Tuple[int, ...]:
    """
    Largest-remainder apportionment of fixed_total proportional to avg_demand.

    Leftover units go to the largest fractional remainders; equal remainders go to
    the lower station index. Exact rational arithmetic, so equal shares tie exactly.
    """
    if fixed_total < 0:
        raise InstanceError(f"fixed_total must be >= 0, got {fixed_total}")
    weights = [Fraction(float(a)) for a in avg_demand]
    if any(w < 0 for w in weights):
        raise InstanceError("average demand must be non-negative")
    if fixed_total == 0:
        return tuple(0 for _ in weights)
    total_weight = sum(weights)
    if total_weight == 0:
        raise InstanceError("cannot apportion fixed batteries: average demand is zero everywhere")

    quotas = [fixed_total * w / total_weight for w in weights]
    counts = [int(q) for q in quotas]  # floor, quotas are non-negative
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = fixed_total - sum(counts)
    for i in sorted(range(len(weights)), key=lambda i: (-remainders[i], i))[:leftover]:
        counts[i] += 1
    return tuple(counts)


def size_fleet(cfg: FleetConfig, avg_demand: Sequence[float]) -> Fleet:
    """B = round(inventory x sum avg), mobile = round(ratio x B), fixed = B - mobile."""
    cfg.validate()
    total = int(round_half_up(cfg.inventory_level * float(np.sum(avg_demand))))
    mobile = int(round_half_up(cfg.mobile_ratio * total))
    fixed_total = total - mobile
    F = allocate_fixed(avg_demand, fixed_total) if fixed_total else tuple(0 for _ in avg_demand)
    logger.info("Fleet: %d batteries (%d fixed, %d mobile) at inventory %.2f, mobile ratio %.2f",
                total, fixed_total, mobile, cfg.inventory_level, cfg.mobile_ratio)
    return Fleet(total=total, mobile=mobile, fixed_total=fixed_total, F=F)


def _source_objective(topo: Topology, F: Sequence[int], D: np.ndarray, pinned: Sequence[int],
                      free: int, caps: Sequence[Optional[int]]) -> Optional[int]:
    """Optimal lost demand when `pinned` batteries are placed and `free` more may go anywhere within caps."""
    inst = SchedulingInstance(topo=topo, T=D.shape[0], Q=tuple(pinned), F=tuple(F), D=D)
    ten = build_time_expanded_network(inst)
    net = ten.network
    if free:
        source = net.add_node(label="source", supply=free)
        net.supplies[ten.sink] -= free
        for i, cap in enumerate(caps):
            if cap is None or cap > 0:
                net.add_arc(source, ten.node(0, i), cap, 0, kind=SOURCE, tag=(i,))
        if sum(free if c is None else c for c in caps) < free:
            return None
    solution = solve_min_cost_flow(net)
    return int(inst.uncovered().sum()) + solution.cost


def allocate_mobile_initial(topo: Topology, T: int, F: Sequence[int], D, Q_total: int) -> Tuple[int, ...]:
    """
    Initial mobile-battery placement minimising lost demand over the first T hours.

    D is a (possibly fractional) demand forecast; it is rounded half-up. Among all
    optimal placements the lexicographically smallest (Q_0, Q_1, ...) is returned:
    station by station, the smallest count that keeps the optimum is pinned.
    """
    if Q_total < 0:
        raise InstanceError(f"Q_total must be >= 0, got {Q_total}")
    D = np.asarray(D)
    if D.ndim != 2 or D.shape[0] < T or D.shape[1] != topo.station_count:
        raise InstanceError(f"demand must be [>= {T} x {topo.station_count}], got {D.shape}")
    D = round_half_up(D[:T])
    S = topo.station_count
    if Q_total == 0:
        return tuple(0 for _ in range(S))

    unbounded: List[Optional[int]] = [None] * S
    optimum = _source_objective(topo, F, D, [0] * S, Q_total, unbounded)

    pinned = [0] * S
    remaining = Q_total
    for i in range(S):
        if remaining == 0:
            break
        if i == S - 1:
            pinned[i] = remaining
            break
        # smallest cap on station i's source arc that still reaches the optimum
        caps: List[Optional[int]] = [0] * i + [None] * (S - i)
        lo, hi = 0, remaining
        while lo < hi:
            mid = (lo + hi) // 2
            caps[i] = mid
            value = _source_objective(topo, F, D, pinned, remaining, caps)
            if value is not None and value == optimum:
                hi = mid
            else:
                lo = mid + 1
        pinned[i] = lo
        remaining -= lo

    logger.debug("Initial mobile allocation %s (lost demand over first %d hours: %d)", pinned, T, optimum)
    return tuple(pinned)
