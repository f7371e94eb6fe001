#!/usr/bin/env python3
"""
Exact solver for the mobile-battery scheduling integer program.

The program minimises total lost demand over T hourly periods subject to
  * every mobile battery starting where it is (z_1 sums to Q per station),
  * flow conservation between consecutive periods,
  * moves only along links (or staying put),
  * lost demand L_{t,i} >= D_{i,t} - F_i - z_{t,i,i} for t < T, and
    L_{T,i} >= D_{i,T} - F_i - (all batteries at i at the start of T).

Its constraint matrix is a network matrix, so it is solved as a min-cost flow on
a time-expanded graph: node (k, i) holds the batteries at station i at the start
of period k+1, staying at i during period k+1 earns -1 per battery up to the
uncovered demand max(0, D - F), and the final layer drains into a sink through
the same kind of reward arc. Lost demand is then

    sum_{t,i} max(0, D_{i,t} - F_i) + (min-cost flow value).

A brute-force enumerator over battery trajectories serves as the oracle for
small instances.
"""

import heapq
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import InfeasibleFlowError, InstanceError
from topology import Topology

logger = logging.getLogger(__name__)

# arc kinds of the time-expanded network
MOVE = "move"
SERVE = "serve"
STAY = "stay"
SOURCE = "source"

# brute-force guard
MAX_BRUTE_STATIONS = 4
MAX_BRUTE_T = 4
MAX_BRUTE_BATTERIES = 3


@dataclass(frozen=True)
class SchedulingInstance:
    topo: Topology
    T: int
    Q: Tuple[int, ...]
    F: Tuple[int, ...]
    D: np.ndarray  # [T x stations], non-negative integers

    def __post_init__(self):
        n = self.topo.station_count
        if self.T < 1:
            raise InstanceError(f"horizon T must be >= 1, got {self.T}")
        Q = tuple(int(q) for q in self.Q)
        F = tuple(int(f) for f in self.F)
        if len(Q) != n or len(F) != n:
            raise InstanceError(f"Q/F must have one entry per station ({n}), got {len(Q)}/{len(F)}")
        if min(Q + F, default=0) < 0:
            raise InstanceError("Q and F must be non-negative")
        D = np.asarray(self.D)
        if D.shape != (self.T, n):
            raise InstanceError(f"demand matrix must be [T={self.T} x {n}], got {D.shape}")
        if np.any(D < 0) or np.any(D != np.round(D)):
            raise InstanceError("demand must be non-negative integers")
        D = D.astype(np.int64)
        D.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "D", D)

    @property
    def stations(self) -> int:
        return self.topo.station_count

    def uncovered(self) -> np.ndarray:
        """max(0, D_{i,t} - F_i): demand the fixed stock cannot cover, [T x stations]."""
        return np.maximum(0, self.D - np.asarray(self.F, dtype=np.int64)[None, :])


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    capacity: Optional[int]  # None = unbounded
    cost: int
    tiebreak: int = 0
    kind: str = ""
    # (period, from-station, to-station) for arcs that carry z; station for sink arcs
    tag: Tuple[int, ...] = ()


@dataclass
class FlowNetwork:
    node_count: int = 0
    arcs: List[Arc] = field(default_factory=list)
    supplies: List[int] = field(default_factory=list)
    labels: List[object] = field(default_factory=list)

    def add_node(self, label=None, supply: int = 0) -> int:
        self.node_count += 1
        self.supplies.append(supply)
        self.labels.append(label)
        return self.node_count - 1

    def add_arc(self, tail: int, head: int, capacity: Optional[int], cost: int,
                tiebreak: int = 0, kind: str = "", tag: Tuple[int, ...] = ()) -> int:
        if capacity is not None and capacity < 0:
            raise InstanceError(f"negative capacity on arc {tail}->{head}")
        self.arcs.append(Arc(tail, head, capacity, cost, tiebreak, kind, tag))
        return len(self.arcs) - 1

    def validate(self):
        if sum(self.supplies) != 0:
            raise InfeasibleFlowError(f"supplies sum to {sum(self.supplies)}, expected 0")
        for a in self.arcs:
            if not (0 <= a.tail < self.node_count and 0 <= a.head < self.node_count):
                raise InstanceError(f"arc {a.tail}->{a.head} references a missing node")


@dataclass(frozen=True)
class FlowSolution:
    network: FlowNetwork
    flow: Tuple[int, ...]   # per arc, same order as network.arcs
    cost: int               # primary cost only
    tiebreak_cost: int


@dataclass(frozen=True)
class TimeExpandedNetwork:
    network: FlowNetwork
    T: int
    stations: int
    sink: int

    def node(self, k: int, i: int) -> int:
        return k * self.stations + i


@dataclass(frozen=True)
class MovePlan:
    z: np.ndarray     # [T x stations x stations]; z[t-1, i, j] = batteries moving i -> j in period t
    lost: np.ndarray  # [T x stations]
    objective: int

    def moves(self, t: int) -> Dict[Tuple[int, int], int]:
        """Non-zero z_{t,i,j} for period t (1-based), stays included."""
        zt = self.z[t - 1]
        return {(int(i), int(j)): int(zt[i, j]) for i, j in zip(*np.nonzero(zt))}


# ---------------------------------------------------------------------------
# reduction
# ---------------------------------------------------------------------------

def build_time_expanded_network(inst: SchedulingInstance) -> TimeExpandedNetwork:
    """
    Time-expanded min-cost-flow network of a scheduling instance.

    Layers k = 0..T-1 with one node per station plus a sink. Between layers:
    movement arcs to every neighbour (unbounded, cost 0, tiebreak 1) and the stay
    pair (serving arc capped at max(0, D - F) with cost -1, free arc cost 0).
    Layer T-1 drains into the sink through the same serving/free pair for period T.
    Arcs are added stays first, then moves in neighbour order.
    """
    S, T = inst.stations, inst.T
    uncovered = inst.uncovered()
    net = FlowNetwork()
    for k in range(T):
        for i in range(S):
            net.add_node(label=(k, i), supply=inst.Q[i] if k == 0 else 0)
    sink = net.add_node(label="sink", supply=-sum(inst.Q))
    ten = TimeExpandedNetwork(net, T, S, sink)

    for k in range(T - 1):
        t = k + 1
        for i in range(S):
            u, v = ten.node(k, i), ten.node(k + 1, i)
            if uncovered[k, i] > 0:
                net.add_arc(u, v, int(uncovered[k, i]), -1, kind=SERVE, tag=(t, i, i))
            net.add_arc(u, v, None, 0, kind=STAY, tag=(t, i, i))
            for j in sorted(inst.topo.adjacency[i]):
                net.add_arc(u, ten.node(k + 1, j), None, 0, tiebreak=1, kind=MOVE, tag=(t, i, j))
    for i in range(S):
        u = ten.node(T - 1, i)
        if uncovered[T - 1, i] > 0:
            net.add_arc(u, sink, int(uncovered[T - 1, i]), -1, kind=SERVE, tag=(T, i, i))
        net.add_arc(u, sink, None, 0, kind=STAY, tag=(T, i, i))
    return ten


# ---------------------------------------------------------------------------
# min-cost flow: successive shortest paths with potentials
# ---------------------------------------------------------------------------

def _initial_potentials(n: int, source: int, head: List[int], cap: List[int],
                        cost: List[int], adj: List[List[int]]) -> List[int]:
    """Shortest distances from the source over arcs with capacity (SPFA); graph must have no negative cycle."""
    INF = float("inf")
    dist = [INF] * n
    dist[source] = 0
    in_queue = [False] * n
    relaxations = [0] * n
    queue = deque([source])
    in_queue[source] = True
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        du = dist[u]
        for e in adj[u]:
            if cap[e] > 0:
                v = head[e]
                nd = du + cost[e]
                if nd < dist[v]:
                    dist[v] = nd
                    relaxations[v] += 1
                    if relaxations[v] > n:
                        raise InstanceError("negative-cost cycle in flow network")
                    if not in_queue[v]:
                        in_queue[v] = True
                        queue.append(v)
    return [0 if d == INF else d for d in dist]


def solve_min_cost_flow(net: FlowNetwork) -> FlowSolution:
    """
    Integral min-cost flow meeting every supply, by successive shortest paths.

    Costs are minimised lexicographically: primary `cost` first, then `tiebreak`.
    Negative costs are fine as long as the network has no negative cycle (the
    time-expanded networks are acyclic). Dijkstra pops (distance, node) in order
    and relaxes on strict improvement only, so equal-cost paths resolve to the
    same predecessor every run. Raises InfeasibleFlowError when some supply
    cannot reach a demand node.
    """
    net.validate()
    total = sum(s for s in net.supplies if s > 0)
    n_arcs = len(net.arcs)
    if total == 0:
        return FlowSolution(net, (0,) * n_arcs, 0, 0)

    bound = sum(abs(a.tiebreak) * (total if a.capacity is None else min(a.capacity, total))
                for a in net.arcs)
    scale = 2 * bound + 1

    n = net.node_count + 2
    src, dst = n - 2, n - 1
    head: List[int] = []
    cap: List[int] = []
    cost: List[int] = []
    adj: List[List[int]] = [[] for _ in range(n)]

    def add(u, v, c, w):
        adj[u].append(len(head))
        head.append(v)
        cap.append(c)
        cost.append(w)
        adj[v].append(len(head))
        head.append(u)
        cap.append(0)
        cost.append(-w)

    for a in net.arcs:
        c = total if a.capacity is None else min(a.capacity, total)
        add(a.tail, a.head, c, a.cost * scale + a.tiebreak)
    for node, s in enumerate(net.supplies):
        if s > 0:
            add(src, node, s, 0)
        elif s < 0:
            add(node, dst, -s, 0)

    pot = _initial_potentials(n, src, head, cap, cost, adj)
    INF = float("inf")
    sent = 0
    while sent < total:
        dist = [INF] * n
        pred = [-1] * n
        dist[src] = 0
        heap = [(0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            pu = pot[u]
            for e in adj[u]:
                if cap[e] > 0:
                    v = head[e]
                    nd = d + cost[e] + pu - pot[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        pred[v] = e
                        heapq.heappush(heap, (nd, v))
        if dist[dst] == INF:
            raise InfeasibleFlowError(f"cannot route all supply: {total - sent} of {total} units stranded")
        for v in range(n):
            if dist[v] < INF:
                pot[v] += dist[v]

        push = total - sent
        v = dst
        while v != src:
            e = pred[v]
            push = min(push, cap[e])
            v = head[e ^ 1]
        v = dst
        while v != src:
            e = pred[v]
            cap[e] -= push
            cap[e ^ 1] += push
            v = head[e ^ 1]
        sent += push

    flow = tuple(cap[2 * k + 1] for k in range(n_arcs))
    primary = sum(f * a.cost for f, a in zip(flow, net.arcs))
    secondary = sum(f * a.tiebreak for f, a in zip(flow, net.arcs))
    return FlowSolution(net, flow, primary, secondary)


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------

def lost_demand(inst: SchedulingInstance, z: np.ndarray) -> np.ndarray:
    """L_{t,i} implied by a movement tensor: stayers serve for t < T, every battery present serves at T."""
    F = np.asarray(inst.F, dtype=np.int64)
    available = np.empty((inst.T, inst.stations), dtype=np.int64)
    for k in range(inst.T - 1):
        available[k] = np.diagonal(z[k])
    available[-1] = z[-2].sum(axis=0) if inst.T > 1 else np.asarray(inst.Q, dtype=np.int64)
    return np.maximum(0, inst.D - F[None, :] - available)


def check_plan(inst: SchedulingInstance, z: np.ndarray):
    """Raise InstanceError unless z satisfies conservation, adjacency and integrality."""
    if z.shape != (inst.T, inst.stations, inst.stations):
        raise InstanceError(f"plan shape {z.shape} does not match instance")
    if np.any(z < 0):
        raise InstanceError("negative battery count in plan")
    if not np.array_equal(z[0].sum(axis=1), np.asarray(inst.Q)):
        raise InstanceError("first-period moves do not match the initial stock Q")
    for k in range(1, inst.T):
        if not np.array_equal(z[k - 1].sum(axis=0), z[k].sum(axis=1)):
            raise InstanceError(f"flow conservation violated entering period {k + 1}")
    allowed = np.eye(inst.stations, dtype=bool)
    for i in range(inst.stations):
        allowed[i, list(inst.topo.adjacency[i])] = True
    if np.any(z[:, ~allowed]):
        raise InstanceError("plan moves a battery between non-adjacent stations")


def extract_plan(inst: SchedulingInstance, flow: FlowSolution) -> MovePlan:
    """
    Read z and L back off a solved time-expanded network.

    The serving and free stay arcs are summed into z_{t,i,i}; the final period is
    reported as all-stay. The objective is cross-checked against the cost
    relation of the reduction.
    """
    S, T = inst.stations, inst.T
    z = np.zeros((T, S, S), dtype=np.int64)
    for f, arc in zip(flow.flow, flow.network.arcs):
        if f and arc.kind in (MOVE, SERVE, STAY):
            t, i, j = arc.tag
            z[t - 1, i, j] += f
    check_plan(inst, z)

    lost = lost_demand(inst, z)
    objective = int(lost.sum())
    expected = int(inst.uncovered().sum()) + flow.cost
    if objective != expected:
        raise InstanceError(f"inconsistent flow: plan loses {objective}, flow cost implies {expected}")
    return MovePlan(z=z, lost=lost, objective=objective)


def solve_instance(inst: SchedulingInstance) -> MovePlan:
    ten = build_time_expanded_network(inst)
    return extract_plan(inst, solve_min_cost_flow(ten.network))


def brute_force_schedule(inst: SchedulingInstance) -> MovePlan:
    """
    Exhaustive search over every battery's trajectory, memoised on (period, positions).

    Only for tiny instances (<= 4 stations, T <= 4, <= 3 mobile batteries).
    Choices are enumerated stay-first, so ties resolve towards staying.
    """
    S, T = inst.stations, inst.T
    if S > MAX_BRUTE_STATIONS or T > MAX_BRUTE_T or sum(inst.Q) > MAX_BRUTE_BATTERIES:
        raise InstanceError(f"instance too large for brute force: {S} stations, T={T}, "
                            f"{sum(inst.Q)} batteries (max {MAX_BRUTE_STATIONS}/{MAX_BRUTE_T}/"
                            f"{MAX_BRUTE_BATTERIES})")
    uncovered = inst.uncovered()
    options = [[i] + sorted(inst.topo.adjacency[i]) for i in range(S)]
    memo: Dict[Tuple[int, Tuple[int, ...]], Tuple[int, Optional[np.ndarray]]] = {}

    def best(k: int, positions: Tuple[int, ...]) -> Tuple[int, Optional[np.ndarray]]:
        if k == T - 1:
            return int(np.maximum(0, uncovered[k] - np.asarray(positions)).sum()), None
        key = (k, positions)
        if key in memo:
            return memo[key]
        batteries = [i for i in range(S) for _ in range(positions[i])]
        best_value, best_z = None, None
        for choice in itertools.product(*(options[b] for b in batteries)):
            zk = np.zeros((S, S), dtype=np.int64)
            for b, j in zip(batteries, choice):
                zk[b, j] += 1
            here = int(np.maximum(0, uncovered[k] - np.diagonal(zk)).sum())
            future, _ = best(k + 1, tuple(int(x) for x in zk.sum(axis=0)))
            if best_value is None or here + future < best_value:
                best_value, best_z = here + future, zk
        memo[key] = (best_value, best_z)
        return memo[key]

    z = np.zeros((T, S, S), dtype=np.int64)
    positions = tuple(inst.Q)
    for k in range(T - 1):
        _, zk = best(k, positions)
        z[k] = zk
        positions = tuple(int(x) for x in zk.sum(axis=0))
    z[T - 1] = np.diag(positions)

    lost = lost_demand(inst, z)
    return MovePlan(z=z, lost=lost, objective=int(lost.sum()))


# ---------------------------------------------------------------------------
# debug dumps
# ---------------------------------------------------------------------------

def format_network(net: FlowNetwork) -> str:
    lines = [f"nodes {net.node_count}"]
    for v, (label, s) in enumerate(zip(net.labels, net.supplies)):
        lines.append(f"node {v} {label} supply={s}")
    for k, a in enumerate(net.arcs):
        cap = "inf" if a.capacity is None else a.capacity
        lines.append(f"arc {k} {a.tail}->{a.head} cap={cap} cost={a.cost} tb={a.tiebreak} {a.kind} {a.tag}")
    return "\n".join(lines) + "\n"


def format_plan(plan: MovePlan, names: Optional[Sequence[str]] = None) -> str:
    T, S = plan.lost.shape
    name = (lambda i: names[i]) if names else str
    lines = [f"objective {plan.objective}"]
    for t in range(1, T + 1):
        for (i, j), c in sorted(plan.moves(t).items()):
            lines.append(f"z t={t} {name(i)}->{name(j)} {c}")
        for i in range(S):
            if plan.lost[t - 1, i]:
                lines.append(f"L t={t} {name(i)} {plan.lost[t - 1, i]}")
    return "\n".join(lines) + "\n"
