#!/usr/bin/env python3
"""
Station network: service areas as nodes, highway links as undirected edges.

Topology file format: UTF-8 text, one link per line as "name1,name2" (a
dash-separated "A-B" is accepted too), '#' starts a comment line. Station ids
are assigned in order of first appearance.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, List, Sequence, Tuple

import networkx as nx

from errors import TopologyError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Topology:
    names: Tuple[str, ...]
    adjacency: Tuple[FrozenSet[int], ...]
    # undirected links (i < j) in order of first appearance in the source
    links: Tuple[Tuple[int, int], ...] = ()

    @property
    def station_count(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise TopologyError(f"unknown station {name!r}") from None

    def incident_links(self, i: int) -> List[int]:
        """Indices into `links` of every link touching station i."""
        return [k for k, (a, b) in enumerate(self.links) if i in (a, b)]


def neighbors(topo: Topology, i: int) -> FrozenSet[int]:
    """N(i): stations one link away from i (never i itself)."""
    if not 0 <= i < topo.station_count:
        raise TopologyError(f"station id {i} out of range 0..{topo.station_count - 1}")
    return topo.adjacency[i]


def to_graph(topo: Topology) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(topo.station_count))
    graph.add_edges_from((i, j) for i in range(topo.station_count) for j in topo.adjacency[i])
    return graph


def connected_components(topo: Topology) -> List[List[int]]:
    """Station ids of each component, sorted, components ordered by their lowest id."""
    return sorted((sorted(c) for c in nx.connected_components(to_graph(topo))), key=lambda c: c[0])


def build_topology(names: Sequence[str], links: Sequence[Tuple[int, int]]) -> Topology:
    """
    Build a validated Topology from station names and index pairs.

    Links are symmetrised and de-duplicated; a self-loop or an index outside the
    name range is rejected. A disconnected network is allowed but logged.
    """
    names = tuple(names)
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise TopologyError(f"duplicate station name {dup!r}")

    n = len(names)
    adjacency: List[set] = [set() for _ in range(n)]
    ordered: List[Tuple[int, int]] = []
    for a, b in links:
        if not (0 <= a < n and 0 <= b < n):
            raise TopologyError(f"neighbor index out of range in link ({a}, {b})")
        if a == b:
            raise TopologyError(f"explicit self-loop at station {names[a]!r}")
        key = (min(a, b), max(a, b))
        if b not in adjacency[a]:
            ordered.append(key)
        adjacency[a].add(b)
        adjacency[b].add(a)

    topo = Topology(
        names=names,
        adjacency=tuple(frozenset(s) for s in adjacency),
        links=tuple(ordered),
    )
    components = connected_components(topo)
    if len(components) > 1:
        logger.warning("Topology is disconnected: %d components (no flow crosses them)",
                       len(components))
    return topo


def _split_link(line: str) -> Tuple[str, str]:
    sep = "," if "," in line else "-"
    parts = [p.strip() for p in line.split(sep)]
    if len(parts) != 2 or not all(parts):
        raise ValueError(f"expected 'name1,name2', got {line!r}")
    return parts[0], parts[1]


def parse_topology(text: str) -> Topology:
    names: List[str] = []
    index: Dict[str, int] = {}
    links: List[Tuple[int, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            a, b = _split_link(line)
        except ValueError as e:
            raise TopologyError(str(e), line=lineno) from None
        if a == b:
            raise TopologyError(f"explicit self-loop {a}-{b} rejected", line=lineno)
        for name in (a, b):
            if name not in index:
                index[name] = len(names)
                names.append(name)
        links.append((index[a], index[b]))

    if not names:
        raise TopologyError("topology file lists no links")
    return build_topology(names, links)


def load_topology(path) -> Topology:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Topology file not found: {path}")
    topo = parse_topology(path.read_text(encoding="utf-8"))
    logger.info("Loaded topology: %d stations, %d links (%s)",
                topo.station_count, len(topo.links), path)
    return topo


def format_topology(topo: Topology) -> str:
    """Serialise to the edge-list format; isolated stations cannot be expressed."""
    lines = ["# station network: one undirected link per line"]
    lines += [f"{topo.names[a]},{topo.names[b]}" for a, b in topo.links]
    return "\n".join(lines) + "\n"


def save_topology(topo: Topology, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_topology(topo), encoding="utf-8")
    return path


def ring_topology(n: int, prefix: str = "S") -> Topology:
    names = [f"{prefix}{i}" for i in range(n)]
    return build_topology(names, [(i, (i + 1) % n) for i in range(n)])


def path_topology(n: int, prefix: str = "S") -> Topology:
    names = [f"{prefix}{i}" for i in range(n)]
    return build_topology(names, [(i, i + 1) for i in range(n - 1)])
