import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from flowcore import SchedulingInstance  # noqa: E402
from topology import build_topology, path_topology, ring_topology  # noqa: E402

CORRIDOR = ROOT / "data" / "topology" / "corridor.txt"


@pytest.fixture
def path3():
    return path_topology(3)


@pytest.fixture
def ring4():
    return ring_topology(4)


def random_topology(rng, n):
    """Random connected-or-not graph on n stations."""
    names = [f"S{i}" for i in range(n)]
    links = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5]
    return build_topology(names, links)


def random_instance(rng, max_stations=4, max_T=4, max_batteries=3, max_demand=3, max_fixed=2):
    n = int(rng.integers(1, max_stations + 1))
    topo = random_topology(rng, n)
    T = int(rng.integers(1, max_T + 1))
    Q = [0] * n
    for _ in range(int(rng.integers(0, max_batteries + 1))):
        Q[int(rng.integers(0, n))] += 1
    F = rng.integers(0, max_fixed + 1, n)
    D = rng.integers(0, max_demand + 1, (T, n))
    return SchedulingInstance(topo=topo, T=T, Q=tuple(Q), F=tuple(F), D=D)


@pytest.fixture
def instance_factory():
    return random_instance


@pytest.fixture
def write_config(tmp_path):
    """Write a YAML config into tmp_path pointing at the shipped corridor network."""

    def _write(**sections):
        raw = {"topology": {"path": str(CORRIDOR)}, "output": {"dir": str(tmp_path / "out")}}
        for name, values in sections.items():
            raw.setdefault(name, {}).update(values)
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(raw, sort_keys=False), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
