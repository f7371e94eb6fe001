#!/usr/bin/env python3
"""
Experiment configuration: one YAML file with sections, plus command-line overrides.

Relative paths resolve against the config file's directory. The output directory
comes from the config, else $BSS_OUTPUT_DIR, else data/clean.
"""

import copy
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import yaml

from allocation import FleetConfig
from errors import BSSError, ConfigError
from forecast import ForecasterSpec
from scheduler import PolicyConfig
from traffic import SeasonalitySpec

OUTPUT_ENV = "BSS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = Path("data/clean")
SWEEP_AXES = ("inventory", "horizon", "mobile_ratio", "shift")

DEFAULTS = {
    "topology": {"path": None},
    "traffic": {
        "source": "synthetic",     # synthetic | csv
        "kind": "station",         # station | edge
        "csv_path": None,
        "swap_rate": 0.5,
        "days": 9,
        "warmup_days": 7,
        "seed": 0,
        "seasonality": {},
        "shift_hours": 0,
        "shift_fraction": 0.3,
    },
    "fleet": {
        "inventory_level": 0.75,
        "mobile_ratio": 0.3,
        "allocation_horizon": None,
        "allocation_forecaster": {"kind": "oracle"},
    },
    "policy": {
        "h": 6,
        "forecaster": {"kind": "noisy-oracle", "noise": 0.15},
    },
    "simulation": {"start_hour": None, "hours": 48},
    "experiments": {
        "seeds": 20,
        "workers": 1,
        "policies": {
            "oracle": {"kind": "oracle"},
            "noisy-oracle": {"kind": "noisy-oracle", "noise": 0.15},
            "seasonal-naive": {"kind": "seasonal-naive"},
        },
        "sweeps": {
            "inventory": [0.6, 0.75, 0.9],
            "horizon": [1, 2, 3, 4, 5, 6],
            "mobile_ratio": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            "shift": [0, 4, 8],
        },
    },
    "output": {"dir": None},
}

# sections whose values are free-form mappings rather than fixed keys
_OPEN_KEYS = {("traffic", "seasonality"), ("fleet", "allocation_forecaster"), ("policy", "forecaster"),
              ("experiments", "policies"), ("experiments", "sweeps")}


@dataclass(frozen=True)
class TrafficConfig:
    source: str = "synthetic"
    kind: str = "station"
    csv_path: Optional[Path] = None
    swap_rate: float = 0.5
    days: int = 9
    warmup_days: int = 7
    seed: int = 0
    seasonality: SeasonalitySpec = field(default_factory=SeasonalitySpec)
    shift_hours: int = 0
    shift_fraction: float = 0.3


@dataclass(frozen=True)
class RunConfig:
    topology_path: Path
    traffic: TrafficConfig
    fleet: FleetConfig
    allocation_horizon: Optional[int]
    allocation_forecaster: ForecasterSpec
    policy: PolicyConfig
    start_hour: int
    hours: int
    seeds: Tuple[int, ...]
    workers: int
    policies: Tuple[Tuple[str, ForecasterSpec], ...]
    sweeps: Tuple[Tuple[str, Tuple[float, ...]], ...]
    output_dir: Path

    @property
    def allocation_T(self) -> int:
        return self.allocation_horizon or self.policy.h

    def sweep_values(self, axis: str) -> Tuple[float, ...]:
        return dict(self.sweeps).get(axis, ())


def _merge(base: dict, extra: dict, path: Tuple[str, ...] = ()) -> dict:
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        where = path + (key,)
        if path and path[:2] in _OPEN_KEYS or where in _OPEN_KEYS:
            out[key] = copy.deepcopy(value)
            continue
        if key not in base:
            raise ConfigError(f"unknown config key {'.'.join(where)!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {'.'.join(where)!r} must be a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _spec_from(raw, where: str) -> ForecasterSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a mapping with a 'kind'")
    known = {f.name for f in fields(ForecasterSpec)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{where}: unknown forecaster keys {sorted(unknown)}")
    spec = ForecasterSpec(**raw)
    try:
        spec.validate()
    except BSSError as e:
        raise ConfigError(f"{where}: {e}") from None
    return spec


def _seasonality_from(raw: dict) -> SeasonalitySpec:
    known = {f.name for f in fields(SeasonalitySpec)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"traffic.seasonality: unknown keys {sorted(unknown)}")
    if "peak_hours" in raw:
        raw = dict(raw, peak_hours=tuple(float(x) for x in raw["peak_hours"]))
    params = SeasonalitySpec(**raw)
    try:
        params.validate()
    except BSSError as e:
        raise ConfigError(f"traffic.seasonality: {e}") from None
    return params


def _resolve(path, base_dir: Path) -> Optional[Path]:
    if path is None:
        return None
    path = Path(path)
    return path if path.is_absolute() else (base_dir / path)


def _seeds(raw) -> Tuple[int, ...]:
    if isinstance(raw, int):
        if raw < 1:
            raise ConfigError(f"experiments.seeds must be >= 1, got {raw}")
        return tuple(range(raw))
    seeds = tuple(int(s) for s in raw)
    if not seeds or min(seeds) < 0:
        raise ConfigError("experiments.seeds must be a count or a non-empty list of non-negative ints")
    return seeds


def build_config(raw: dict, base_dir: Path = Path("."), output_dir: Optional[Path] = None) -> RunConfig:
    cfg = _merge(DEFAULTS, raw or {})
    t, fl, po, sim, ex = cfg["traffic"], cfg["fleet"], cfg["policy"], cfg["simulation"], cfg["experiments"]

    topology_path = _resolve(cfg["topology"]["path"], base_dir)
    if topology_path is None:
        raise ConfigError("topology.path is required")
    if not topology_path.exists():
        raise ConfigError(f"topology file not found: {topology_path}")

    if t["source"] not in ("synthetic", "csv"):
        raise ConfigError(f"traffic.source must be 'synthetic' or 'csv', got {t['source']!r}")
    if t["kind"] not in ("station", "edge"):
        raise ConfigError(f"traffic.kind must be 'station' or 'edge', got {t['kind']!r}")
    csv_path = _resolve(t["csv_path"], base_dir)
    if t["source"] == "csv" and (csv_path is None or not csv_path.exists()):
        raise ConfigError(f"traffic csv not found: {csv_path}")
    if not 0.0 <= float(t["swap_rate"]) <= 1.0:
        raise ConfigError(f"traffic.swap_rate must be in [0, 1], got {t['swap_rate']}")
    if int(t["days"]) < 1 or not 0 <= int(t["warmup_days"]) < int(t["days"]):
        raise ConfigError("traffic.days must be >= 1 and warmup_days in [0, days)")
    if not 0 <= int(t["shift_hours"]) <= 23 or not 0.0 <= float(t["shift_fraction"]) <= 1.0:
        raise ConfigError("traffic.shift_hours must be in 0..23 and shift_fraction in [0, 1]")
    traffic = TrafficConfig(
        source=t["source"], kind=t["kind"], csv_path=csv_path, swap_rate=float(t["swap_rate"]),
        days=int(t["days"]), warmup_days=int(t["warmup_days"]), seed=int(t["seed"]),
        seasonality=_seasonality_from(t["seasonality"] or {}),
        shift_hours=int(t["shift_hours"]), shift_fraction=float(t["shift_fraction"]),
    )

    fleet = FleetConfig(inventory_level=float(fl["inventory_level"]), mobile_ratio=float(fl["mobile_ratio"]))
    fleet.validate()
    policy = PolicyConfig(h=int(po["h"]), forecaster=_spec_from(po["forecaster"], "policy.forecaster"))
    policy.validate()
    allocation_horizon = fl["allocation_horizon"]
    if allocation_horizon is not None and not 1 <= int(allocation_horizon) <= 24:
        raise ConfigError(f"fleet.allocation_horizon must be in 1..24, got {allocation_horizon}")

    hours = int(sim["hours"])
    start_hour = int(sim["start_hour"]) if sim["start_hour"] is not None else 24 * traffic.warmup_days
    if hours < 1 or start_hour < 0:
        raise ConfigError("simulation.hours must be >= 1 and start_hour >= 0")
    if traffic.source == "synthetic" and start_hour + hours > 24 * traffic.days:
        raise ConfigError(f"simulation needs {start_hour + hours} hours, traffic.days gives {24 * traffic.days}")

    policies = tuple((str(name), _spec_from(spec, f"experiments.policies.{name}"))
                     for name, spec in (ex["policies"] or {}).items())
    if not policies:
        raise ConfigError("experiments.policies must name at least one forecasting policy")
    if any(name == "hindsight" for name, _ in policies):
        raise ConfigError("'hindsight' is reserved for the hindsight optimum")
    allocation_forecaster = _spec_from(fl["allocation_forecaster"], "fleet.allocation_forecaster")
    forecasters = [("policy.forecaster", policy.forecaster),
                   ("fleet.allocation_forecaster", allocation_forecaster)]
    forecasters += [(f"experiments.policies.{name}", spec) for name, spec in policies]
    for where, spec in forecasters:
        if start_hour < spec.min_history:
            raise ConfigError(f"{where}: {spec.kind} needs {spec.min_history} hours of history before "
                              f"the simulation starts, start_hour is {start_hour} (raise traffic.warmup_days)")
    sweeps = []
    for axis, values in (ex["sweeps"] or {}).items():
        if axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
        sweeps.append((axis, tuple(values or ())))
    workers = int(ex["workers"])
    if workers < 1:
        raise ConfigError(f"experiments.workers must be >= 1, got {workers}")

    if output_dir is None:
        output_dir = _resolve(cfg["output"]["dir"], base_dir) if cfg["output"]["dir"] else None
    if output_dir is None:
        output_dir = Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR)

    return RunConfig(
        topology_path=topology_path, traffic=traffic, fleet=fleet,
        allocation_horizon=int(allocation_horizon) if allocation_horizon is not None else None,
        allocation_forecaster=allocation_forecaster,
        policy=policy, start_hour=start_hour, hours=hours, seeds=_seeds(ex["seeds"]),
        workers=workers, policies=policies, sweeps=tuple(sweeps), output_dir=Path(output_dir),
    )


def parse_overrides(items: Iterable[str]) -> dict:
    """Turn ['policy.h=3', 'fleet.mobile_ratio=0.5'] into a nested mapping (values YAML-typed)."""
    out: Dict = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if len(parts) < 2:
            raise ConfigError(f"override key needs a section, got {key!r}")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = yaml.safe_load(value)
    return out


# an overridden policy table replaces the file's table
def _deep_update(base: dict, extra: dict, path: Tuple[str, ...] = ()) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and path + (k,) != ("experiments", "policies"):
            out[k] = _deep_update(out[k], v, path + (k,))
        else:
            out[k] = v
    return out


def load_config(path, overrides: Iterable[str] = (), output_dir: Optional[Path] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping of sections")
    raw = _deep_update(raw, parse_overrides(overrides))
    return build_config(raw, base_dir=path.resolve().parent, output_dir=output_dir)
