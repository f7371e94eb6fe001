import json
import math

import numpy as np
import pandas as pd
import pytest

from config import load_config
from errors import ConfigError
from experiments import (HINDSIGHT, RESULT_COLUMNS, SweepSpec, build_scenario, combine_forecast_errors,
                         plan_sweep, plot_data, run_sweep, summarize_results, sweep_from_config,
                         t_interval, write_sweep_outputs)
from forecast import ForecastWindow, error_sums, forecast_errors
from topology import load_topology
from traffic import (ShiftSpec, TrafficSeries, apply_shift, edge_to_station_demand, generate_synthetic_edges,
                     select_shift_stations)

SMALL = dict(
    traffic={"days": 2, "warmup_days": 1},
    simulation={"hours": 6},
    policy={"h": 3},
    experiments={"seeds": 2, "policies": {"oracle": {"kind": "oracle"},
                                          "seasonal-naive": {"kind": "seasonal-naive"}}},
)


@pytest.fixture
def small_cfg(write_config):
    return load_config(write_config(**SMALL))


def test_sweep_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec("horizon", (), (0,)).validate()
    with pytest.raises(ConfigError):
        SweepSpec("horizon", (7,), (0,)).validate()
    with pytest.raises(ConfigError):
        SweepSpec("horizon", (1.5,), (0,)).validate()
    with pytest.raises(ConfigError):
        SweepSpec("inventory", (0.0,), (0,)).validate()
    with pytest.raises(ConfigError):
        SweepSpec("shift", (24,), (0,)).validate()
    with pytest.raises(ConfigError):
        SweepSpec("mobile_ratio", (0.5,), ()).validate()
    with pytest.raises(ConfigError):
        SweepSpec("weather", (1,), (0,)).validate()


def test_plan_sweep_order():
    assert plan_sweep(SweepSpec("inventory", (0.6, 0.9), (0, 1))) == [(0.6, 0), (0.6, 1), (0.9, 0), (0.9, 1)]


def test_sweep_from_config_defaults(small_cfg):
    spec = sweep_from_config(small_cfg, "horizon")
    assert spec.values == (1, 2, 3, 4, 5, 6)
    assert spec.seeds == (0, 1)
    with pytest.raises(ConfigError):
        sweep_from_config(small_cfg, "horizon", values=[])


def test_scenario_split_seven_to_three(small_cfg):
    topo = load_topology(small_cfg.topology_path)
    scenario = build_scenario(small_cfg, topo, seed=0)
    fleet = scenario.fleet
    avg = scenario.demand.values[24:30].mean(axis=0)
    assert fleet.total == int(np.floor(0.75 * avg.sum() + 0.5))
    assert abs(fleet.mobile - 0.3 * fleet.total) <= 0.5
    assert fleet.mobile + fleet.fixed_total == fleet.total
    assert sum(scenario.Q_init) == fleet.mobile
    assert sum(fleet.F) == fleet.fixed_total


def test_shift_changes_only_selected_stations(small_cfg):
    topo = load_topology(small_cfg.topology_path)
    plain = build_scenario(small_cfg, topo, seed=1)
    shifted = build_scenario(small_cfg, topo, seed=1, shift_hours=4)
    assert len(shifted.shifted) == 3
    changed = {i for i in range(topo.station_count)
               if not np.array_equal(plain.demand.values[:, i], shifted.demand.values[:, i])}
    assert changed <= set(shifted.shifted)


def test_inventory_sweep_rows(small_cfg):
    spec = SweepSpec("inventory", (0.6, 0.75, 0.9), (0, 1))
    results, errors = run_sweep(spec, small_cfg, progress=False)
    assert list(results.columns) == RESULT_COLUMNS
    # hindsight plus two policies, per value per seed
    assert len(results) == 3 * 2 * 3
    counts = results.groupby(["axis_value", "policy"]).size()
    assert (counts == 2).all()
    assert set(errors) == {"oracle", "seasonal-naive"}
    assert (errors["oracle"]["rmse"] == 0).all()


def test_hindsight_is_constant_across_horizon(small_cfg):
    spec = SweepSpec("horizon", (1, 2, 3), (0, 1))
    results, _ = run_sweep(spec, small_cfg, progress=False)
    hindsight = results[results["policy"] == HINDSIGHT]
    assert (hindsight.groupby("seed")["total_lost"].nunique() == 1).all()
    merged = results.merge(hindsight[["axis_value", "seed", "total_lost"]], on=["axis_value", "seed"],
                           suffixes=("", "_hindsight"))
    assert (merged["total_lost"] >= merged["total_lost_hindsight"]).all()


def test_sweep_is_deterministic_and_worker_independent(small_cfg, tmp_path):
    spec = SweepSpec("mobile_ratio", (0.0, 0.3), (0, 1))
    first, err1 = run_sweep(spec, small_cfg, workers=1, progress=False)
    second, err2 = run_sweep(spec, small_cfg, workers=2, progress=False)
    pd.testing.assert_frame_equal(first, second)
    a = write_sweep_outputs("mobile_ratio", first, err1, tmp_path / "a")
    b = write_sweep_outputs("mobile_ratio", second, err2, tmp_path / "b")
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[1].read_bytes() == b[1].read_bytes()
    payload = json.loads(a[1].read_text())
    assert payload["axis"] == "mobile_ratio"
    assert payload["values"] == [0.0, 0.3]
    assert set(payload["policies"]) == {HINDSIGHT, "oracle", "seasonal-naive"}


def test_t_interval_by_hand():
    stats = t_interval(pd.Series([1.0, 2.0, 3.0]))
    assert stats["mean"] == pytest.approx(2.0)
    assert stats["std"] == pytest.approx(1.0)
    # t(0.975, 2) = 4.302653
    assert stats["ci_hi"] - stats["mean"] == pytest.approx(4.302653 / math.sqrt(3), rel=1e-5)
    single = t_interval(pd.Series([0.4]))
    assert single["n"] == 1 and single["ci_lo"] == single["ci_hi"] == 0.4


def test_summarize_results_excludes_infinite_relatives():
    results = pd.DataFrame([
        {"axis_value": 1, "policy": "p", "seed": 0, "total_demand": 10, "total_lost": 2, "lost_ratio": 0.2,
         "relative_to_oracle": 2.0},
        {"axis_value": 1, "policy": "p", "seed": 1, "total_demand": 10, "total_lost": 1, "lost_ratio": 0.1,
         "relative_to_oracle": math.inf},
    ])
    row = summarize_results(results).iloc[0]
    assert row["mean_lost_ratio"] == pytest.approx(0.15)
    assert row["mean_relative"] == 2.0
    assert row["n_infinite"] == 1
    data = plot_data("horizon", summarize_results(results), {})
    assert data["policies"]["p"]["std_relative"] == [None]


def test_combined_errors_equal_pooled_errors():
    actual = TrafficSeries(np.array([[2.0, 1.0], [4.0, 3.0], [6.0, 5.0]]))
    w1 = [ForecastWindow(0, np.array([[3.0, 1.0], [4.0, 2.0]]))]
    w2 = [ForecastWindow(1, np.array([[1.0, 1.0], [6.0, 9.0]]))]
    combined = combine_forecast_errors([error_sums(w1, actual), error_sums(w2, actual)])
    pooled = forecast_errors(w1 + w2, actual)
    pd.testing.assert_frame_equal(combined, pooled, check_dtype=False)


def test_edge_shift_moves_links_before_conversion(write_config):
    cfg = load_config(write_config(**{**SMALL, "traffic": {"days": 2, "warmup_days": 1, "kind": "edge"}}))
    topo = load_topology(cfg.topology_path)
    seed, t = 1, cfg.traffic
    shifted = build_scenario(cfg, topo, seed, shift_hours=4)
    plain = build_scenario(cfg, topo, seed, shift_hours=0)

    picked = select_shift_stations(topo, t.shift_fraction, t.seed + seed)
    assert shifted.shifted == picked
    edges = generate_synthetic_edges(topo, t.days, t.seed + seed, t.seasonality)
    expected = edge_to_station_demand(apply_shift(edges, ShiftSpec(picked, 4), topo), topo, t.swap_rate)
    assert np.array_equal(shifted.demand.values, expected.values)

    changed = {int(i) for i in np.flatnonzero((shifted.demand.values != plain.demand.values).any(axis=0))}
    touched = set(picked) | {j for i in picked for j in topo.adjacency[i]}
    assert changed <= touched
    assert changed - set(picked)
