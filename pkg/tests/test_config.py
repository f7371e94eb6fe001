from pathlib import Path

import pytest

from config import DEFAULT_OUTPUT_DIR, OUTPUT_ENV, load_config, parse_overrides
from errors import ConfigError

DEFAULT = Path(__file__).resolve().parent.parent / "config" / "default.yaml"


def test_default_config_loads(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    cfg = load_config(DEFAULT)
    assert cfg.topology_path.exists()
    assert cfg.start_hour == 24 * cfg.traffic.warmup_days
    assert cfg.policy.h == 6 and cfg.allocation_T == 6
    assert cfg.seeds == tuple(range(20))
    assert [name for name, _ in cfg.policies][:2] == ["oracle", "noisy-oracle"]
    assert cfg.sweep_values("horizon") == (1, 2, 3, 4, 5, 6)
    assert cfg.output_dir == DEFAULT_OUTPUT_DIR


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env-out"))
    assert load_config(DEFAULT).output_dir == tmp_path / "env-out"
    assert load_config(DEFAULT, output_dir=tmp_path / "flag").output_dir == tmp_path / "flag"


def test_overrides_are_yaml_typed():
    cfg = load_config(DEFAULT, overrides=["policy.h=3", "fleet.mobile_ratio=0.5",
                                          "traffic.seasonality.noise=0", "experiments.seeds=[4, 5]"])
    assert cfg.policy.h == 3
    assert cfg.fleet.mobile_ratio == 0.5
    assert cfg.traffic.seasonality.noise == 0
    assert cfg.traffic.seasonality.base_mean == 10.0
    assert cfg.seeds == (4, 5)


def test_parse_overrides_nesting():
    assert parse_overrides(["a.b.c=1", "a.d=x"]) == {"a": {"b": {"c": 1}, "d": "x"}}
    with pytest.raises(ConfigError):
        parse_overrides(["policy.h"])
    with pytest.raises(ConfigError):
        parse_overrides(["h=3"])


def test_unknown_key_rejected(write_config):
    with pytest.raises(ConfigError, match="policy.horizon"):
        load_config(write_config(policy={"horizon": 3}))
    with pytest.raises(ConfigError, match="seasonality"):
        load_config(write_config(traffic={"seasonality": {"peaks": 2}}))


def test_relative_topology_path_resolves_against_config(tmp_path):
    (tmp_path / "nets").mkdir()
    (tmp_path / "nets" / "line.txt").write_text("A,B\nB,C\n", encoding="utf-8")
    path = tmp_path / "cfg.yaml"
    path.write_text("topology:\n  path: nets/line.txt\n", encoding="utf-8")
    assert load_config(path).topology_path == tmp_path / "nets" / "line.txt"


def test_missing_topology_names_the_path(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("topology:\n  path: nowhere.txt\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="nowhere.txt"):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize("section,values", [
    ("fleet", {"inventory_level": 2.0}),
    ("fleet", {"mobile_ratio": -0.5}),
    ("policy", {"h": 0}),
    ("traffic", {"swap_rate": 1.5}),
    ("traffic", {"days": 2, "warmup_days": 2}),
    ("traffic", {"shift_hours": 24}),
    ("simulation", {"hours": 0}),
    ("simulation", {"hours": 72}),
    ("policy", {"forecaster": {"kind": "noisy-oracle", "noise": -1}}),
    ("experiments", {"workers": 0}),
    ("experiments", {"seeds": 0}),
    ("experiments", {"policies": {"hindsight": {"kind": "oracle"}}}),
    ("experiments", {"sweeps": {"temperature": [1]}}),
])
def test_out_of_range_values_rejected(write_config, section, values):
    with pytest.raises(ConfigError):
        load_config(write_config(**{section: values}))


def test_csv_source_requires_file(write_config, tmp_path):
    with pytest.raises(ConfigError, match="csv"):
        load_config(write_config(traffic={"source": "csv", "csv_path": str(tmp_path / "none.csv")}))


def test_policy_override_replaces_table():
    cfg = load_config(DEFAULT, overrides=["experiments.policies={naive: {kind: persistence}}"])
    assert [name for name, _ in cfg.policies] == ["naive"]
    assert cfg.policies[0][1].kind == "persistence"


def test_no_warmup_rejects_history_based_policies(write_config):
    with pytest.raises(ConfigError, match="seasonal-naive needs 1 hours of history"):
        load_config(write_config(traffic={"days": 1, "warmup_days": 0}, simulation={"hours": 6}))


def test_no_warmup_is_fine_for_oracles(write_config):
    cfg = load_config(write_config(traffic={"days": 1, "warmup_days": 0}, simulation={"hours": 6},
                                   experiments={"policies": {"oracle": {"kind": "oracle"}}}))
    assert cfg.start_hour == 0


def test_historical_average_needs_a_full_period(write_config):
    with pytest.raises(ConfigError, match="historical-average needs 24 hours"):
        load_config(write_config(traffic={"days": 2, "warmup_days": 1},
                                 simulation={"start_hour": 12, "hours": 6},
                                 experiments={"policies": {"average": {"kind": "historical-average"}}}))
