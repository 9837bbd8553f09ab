"""Tests for configs, arm generation, experiment runners, files, and the CLI."""

import json
import math

import numpy as np
import pytest

from logbandit.cli import run_cli
from logbandit.errors import ConfigError, SchemaError
from logbandit.harness import (
    BIAS_COLUMNS,
    REGRET_COLUMNS,
    TABLE1_COLUMNS,
    WARMUP_BENCH_COLUMNS,
    bias_experiment,
    config_from_dict,
    design_contrast_experiment,
    make_arms,
    pool_size,
    regret_experiment,
    run_experiment,
    standard_regret_config,
    table1_experiment,
    warmup_bench_experiment,
)
from logbandit.results import (
    SCHEMA_VERSION,
    format_value,
    read_json,
    read_table,
    write_json,
    write_table,
)


def _table1_cfg(**over):
    data = {
        "experiment": "table1",
        "arms": {"kind": "circle", "k": 4},
        "s": [1.0, 2.0],
        "delta": 0.1,
        "repeats": 2,
        "seed": 3,
    }
    data.update(over)
    return config_from_dict(data)


def _regret_cfg(**over):
    data = {
        "experiment": "regret",
        "arms": {"kind": "angles", "angles": [0.0, 2.094, 4.189]},
        "theta": [1.0, 0.0],
        "s": 1.0,
        "delta": 0.1,
        "t": 2000,
        "repeats": 2,
        "seed": 1,
        "policies": ["uniform", "etc"],
        "etc_m": 50,
    }
    data.update(over)
    return config_from_dict(data)


def _field_of(excinfo):
    return excinfo.value.field


def test_config_rejects_unknown_key_by_name():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"experiment": "bias", "s": 1.0, "wibble": 3})
    assert _field_of(exc) == "wibble"
    assert "wibble" in str(exc.value)


def test_config_delta_domain():
    for bad in (0.5, 0.0, -0.1):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"experiment": "bias", "s": 1.0, "delta": bad})
        assert _field_of(exc) == "delta"
    config_from_dict({"experiment": "bias", "s": 1.0, "delta": math.exp(-1.0)})


def test_config_per_kind_requirements():
    cases = [
        ({"experiment": "warp"}, "experiment"),
        ({"experiment": "table1", "s": [1.0]}, "arms"),
        ({"experiment": "table1", "arms": {"kind": "circle", "k": 3}, "s": 2.0}, "s"),
        ({"experiment": "table1", "arms": {"kind": "unit_sphere", "k": 3}, "s": [1.0]}, "d"),
        ({"experiment": "regret", "arms": {"kind": "circle", "k": 3},
          "theta": [1.0, 0.0], "s": 1.0}, "t"),
        ({"experiment": "regret", "arms": {"kind": "circle", "k": 3},
          "s": 1.0, "t": 100}, "theta"),
        ({"experiment": "regret", "arms": {"kind": "circle", "k": 3},
          "theta": [1.0, 0.0], "s": 1.0, "t": 100, "policies": ["ucb"]}, "policies"),
        ({"experiment": "bias"}, "s"),
        ({"experiment": "design", "arms": {"kind": "circle", "k": 3}}, "theta"),
        ({"experiment": "bias", "s": 1.0, "war": {"speed": 9}}, "war"),
        ({"experiment": "bias", "s": 1.0, "repeats": 0}, "repeats"),
    ]
    for data, fld in cases:
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert _field_of(exc) == fld, data


def test_config_arms_spec_errors():
    bad_specs = [
        {"kind": "hexagon", "k": 3},
        {"kind": "circle"},
        {"kind": "circle", "k": 0},
        {"kind": "angles"},
        {"kind": "angles", "angles": [0.0, 1.0], "radii": [0.5]},
        {"kind": "angles", "angles": [0.0, 1.0], "radii": [0.5, 1.5]},
        {"kind": "angles", "angles": [0.0], "extra": 1},
        {"kind": "file"},
    ]
    for spec in bad_specs:
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"experiment": "table1", "arms": spec, "s": [1.0]})
        assert _field_of(exc) == "arms", spec


def test_make_arms_circle_and_grid():
    circle = make_arms({"kind": "circle", "k": 8})
    ang = 2.0 * np.pi * np.arange(8) / 8
    assert circle.vectors == pytest.approx(np.column_stack([np.cos(ang), np.sin(ang)]))
    grid = make_arms({"kind": "grid", "k": 5, "lo": -1.0, "hi": 1.0})
    assert grid.vectors[:, 0] == pytest.approx(np.linspace(-1, 1, 5))
    assert grid.d == 1


def test_make_arms_angles_with_radii():
    arms = make_arms(
        {"kind": "angles", "angles": [0.0, np.pi / 2], "radii": [1.0, 0.5]}
    )
    assert arms.vectors == pytest.approx(np.array([[1.0, 0.0], [0.0, 0.5]]), abs=1e-12)


def test_make_arms_unit_sphere_needs_rng():
    spec = {"kind": "unit_sphere", "k": 10}
    with pytest.raises(ConfigError):
        make_arms(spec)
    a = make_arms(spec, d=3, rng=np.random.default_rng(5))
    b = make_arms(spec, d=3, rng=np.random.default_rng(5))
    assert np.linalg.norm(a.vectors, axis=1) == pytest.approx(np.ones(10))
    assert a.vectors == pytest.approx(b.vectors)


def test_make_arms_from_files(tmp_path):
    jpath = tmp_path / "arms.json"
    jpath.write_text(json.dumps([[1.0, 0.0], [0.0, 0.5]]))
    arms = make_arms({"kind": "file", "path": str(jpath)})
    assert arms.vectors == pytest.approx(np.array([[1.0, 0.0], [0.0, 0.5]]))
    cpath = tmp_path / "arms.csv"
    cpath.write_text("1.0,0.0\n0.0,0.5\n")
    arms = make_arms({"kind": "file", "path": str(cpath)})
    assert arms.vectors == pytest.approx(np.array([[1.0, 0.0], [0.0, 0.5]]))


def test_results_table_round_trip(tmp_path):
    rows = [
        {"name": "a", "x": 0.1, "n": 7, "flag": True},
        {"name": "b", "x": 1.0 / 3.0, "n": -2, "flag": False},
    ]
    path = write_table(tmp_path / "t.csv", ["name", "x", "n", "flag"], rows)
    text = path.read_text()
    assert text.startswith("# logbandit-schema %d\n" % SCHEMA_VERSION)
    assert "0.1," in text and "true" in text and "false" in text
    columns, back = read_table(path)
    assert columns == ["name", "x", "n", "flag"]
    assert back[0]["x"] == "0.1"
    assert float(back[1]["x"]) == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert format_value(0.1) == "0.1"


def test_results_reject_foreign_versions(tmp_path):
    path = write_table(tmp_path / "t.csv", ["a"], [{"a": 1}])
    bumped = path.read_text().replace(
        "schema %d" % SCHEMA_VERSION, "schema %d" % (SCHEMA_VERSION + 1)
    )
    path.write_text(bumped)
    with pytest.raises(SchemaError):
        read_table(path)
    path.write_text("no header\n1\n")
    with pytest.raises(SchemaError):
        read_table(path)
    jpath = write_json(tmp_path / "d.json", {"v": 1})
    doc = json.loads(jpath.read_text())
    assert doc["schema_version"] == SCHEMA_VERSION
    assert read_json(jpath)["v"] == 1
    doc["schema_version"] = SCHEMA_VERSION + 1
    jpath.write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        read_json(jpath)


def test_results_reject_ragged_rows(tmp_path):
    path = write_table(tmp_path / "t.csv", ["a", "b"], [{"a": 1, "b": 2}])
    path.write_text(path.read_text() + "3\n")
    with pytest.raises(SchemaError):
        read_table(path)


def test_pool_size_env(monkeypatch):
    monkeypatch.setenv("LOGBANDIT_THREADS", "3")
    assert pool_size() == 3
    monkeypatch.setenv("LOGBANDIT_THREADS", "0")
    assert pool_size() == 1
    monkeypatch.setenv("LOGBANDIT_THREADS", "many")
    with pytest.raises(ConfigError):
        pool_size()
    monkeypatch.delenv("LOGBANDIT_THREADS")
    assert pool_size() >= 1


def test_table1_rows_deterministic_across_pools(monkeypatch):
    cfg = _table1_cfg()
    monkeypatch.setenv("LOGBANDIT_THREADS", "1")
    serial = table1_experiment(cfg)
    monkeypatch.setenv("LOGBANDIT_THREADS", "2")
    pooled = table1_experiment(cfg)
    assert serial == pooled
    assert len(serial) == 3 * 2 * 2  # methods x S values x repeats
    assert [set(r) for r in serial] == [set(TABLE1_COLUMNS)] * len(serial)
    keys = [(r["method"], r["S"], r["repeat"]) for r in serial]
    assert keys == sorted(keys)
    for row in serial:
        if row["method"] in ("naive", "oracle"):
            assert row["samples_probing"] == 0.0
        assert row["total"] == row["samples_probing"] + row["samples_planning"]


def test_warmup_bench_rows(monkeypatch):
    monkeypatch.setenv("LOGBANDIT_THREADS", "1")
    cfg = _table1_cfg(s=[1.0], repeats=1)
    rows = warmup_bench_experiment(cfg)
    assert len(rows) == 3
    assert [set(r) for r in rows] == [set(WARMUP_BENCH_COLUMNS)] * 3
    by_method = {r["method"]: r for r in rows}
    assert set(by_method) == {"naive", "oracle", "war"}
    for row in rows:
        assert row["xi2"] > 0.0
        assert isinstance(row["satisfied"], bool)
    assert by_method["naive"]["satisfied"]


def test_bias_rows_schema():
    cfg = config_from_dict({"experiment": "bias", "s": 1.0, "delta": 0.1})
    rows = bias_experiment(cfg)
    assert [set(r) for r in rows] == [set(BIAS_COLUMNS)] * len(rows)
    mle_rows = [r for r in rows if r["estimator"] == "mle"]
    kt_rows = [r for r in rows if r["estimator"] == "kt"]
    assert len(mle_rows) == len(kt_rows) >= 5
    ns = [r["N"] for r in mle_rows]
    assert ns == sorted(ns) and len(set(ns)) == len(ns)
    assert ns == [r["N"] for r in kt_rows]
    for row in rows:
        assert math.isfinite(row["bias"]) and math.isfinite(row["normalized_bias"])


def test_design_contrast_payload():
    cfg = config_from_dict({
        "experiment": "design",
        "arms": {"kind": "circle", "k": 12},
        "theta": [2.0, 0.5],
    })
    payload, gsol, hsol, arms = design_contrast_experiment(cfg)
    assert len(arms) == 12
    for key in ("g", "h"):
        weights = payload[key]["weights"]
        assert sum(weights) == pytest.approx(1.0, abs=1e-9)
        assert payload[key]["objective"] > 0.0
    stats = payload["support_stats"]
    assert stats["g_support_size"] == len(stats["g_support"])
    assert stats["h_support_size"] == len(stats["h_support"])
    assert np.flatnonzero(np.asarray(payload["g"]["weights"]) > 0).tolist() == stats["g_support"]


def test_regret_experiment_rows_and_curves(monkeypatch):
    monkeypatch.setenv("LOGBANDIT_THREADS", "1")
    cfg = _regret_cfg()
    rows, curves = regret_experiment(cfg)
    assert set(curves) == {(p, r) for p in ("uniform", "etc") for r in (0, 1)}
    assert [set(r) for r in rows] == [set(REGRET_COLUMNS)] * len(rows)
    summaries = [r for r in rows if r["phase"] == "summary"]
    assert [(r["policy"], r["seed"]) for r in summaries] == [("uniform", -1), ("etc", -1)]
    for policy in ("uniform", "etc"):
        finals = []
        for rep in (0, 1):
            tt, cum = curves[(policy, rep)]
            assert tt[-1] == cfg.t
            assert np.all(np.diff(cum) >= -1e-12)
            assert len(tt) <= 1000
            finals.append(cum[-1])
            group = [r for r in rows
                     if r["policy"] == policy and r["seed"] == rep and r["phase"] != "summary"]
            assert len(group) == len(tt)
            assert group[-1]["t"] == cfg.t
            assert group[-1]["cum_regret"] == pytest.approx(finals[-1])
        summary = next(r for r in summaries if r["policy"] == policy)
        assert summary["cum_regret"] == pytest.approx(float(np.mean(finals)))
        assert summary["t"] == cfg.t


def test_regret_experiment_homer_truncates_cleanly(monkeypatch):
    monkeypatch.setenv("LOGBANDIT_THREADS", "1")
    cfg = _regret_cfg(policies=["homer"], repeats=1)
    rows, curves = regret_experiment(cfg)
    tt, cum = curves[("homer", 0)]
    assert tt[-1] == cfg.t
    assert np.all(np.diff(cum) >= -1e-12)


def test_standard_regret_config_is_valid():
    cfg = config_from_dict(standard_regret_config())
    assert cfg.experiment == "regret"
    assert cfg.t == 200000 and cfg.repeats == 30
    arms = make_arms(cfg.arms)
    assert len(arms) == 10 and arms.d == 2
    means = 1.0 / (1.0 + np.exp(-(arms.vectors @ np.asarray(cfg.theta))))
    assert int(np.argmax(means)) == 0
    gaps = np.sort(means.max() - means)
    assert 0.08 < gaps[1] < 0.15  # one close runner-up


def test_run_experiment_writes_tables_and_figures(tmp_path, monkeypatch):
    monkeypatch.setenv("LOGBANDIT_THREADS", "1")
    cfg = config_from_dict({
        "experiment": "bias", "s": 1.0, "delta": 0.1, "out": str(tmp_path / "b")
    })
    written = run_experiment(cfg)
    names = {p.name for p in written}
    assert names == {"bias.csv", "bias.png"}
    for p in written:
        assert p.exists() and p.stat().st_size > 0
    columns, rows = read_table(tmp_path / "b" / "bias.csv")
    assert columns == BIAS_COLUMNS and rows

    cfg = config_from_dict({
        "experiment": "design",
        "arms": {"kind": "circle", "k": 10},
        "theta": [1.5, 0.0],
        "out": str(tmp_path / "d"),
    })
    written = run_experiment(cfg)
    assert {p.name for p in written} == {"design_contrast.json", "design_contrast.png"}
    doc = read_json(tmp_path / "d" / "design_contrast.json")
    assert {"instance", "g", "h", "support_stats"} <= set(doc)

    cfg = _regret_cfg(repeats=1, t=600, out=str(tmp_path / "r"))
    written = run_experiment(cfg)
    assert {p.name for p in written} == {"regret.csv", "regret.png"}

    cfg = _table1_cfg(repeats=1, s=[1.0], out=str(tmp_path / "t"))
    written = run_experiment(cfg)
    assert {p.name for p in written} == {"table1.csv", "table1.png"}
    # the same config doubles as a simulated bench under the other command
    cfg = _table1_cfg(repeats=1, s=[1.0], out=str(tmp_path / "w"))
    written = run_experiment(cfg, command="warmup-bench")
    assert {p.name for p in written} == {"warmup_bench.csv", "warmup_bench.png"}


def test_run_experiment_rejects_mismatched_command(tmp_path):
    cfg = config_from_dict({
        "experiment": "bias", "s": 1.0, "delta": 0.1, "out": str(tmp_path)
    })
    with pytest.raises(ConfigError):
        run_experiment(cfg, command="regret")


def test_cli_missing_config_is_exit_3(capsys):
    assert run_cli(["table1"]) == 3
    assert "config" in capsys.readouterr().err


def test_cli_usage_error_is_exit_2():
    assert run_cli([]) == 2


def test_cli_bad_config_file_is_exit_3(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert run_cli(["bias", "--config", str(path)]) == 3
    path.write_text(json.dumps({"experiment": "zap"}))
    assert run_cli(["bias", "--config", str(path)]) == 3
    capsys.readouterr()


def test_cli_design_flags_run_end_to_end(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LOGBANDIT_THREADS", "1")
    code = run_cli([
        "design", "--arms", "circle12", "--theta", "1.5,0", "--out", str(tmp_path)
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "design_contrast.json" in out
    doc = read_json(tmp_path / "design_contrast.json")
    assert doc["g"]["objective"] > 0.0
    assert (tmp_path / "design_contrast.png").exists()


def test_cli_wrong_subcommand_for_config_is_exit_3(tmp_path, capsys):
    path = tmp_path / "bias.json"
    path.write_text(json.dumps({"experiment": "bias", "s": 1.0, "delta": 0.1,
                                "out": str(tmp_path)}))
    assert run_cli(["regret", "--config", str(path)]) == 3
    capsys.readouterr()
