# tests/test_sweep.py

import json
import math

import numpy as np
import pytest

from photon_postselect.config.models import (
    SweepConfig,
    load_custom_state,
    make_grid,
    parse_detectors,
    parse_grid,
    parse_models,
    parse_state,
    pdc_r,
)
from photon_postselect.config.presets import BASE_CONFIG, PRESETS, get_preset_config
from photon_postselect.core.states import FieldStateSpec, thermal_distribution
from photon_postselect.core.subtract import BeamSplitterParams, subtract_exact
from photon_postselect.core.sweep_runner import (
    SWEEP_COLUMNS,
    evaluate_record,
    evaluate_rows,
    find_crossovers,
    run_sweep,
    table_to_csv,
    table_to_json,
    write_table,
)
from photon_postselect.core.utils import ConfigError
from tests.conftest import detector, rel


def _config(preset=None, **overrides):
    config = get_preset_config(preset)
    config.update(overrides)
    return SweepConfig.from_config(config)


# --- parsing ---

@pytest.mark.parametrize("text, kind", [
    ("coherent:2", "coherent"),
    ("thermal:0.5", "thermal"),
    ("mixed:0.2,0.8", "mixed_light"),
    ("fock:3", "fock"),
])
def test_parse_state(text, kind):
    assert parse_state(text).kind == kind


def test_parse_mixed_state_fills_total():
    spec = parse_state("mixed:10,1")
    assert (spec.n_c, spec.n_t, spec.n0) == (10.0, 1.0, 11.0)


@pytest.mark.parametrize("text", ["thermal", "squeezed:1", "mixed:1", "thermal:abc", "fock:1.5"])
def test_parse_state_rejects(text):
    with pytest.raises(ConfigError):
        parse_state(text)


def test_custom_state_round_trip(tmp_path):
    bs = BeamSplitterParams.from_reflectivity(0.1)
    record = subtract_exact(thermal_distribution(1.0), bs, detector("n:1"))
    path = tmp_path / "posterior.json"
    path.write_text(json.dumps({"posterior": record.posterior.to_dict()}))
    spec = parse_state(f"custom:{path}")
    assert spec.kind == "custom"
    np.testing.assert_array_equal(np.array(spec.custom_probs), record.posterior.probs)


def test_custom_state_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_custom_state(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_custom_state(str(bad))
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    with pytest.raises(ConfigError):
        load_custom_state(str(empty))


def test_parse_detectors_and_models():
    assert [d.label for d in parse_detectors("n:1,r:2")] == ["n:1", "r:2"]
    assert [d.label for d in parse_detectors(["r:1"])] == ["r:1"]
    assert parse_models("exact, E") == ["exact", "E"]
    with pytest.raises(ConfigError):
        parse_models("exact,B")
    with pytest.raises(ConfigError):
        parse_detectors([])


def test_parse_grid():
    assert parse_grid("1e-3,1e2,5") == (1e-3, 1e2, 5)
    with pytest.raises(ConfigError):
        parse_grid("1,2")
    with pytest.raises(ConfigError):
        parse_grid("1,2,2.5")


def test_make_grid_spans_the_scaled_axis():
    grid = make_grid(1e-2, 1e2, 5, 0.1)
    assert grid[0] * 0.1 == pytest.approx(1e-2)
    assert grid[-1] * 0.1 == pytest.approx(1e2)
    np.testing.assert_allclose(np.diff(np.log(grid)), math.log(10.0))


@pytest.mark.parametrize("lo, hi, points", [(1.0, 2.0, 1), (2.0, 1.0, 5), (0.0, 1.0, 5)])
def test_make_grid_rejects(lo, hi, points):
    with pytest.raises(ConfigError):
        make_grid(lo, hi, points, 1.0)


# --- config ---

def test_presets_resolve():
    names = [p["name"] for p in PRESETS]
    assert names == ["fig1", "fig2", "fig3", "fig4"]
    for name in names:
        cfg = _config(name)
        assert cfg.preset == name
        assert len(cfg.grid) == BASE_CONFIG["GRID_POINTS"]


def test_preset_states():
    assert _config("fig1").state.n_c / _config("fig1").state.n_t == pytest.approx(0.25)
    assert _config("fig2").state.n_c / _config("fig2").state.n_t == pytest.approx(10.0)
    fig3 = _config("fig3")
    assert fig3.process == "sequential"
    assert fig3.sequential_k == 2
    assert _config("fig4").process == "add"


def test_unknown_preset():
    with pytest.raises(ConfigError):
        get_preset_config("fig9")


def test_base_config_is_not_mutated():
    config = get_preset_config("fig3")
    config["DETECTORS"].append("r:5")
    assert get_preset_config("fig3")["DETECTORS"] == ["n:2", "r:2"]


def test_addition_grid_is_in_units_of_r():
    cfg = _config("fig4")
    assert cfg.scale == pytest.approx(pdc_r(0.01))
    assert cfg.grid[0] * cfg.scale == pytest.approx(BASE_CONFIG["GRID_MIN"])


def test_sequential_k_defaults_to_largest_threshold():
    cfg = _config(PROCESS="sequential", DETECTORS=["n:1", "r:3"])
    assert cfg.sequential_k == 3


@pytest.mark.parametrize("overrides", [
    {"GRID_POINTS": 1},
    {"GRID": [1.0]},
    {"GRID": [2.0, 1.0]},
    {"GRID": [0.0, 1.0]},
    {"REFLECTIVITY": 1.0},
    {"REFLECTIVITY": 0.0},
    {"PROCESS": "add", "GAIN": 0.0},
    {"PROCESS": "teleport"},
    {"STATE": "fock:2"},
    {"MODELS": ["A", "A"]},
    {"DETECTORS": []},
    {"WORKERS": 0},
    {"EPSILON": 2.0},
    {"OUTPUT_FORMAT": "xml"},
])
def test_invalid_configs(overrides):
    with pytest.raises(ValueError):
        _config(**overrides)


# --- evaluation ---

def test_model_A_doubles_thermal_mean_at_a_single_point():
    ((model, label, stats),) = evaluate_rows(FieldStateSpec.thermal(3.0), "subtract", 0.01, [detector("n:1")], ["A"], 1e-12)
    assert (model, label) == ("A", "n:1")
    assert stats.as_row(3.0)["mean_n_over_n0"] == pytest.approx(2.0, rel=1e-14)


def test_sequential_row_comes_first():
    rows = evaluate_rows(FieldStateSpec.thermal(10.0), "sequential", 0.1, parse_detectors("n:2,r:2"), ["exact"], 1e-12)
    assert [(m, label) for m, label, _ in rows] == [("exact", "s:2"), ("exact", "n:2"), ("exact", "r:2")]


def test_evaluate_record_matches_rows():
    spec = FieldStateSpec.thermal(2.0)
    d = detector("r:1")
    p = thermal_distribution(2.0, 1e-16)
    ((_, _, stats),) = evaluate_rows(spec, "add", 0.1, [d], ["exact"], 1e-16)
    record = evaluate_record(p, "add", 0.1, d, "exact")
    assert rel(record.probability, stats.probability) <= 1e-8
    assert rel(record.mean, stats.mean) <= 1e-8


def test_evaluate_record_impossible_outcome():
    assert evaluate_record(thermal_distribution(0.0), "subtract", 0.1, detector("n:1"), "exact") is None


# --- sweeps ---

def test_sweep_rows_and_order():
    cfg = _config("fig4", GRID_POINTS=4)
    table = run_sweep(cfg)
    assert list(table.columns) == SWEEP_COLUMNS
    assert len(table) == 4 * 3 * 2
    first = table.iloc[:6]
    assert list(zip(first["model"], first["detector"])) == [
        ("exact", "n:1"), ("exact", "r:1"), ("A", "n:1"), ("A", "r:1"), ("E", "n:1"), ("E", "r:1"),
    ]
    assert np.all(np.diff(table["n0"].to_numpy()[::6]) > 0)
    np.testing.assert_allclose(table["n0_times_R_or_r"], table["n0"] * cfg.scale)


def test_fig3_sweep_puts_sequential_first():
    table = run_sweep(_config("fig3", GRID_POINTS=3))
    assert len(table) == 3 * 3
    assert list(table["detector"][:3]) == ["s:2", "n:2", "r:2"]


def test_fig4_exact_nonresolving_approaches_model_E():
    table = run_sweep(_config("fig4", GRID_POINTS=5))
    last = table[table["n0"] == table["n0"].max()]
    exact = last[(last["model"] == "exact") & (last["detector"] == "n:1")]["mean_n"].item()
    model_e = last[(last["model"] == "E") & (last["detector"] == "n:1")]["mean_n"].item()
    assert rel(exact, model_e) <= 0.05


def test_impossible_outcomes_become_empty_rows():
    cfg = _config(DETECTORS=["r:3"], GRID=[1e-120, 1.0])
    table = run_sweep(cfg)
    tiny = table[table["n0"] == 1e-120]
    assert (tiny["P"] == 0.0).all()
    assert tiny["mean_n"].isna().all()
    assert table[table["n0"] == 1.0]["P"].gt(0).all()
    csv_line = table_to_csv(table).splitlines()[1]
    assert ",0.0,,,,," in csv_line


def test_sweep_is_deterministic_across_workers():
    one = table_to_csv(run_sweep(_config("fig1", GRID_POINTS=6, WORKERS=1)))
    four = table_to_csv(run_sweep(_config("fig1", GRID_POINTS=6, WORKERS=4)))
    again = table_to_csv(run_sweep(_config("fig1", GRID_POINTS=6, WORKERS=4)))
    assert one == four == again


@pytest.mark.parametrize("process", ["subtract", "add", "sequential"])
def test_generic_maps_match_closed_forms(process):
    overrides = dict(PROCESS=process, REFLECTIVITY=0.1, GAIN=0.1, GRID_MIN=1e-2, GRID_MAX=1.0, GRID_POINTS=3, EPSILON=1e-16)
    if process == "sequential":
        overrides["DETECTORS"] = ["n:2", "r:2"]
    closed = run_sweep(_config(**overrides))
    generic = run_sweep(_config(PREFER_CLOSED_FORM=False, **overrides))
    for column in ("P", "mean_n", "second_factorial"):
        np.testing.assert_allclose(generic[column], closed[column], rtol=1e-8)


def test_json_table_carries_config_and_nulls():
    cfg = _config(DETECTORS=["r:3"], GRID=[1e-120, 1.0], OUTPUT_FORMAT="json")
    report = json.loads(table_to_json(run_sweep(cfg), cfg))
    assert report["config"]["process"] == "subtract"
    assert report["rows"][0]["mean_n"] is None
    assert set(report["rows"][0]) == set(SWEEP_COLUMNS)


def test_write_table_to_file(tmp_path):
    path = tmp_path / "sweep.csv"
    cfg = _config("fig4", GRID_POINTS=2, OUTPUT_PATH=str(path))
    text = write_table(run_sweep(cfg), cfg)
    assert path.read_text() == text
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)


def test_thermal_crossover_sits_near_one_third():
    # exact RD1 mean 2 n0 T / (1 + n0 R) is equidistant from 2 n0 and n0 at n0 R = 4T/3 - 1
    table = run_sweep(_config(STATE="thermal:1", GRID_POINTS=40))
    crossings = find_crossovers(table)
    assert set(crossings) == {"n:1", "r:1"}
    assert crossings["r:1"] == pytest.approx(4 * 0.99 / 3 - 1, rel=0.1)
    assert 0.1 < crossings["n:1"] < 10.0


def test_crossover_outside_grid_and_missing_models():
    below = run_sweep(_config(STATE="thermal:1", GRID_MIN=1e-3, GRID_MAX=1e-2, GRID_POINTS=4))
    assert find_crossovers(below) == {"n:1": None, "r:1": None}
    assert find_crossovers(run_sweep(_config("fig3", GRID_POINTS=3))) == {}
