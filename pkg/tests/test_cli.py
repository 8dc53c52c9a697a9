import csv
import io
import json

import pytest

from pursuit_guard import cli
from pursuit_guard.scenario import dumps, load_scenario, normalize_units
from pursuit_guard.errors import SchemaError
from pursuit_guard.sim_engine import SimTrace, scenario_hash


def run_cli(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

def test_units_normalized_and_recorded():
    sc = normalize_units({"a": {"radius_dm": 5, "dt_ms": 10, "v_max_cmps": 50, "x": 1}})
    assert sc["a"] == {"radius_m": 0.5, "dt_s": 0.01, "v_max_mps": 0.5, "x": 1}


def test_duplicate_quantity_rejected():
    with pytest.raises(SchemaError):
        normalize_units({"r_m": 1, "r_dm": 10})


@pytest.mark.parametrize("name", ["boundary_five", "siege_ring", "coverage_igd",
                                  "switching_chain", "switching_decentralized", "force_field"])
def test_round_trip(scenario_dir, name):
    sc = load_scenario(scenario_dir / f"{name}.json")
    assert load_scenario(dumps(sc)) == sc


def test_decimeter_scenario_keeps_source_units(scenario_dir):
    sc = load_scenario(scenario_dir / "switching_decentralized.json")
    assert sc["params"]["epsilon_m"] == pytest.approx(0.2)
    assert sc["source_units"]["params.epsilon_m"] == "dm"


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def test_check_feasible_prints_margin(scenario_dir, capsys):
    code, out, _ = run_cli(["check", "--scenario", str(scenario_dir / "boundary_five.json")],
                           capsys)
    assert code == 0
    assert out.startswith("FEASIBLE margin=")
    assert "point=(" in out


def test_check_sparse_team_infeasible(scenario_dir, capsys):
    code, out, _ = run_cli(["check", "--scenario", str(scenario_dir / "boundary_sparse.json")],
                           capsys)
    assert code == 2 and out.startswith("INFEASIBLE")


def test_check_missing_epsilon_names_field(tmp_path, scenario_dir, capsys):
    sc = json.loads((scenario_dir / "boundary_five.json").read_text())
    del sc["team"]["epsilon_m"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(sc))
    code, _, err = run_cli(["check", "--scenario", str(p)], capsys)
    assert code == 1
    assert "epsilon" in err


def test_check_malformed_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run_cli(["check", "--scenario", str(p)], capsys)
    assert code == 1 and "schema error" in err


# ---------------------------------------------------------------------------
# run / plot-data
# ---------------------------------------------------------------------------

def test_boundary_run_trace(tmp_path, scenario_dir, capsys):
    out = tmp_path / "t.jsonl"
    code, text, _ = run_cli(["run", "--scenario", str(scenario_dir / "boundary_five.json"),
                             "--seed", "1", "--out", str(out)], capsys)
    assert code == 0 and "outcome=" in text
    tr = SimTrace.read(out)
    sc = load_scenario(scenario_dir / "boundary_five.json")
    assert tr.header["scenario_hash"] == scenario_hash(sc)
    assert tr.header["seed"] == 1
    assert tr.events("crossing")
    assert tr.events("intercept") or tr.events("escape")


def test_switching_run_has_per_step_minima(tmp_path, scenario_dir, capsys):
    out = tmp_path / "t.jsonl"
    code, text, _ = run_cli(["run", "--scenario", str(scenario_dir / "switching_chain.json"),
                             "--out", str(out)], capsys)
    assert code == 0 and "min_clearance=" in text
    steps = SimTrace.read(out).steps()
    assert all("per_obstacle" in r and "min_clearance" in r for r in steps)
    csv_path = tmp_path / "c.csv"
    assert cli.main(["plot-data", str(out), "--kind", "clearance", "--out", str(csv_path)]) == 0
    rows = list(csv.reader(csv_path.open()))
    assert rows[0][:4] == ["t", "robot", "step", "min_clearance"]
    assert len(rows) == len(steps) + 1


def test_force_field_run_summary(scenario_dir, capsys):
    code, text, _ = run_cli(["run", "--scenario", str(scenario_dir / "force_field.json"),
                             "--seed", "62"], capsys)
    assert code == 0 and "min_clearance=" in text and "outcome=safe" in text


def test_distances_on_boundary_trace(tmp_path, scenario_dir, capsys):
    out = tmp_path / "t.jsonl"
    cli.main(["run", "--scenario", str(scenario_dir / "boundary_five.json"), "--out", str(out)])
    capsys.readouterr()
    tr = SimTrace.read(out)
    head, rows = cli.plot_rows(tr, "distances")
    assert head == ["t"] + [f"robot{i}_distance" for i in range(5)]
    first = tr.steps()[0]["positions"]
    want = ((first["robot2"][0] - first["intruder0"][0]) ** 2
            + (first["robot2"][1] - first["intruder0"][1]) ** 2) ** 0.5
    assert rows[0][3] == pytest.approx(want)


def test_empty_trace_header_only(tmp_path, capsys):
    p = tmp_path / "e.jsonl"
    SimTrace({"mode": "switching", "seed": 0}).write(p)
    code, text, _ = run_cli(["plot-data", str(p), "--kind", "clearance"], capsys)
    assert code == 0 and text == "t,robot,step,min_clearance\n"


def test_unknown_kind_is_usage_error(tmp_path, capsys):
    p = tmp_path / "e.jsonl"
    SimTrace({"mode": "boundary"}).write(p)
    with pytest.raises(SystemExit) as ex:
        cli.main(["plot-data", str(p), "--kind", "heatmap"])
    assert ex.value.code == 2


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_single_seed(tmp_path, scenario_dir, capsys):
    out = tmp_path / "s.csv"
    code, text, _ = run_cli(["sweep", "--scenario", str(scenario_dir / "boundary_five.json"),
                             "--seeds", "1", "--out", str(out)], capsys)
    assert code == 0 and "success_rate=" in text
    rows = list(csv.reader(out.open()))
    assert len(rows) == 2 and rows[0][0] == "seed"


def test_sweep_coverage_pairs_modes(tmp_path, scenario_dir, capsys):
    out = tmp_path / "s.csv"
    code, text, _ = run_cli(["sweep", "--scenario", str(scenario_dir / "coverage_igd.json"),
                             "--seeds", "3", "--out", str(out)], capsys)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["seed", "igd_detected", "sweep_detected"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert "igd_rate=" in text and "sweep_rate=" in text


def test_mode_override_switches_law(scenario_dir):
    sc = load_scenario(scenario_dir / "switching_chain.json")
    assert cli._override(sc, "gap")["params"]["law"] == "gap"
    cov = load_scenario(scenario_dir / "coverage_igd.json")
    assert cli._override(cov, "sweep")["team"]["strategy"] == "sweep"
