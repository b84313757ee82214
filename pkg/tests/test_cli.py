import json
from pathlib import Path

import pytest
import yaml

from streamsched.cli import main
from streamsched.cli.files import FileFormatError, load_scenario, load_topology, topology_to_tree
from streamsched.runner import read_rows, summarize

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
TOPOLOGIES = SCENARIOS / "topologies"


def test_validate_ok(capsys):
    assert main(["validate", str(TOPOLOGIES / "chain.yaml")]) == 0
    assert "chain: ok" in capsys.readouterr().out


def test_validate_reports_violation(tmp_path, capsys):
    tree = yaml.safe_load((TOPOLOGIES / "chain.yaml").read_text())
    tree["edges"].append({"from": "bolt", "to": "X"})
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(tree))
    assert main(["validate", str(path)]) == 1
    assert "unknown operator X" in capsys.readouterr().out


def test_validate_missing_file(capsys):
    assert main(["validate", "/nonexistent/topology.yaml"]) == 2
    assert "error" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


@pytest.mark.parametrize(
    "topology, stats, expected",
    [("diamond.yaml", "diamond.csv", "0.875000"), ("split_merge.yaml", "split_merge.csv", "0.475000")],
)
def test_juice_golden(capsys, topology, stats, expected):
    assert main(["juice", str(TOPOLOGIES / topology), str(SCENARIOS / "stats" / stats)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "operator,source,juice"
    assert out[-1] == f"topology_juice,{expected}"


def test_juice_diamond_rows(capsys):
    main(["juice", str(TOPOLOGIES / "diamond.yaml"), str(SCENARIOS / "stats" / "diamond.csv")])
    out = capsys.readouterr().out.splitlines()
    assert "B,spout,0.500000" in out
    assert "C,spout,0.375000" in out


def test_juice_lossless(tmp_path, capsys):
    stats = tmp_path / "s.csv"
    stats.write_text("parent,child,sent,executed\nspout,bolt,500,500\nbolt,sink,500,500\n")
    assert main(["juice", str(TOPOLOGIES / "chain.yaml"), str(stats)]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "topology_juice,1.000000"


def test_juice_missing_edge(tmp_path, capsys):
    stats = tmp_path / "s.csv"
    stats.write_text("parent,child,sent,executed\nspout,bolt,500,500\n")
    assert main(["juice", str(TOPOLOGIES / "chain.yaml"), str(stats)]) == 1
    assert "insufficient data" in capsys.readouterr().err


def test_juice_bad_stats(tmp_path, capsys):
    stats = tmp_path / "s.csv"
    stats.write_text("parent,child,sent,executed\nspout,bolt,five,500\n")
    assert main(["juice", str(TOPOLOGIES / "chain.yaml"), str(stats)]) == 1
    assert ":2:" in capsys.readouterr().err


def test_topology_round_trip(tmp_path):
    spec = load_topology(TOPOLOGIES / "split_merge.yaml")
    path = tmp_path / "again.json"
    path.write_text(json.dumps(topology_to_tree(spec)))
    assert load_topology(path) == spec


def test_scenario_errors_name_the_location(tmp_path, capsys):
    path = tmp_path / "s.yaml"
    path.write_text("duration_s: 10\nnodes: {count: 1}\ntopologies:\n  - {topology: {id: x}}\n")
    assert main(["run", str(path), "--out-dir", str(tmp_path / "out")]) == 1
    assert "topologies[0]" in capsys.readouterr().err
    path.write_text("duration_s: 10\nnodes: {count: 1}\ntopologies: []\nsim: {warp: 9}\n")
    with pytest.raises(FileFormatError, match="unknown field"):
        load_scenario(path)


def test_scenario_expansion():
    sc = load_scenario(SCENARIOS / "hog.yaml")
    ids = [b.spec.id for b in sc.topologies]
    assert ids == ["job-1", "job-2", "job-3", "job-4", "hog"]
    hog = sc.topologies[-1]
    assert hog.spec.input_rate == 2000 and hog.spec.slo.latency_threshold == 3
    assert hog.spec.slo.max_utility == 20
    assert sc.scheduler_start_s == 900


def test_diurnal_scenario_binds_traces():
    sc = load_scenario(SCENARIOS / "diurnal.yaml")
    profile = sc.topologies[0].profiles["spout"]
    assert len(profile.trace) == 48 and profile.duration == 28_800


@pytest.fixture(scope="module")
def convergence_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    scenario = str(SCENARIOS / "convergence.yaml")
    for name, extra in (("a", []), ("b", []), ("base", ["--no-scheduler"])):
        assert main(["run", scenario, "--out-dir", str(root / name), *extra]) == 0
    return root


def test_run_writes_reports(convergence_runs):
    out = convergence_runs / "a"
    assert {p.name for p in out.iterdir()} == {"metrics.csv", "actions.csv", "summary.json"}
    header = (out / "metrics.csv").read_text().splitlines()[0]
    assert header == "round,time_s,topology_id,latency_ms,juice,utility,input_rate,output_rate"
    header = (out / "actions.csv").read_text().splitlines()[0]
    assert header == "round,time_s,action_kind,target,deltas,total_utility_before,total_utility_after"
    summary = json.loads((out / "summary.json").read_text())
    for stats in summary["topologies"].values():
        assert stats["final_utility"] == stats["max_utility"]


def test_run_is_byte_identical(convergence_runs):
    for name in ("metrics.csv", "actions.csv", "summary.json"):
        assert (convergence_runs / "a" / name).read_bytes() == (convergence_runs / "b" / name).read_bytes()


def test_baseline_stays_below_max(convergence_runs):
    summary = json.loads((convergence_runs / "base" / "summary.json").read_text())
    assert summary["scheduler"] is False
    for stats in summary["topologies"].values():
        assert stats["final_utility"] < stats["max_utility"]
        assert stats["reconfigurations"] == 0


def test_summary_recomputes_from_rows(convergence_runs):
    out = convergence_runs / "a"
    summary = json.loads((out / "summary.json").read_text())
    sc = load_scenario(SCENARIOS / "convergence.yaml")
    again = summarize(read_rows(out / "metrics.csv"), read_rows(out / "actions.csv"), sc.max_utilities())
    for key in ("topologies", "cluster"):
        assert json.loads(json.dumps(again[key])) == summary[key]


def test_seed_override_changes_output(tmp_path, convergence_runs):
    assert main(["run", str(SCENARIOS / "convergence.yaml"), "--seed", "9",
                 "--out-dir", str(tmp_path), "--trace"]) == 0
    assert (tmp_path / "metrics.csv").read_bytes() != (convergence_runs / "a" / "metrics.csv").read_bytes()
    assert json.loads((tmp_path / "summary.json").read_text())["seed"] == 9
    assert (tmp_path / "trace.csv").read_text().startswith("time_s,topology_id,operator,queue_len")
