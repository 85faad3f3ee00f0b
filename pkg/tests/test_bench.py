import csv
import json
import os
import sys

import pytest

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from bench import (
    ExperimentConfig,
    RunResult,
    comparison_table,
    forgetting_rows,
    load_config,
    read_result,
    report,
    run_experiment,
    write_result,
    write_sweep_csv,
)
from utils.errors import ConfigurationError, IngestionError, ReportError


def tiny_config(**overrides):
    data = {
        "name": "tiny",
        "method": "er-res",
        "benchmark": {
            "kind": "synthetic",
            "synthetic": {"num_tasks": 3, "num_classes": 2, "dim": 4, "train_per_task": 20},
        },
        "memory_size": 6,
        "train": {"learning_rate": 0.1, "epochs": 1, "batch_size": 5, "hidden_sizes": [4]},
        "simulation": {"window": 1, "min_stride": 2, "max_stride": 2},
        "repeats": 2,
        "master_seed": 3,
    }
    data.update(overrides)
    return data


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_config()))
    yield str(path)


def test_config_lists_every_bad_field():
    data = tiny_config(method="sgd", extra=1, train={"epochs": 0})
    data["benchmark"] = {"kind": "synthetic", "synthetic": {"num_tasks": 3, "colour": 1}}
    with pytest.raises(ConfigurationError) as info:
        ExperimentConfig.from_dict(data)
    assert info.value.fields == ["benchmark.synthetic.colour", "extra", "method", "train.epochs"]


def test_config_rejects_missing_and_nested_fields():
    with pytest.raises(ConfigurationError) as info:
        ExperimentConfig.from_dict({"method": "gps", "simulation": {"stride": 4}, "benchmark": {"kind": "cifar"}})
    assert info.value.fields == ["benchmark.kind", "name", "simulation.stride"]


def test_config_reports_wrongly_typed_fields():
    data = tiny_config(repeats="5", master_seed="x", gamma="0.2", train={"learning_rate": "0.1"})
    with pytest.raises(ConfigurationError) as info:
        ExperimentConfig.from_dict(data)
    assert info.value.fields == ["gamma", "master_seed", "repeats", "train.learning_rate"]

    data = tiny_config(memory_size=True, repeats=None, train={"hidden_sizes": ["4"]})
    data["benchmark"]["synthetic"]["num_classes"] = "2"
    with pytest.raises(ConfigurationError) as info:
        ExperimentConfig.from_dict(data)
    assert info.value.fields == [
        "benchmark.synthetic.num_classes", "memory_size", "repeats", "train.hidden_sizes",
    ]
    assert ExperimentConfig.from_dict(tiny_config(gamma=None, train={"learning_rate": 1})).gamma is None

def test_memory_must_hold_one_example_per_task():
    with pytest.raises(ConfigurationError) as info:
        ExperimentConfig.from_dict(tiny_config(memory_size=2))
    assert info.value.fields == ["memory_size"]
    assert ExperimentConfig.from_dict(tiny_config(memory_size=3)).memory_size == 3


def test_curriculum_gamma_defaults():
    assert ExperimentConfig.from_dict(tiny_config(method="er-cur-res")).curriculum_gamma() == pytest.approx(0.2)
    ring = ExperimentConfig.from_dict(tiny_config(method="er-cur-ring-full"))
    assert ring.curriculum_gamma() == pytest.approx(0.1)
    assert ExperimentConfig.from_dict(tiny_config(gamma=0.5)).curriculum_gamma() == 0.5


def test_load_config_from_file_and_preset(config_file):
    config = load_config(config_file)
    assert config.name == "tiny" and config.repeats == 2
    preset = load_config("pmnist-ci")
    assert preset.method == "gps"
    assert preset.benchmark.num_tasks == 3
    skewed = load_config("synthetic-skewed.json")
    assert skewed.benchmark.effective_num_tasks() == 5
    full = load_config("pmnist-paper")
    assert full.method == "gps" and full.repeats == 5
    assert full.benchmark.kind == "permuted-mnist" and full.benchmark.num_tasks == 10


def test_load_config_ingestion_errors(tmp_path):
    with pytest.raises(IngestionError) as info:
        load_config(str(tmp_path / "absent.json"))
    assert info.value.path.endswith("absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"name": ')
    with pytest.raises(IngestionError) as info:
        load_config(str(broken))
    assert info.value.offset is not None
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    with pytest.raises(ConfigurationError):
        load_config(str(listed))


def test_run_is_byte_identical_across_invocations(tmp_path):
    config = ExperimentConfig.from_dict(tiny_config())
    run_experiment(config, str(tmp_path / "a"))
    run_experiment(config, str(tmp_path / "b"))
    for name in ("tiny.json", "tiny.accuracy.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "tiny.timing.json").exists()


def test_run_result_is_consistent():
    result = run_experiment(ExperimentConfig.from_dict(tiny_config()), write=False)
    assert len(result.repeats) == 2
    assert result.check() == []
    for rep in result.repeats:
        assert [len(row) for row in rep.accuracy_matrix] == [1, 2, 3]
        assert len(rep.per_task_global_loss) == 3
        assert rep.plan is None
    assert result.benchmark["kind"] == "synthetic"


def test_gps_result_records_plan_and_traces():
    result = run_experiment(ExperimentConfig.from_dict(tiny_config(method="gps", repeats=1)), write=False)
    rep = result.repeats[0]
    assert rep.plan["provenance"] == "simulated"
    assert sorted(rep.plan["points"]) == ["1", "2"]
    assert sorted(rep.traces) == ["1", "2"]
    assert rep.traces["1"]["chosen"] == rep.plan["points"]["1"]


def test_read_result_round_trip(tmp_path):
    result = run_experiment(ExperimentConfig.from_dict(tiny_config()), write=False)
    paths = write_result(result, str(tmp_path))
    loaded = read_result(paths["result"])
    assert loaded.to_dict() == json.loads(json.dumps(result.to_dict()))
    assert "peak_rss_mb" in loaded.timing
    with open(paths["accuracy"], newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["repeat", "after_task", "task", "accuracy"]
    assert len(rows) == 1 + 2 * 6


def test_read_result_rejects_other_schema_versions(tmp_path):
    result = run_experiment(ExperimentConfig.from_dict(tiny_config(repeats=1)), write=False)
    data = result.to_dict()
    data["schema_version"] = 99
    path = tmp_path / "old.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ReportError):
        read_result(str(path))
    with pytest.raises(IngestionError):
        read_result(str(tmp_path / "missing.json"))


def fake_result(name, method, mean, benchmark=None):
    rep = {
        "repeat": 0,
        "accuracy_matrix": [[0.9], [0.7, 0.8]],
        "average_accuracy": 0.75,
        "global_loss": 1.0,
        "per_task_global_loss": [0.6, 0.4],
    }
    return RunResult.from_dict({
        "schema_version": 1,
        "name": name,
        "method": method,
        "benchmark": benchmark or {"kind": "synthetic", "num_tasks": 2},
        "config": {},
        "repeats": [rep],
        "mean_accuracy": mean,
        "std_accuracy": 0.0,
    })


def test_comparison_table_orders_best_first():
    results = [fake_result("b", "er-res", 0.7), fake_result("a", "gps", 0.8), fake_result("c", "er-hybrid", 0.7)]
    lines = comparison_table(results).splitlines()
    assert lines[0].startswith("Method")
    assert set(lines[1]) <= {"-", " "}
    assert [line.split()[1] for line in lines[2:]] == ["a", "b", "c"]
    assert "80.00 +- 0.00" in lines[2]


def test_comparison_table_rejects_mixed_benchmarks():
    with pytest.raises(ReportError):
        comparison_table([fake_result("a", "gps", 0.8), fake_result("b", "gps", 0.7, {"kind": "permuted-mnist"})])
    with pytest.raises(ReportError):
        comparison_table([])


def test_forgetting_rows():
    rows = forgetting_rows(fake_result("a", "gps", 0.75))
    assert rows[0]["final_accuracy"] == pytest.approx(0.7)
    assert rows[0]["max_accuracy"] == pytest.approx(0.9)
    assert rows[0]["forgetting"] == pytest.approx(0.2)
    assert rows[1]["forgetting"] == pytest.approx(0.0)


def test_report_writes_table_and_series(tmp_path):
    outputs = report([fake_result("a", "gps", 0.8), fake_result("b", "er-res", 0.7)], str(tmp_path))
    assert (tmp_path / "table.txt").read_text() == outputs["table"] + "\n"
    with open(outputs["curves"], newline="") as f:
        curves = list(csv.DictReader(f))
    assert len(curves) == 2 * 3
    assert os.path.exists(outputs["forgetting"])
    assert "forgetting" not in report([fake_result("a", "gps", 0.8)])


def test_sweep_csv_columns(tmp_path):
    path = write_sweep_csv([{"a_j": 0, "loss": 1.5, "accuracy": 0.5}, {"a_j": 2, "loss": 1.2, "accuracy": 0.6}],
                           str(tmp_path / "sweep.csv"))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows == [["a_j", "loss", "accuracy"], ["0", "1.5", "0.5"], ["2", "1.2", "0.6"]]
