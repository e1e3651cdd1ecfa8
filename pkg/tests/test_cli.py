import csv
import io
import json

import pytest

from partialsearch.cli import main, run_verify_suite
from partialsearch.costmodel import SWEEP_COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def predict(capsys, *argv):
    code, out, _ = run(capsys, "predict", *argv)
    assert code == 0
    return json.loads(out)


def test_predict_six_six_six(capsys):
    doc = predict(capsys, "--partition", "6,6,6")
    assert doc["result"]["final_iterates"] == [102, 25, 6]
    assert doc["config"]["partition"] == [6, 6, 6]
    assert doc["tool"] == "partialsearch"


def test_predict_nine_nine(capsys):
    res = predict(capsys, "--partition", "9,9")["result"]
    assert res["final_iterates"] == [201, 17]
    assert res["overall_success"] == pytest.approx(0.9977, abs=1e-3)


def test_predict_single_register_is_grover(capsys):
    res = predict(capsys, "--partition", "4")["result"]
    assert res["final_iterates"] == [3]
    assert res["overall_success"] == pytest.approx(0.9613, abs=1e-4)


def test_predict_from_n_and_stages(capsys):
    res = predict(capsys, "--n", "50", "--stages", "2")["result"]
    assert len(res["iterates"]) == 2 and res["boost_policy"] == "none"


def test_predict_csv(capsys):
    code, out, _ = run(capsys, "predict", "--partition", "6,6,6", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["oracle_calls"] for r in rows] == ["408", "50", "6"]


@pytest.mark.parametrize("argv", [
    ["predict", "--partition", "3,3", "--n", "7"],
    ["predict", "--partition", "3,3", "--target", "0101"],
    ["predict", "--partition", "3,x"],
    ["simulate", "--partition", "2,2", "--mode", "exact", "--shots", "-1"],
    ["sweep", "--ns", "20:22", "--scenarios", "S9"],
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")


def test_unknown_config_key_exit_2(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"partition": [2, 2], "colour": "blue"}))
    assert run(capsys, "predict", "--config", str(cfg))[0] == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["predict", "--mode", "quantum"])
    assert e.value.code == 2


def test_resource_cap_exit_4(capsys):
    code, _, err = run(capsys, "simulate", "--partition", "6,6", "--max-qubits", "10")
    assert code == 4 and "error" in err


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"partition": [3, 3], "mode": "exact", "seed": 5}))
    code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--seed", "6")
    doc = json.loads(out)
    assert code == 0 and doc["config"]["seed"] == 6 and doc["result"]["mode"] == "exact-expectation"


def test_simulate_outputs_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(capsys, "simulate", "--partition", "2,2,1", "--shots", "200", "--seed", "3",
                   "--out", str(path))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    d = tmp_path / "d.csv"
    for path in (c, d):
        run(capsys, "simulate", "--partition", "2,2,1", "--shots", "200", "--seed", "3",
            "--format", "csv", "--out", str(path))
    assert c.read_bytes() == d.read_bytes()


@pytest.mark.parametrize("partition", ["3,3", "2,2,2", "4,3,2,1", "6,6"])
def test_predict_and_exact_simulation_agree(capsys, partition):
    pred = predict(capsys, "--partition", partition)["result"]["overall_success"]
    code, out, _ = run(capsys, "simulate", "--partition", partition, "--mode", "exact", "--shots", "0")
    res = json.loads(out)["result"]
    assert code == 0 and res["success"] == pytest.approx(pred, abs=1e-8)
    assert res["final_histogram"] == {}


def test_verify_passes_and_negative_control_fails(capsys):
    code, out, _ = run(capsys, "verify", "--fuzz", "10", "--trials", "5")
    assert code == 0 and json.loads(out)["result"]["passed"]
    code, out, _ = run(capsys, "verify", "--fuzz", "5", "--trials", "2", "--perturb-gamma", "1e-3")
    res = json.loads(out)["result"]
    assert code == 3
    assert not res["suites"]["spectrum"]["passed"] and res["suites"]["projection"]["passed"]


def test_verify_suite_function():
    res = run_verify_suite(fuzz=3, trials=3, seed=1)
    assert set(res["suites"]) == {"spectrum", "fuzz", "projection", "cross_validation"}
    assert res["passed"]


def test_sweep_csv_columns(capsys):
    code, out, _ = run(capsys, "sweep", "--ns", "20:22", "--stage-list", "2,3", "--scenarios", "S1,S3",
                       "--multipliers", "1", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == SWEEP_COLUMNS and len(rows) == 3 * 2 * 2


def test_sweep_json_embeds_depth_model(capsys):
    code, out, _ = run(capsys, "sweep", "--ns", "20", "--stage-list", "2")
    doc = json.loads(out)
    assert code == 0 and doc["config"]["depth_model"]["s3_slope"] == 3.0


def test_depth_command(capsys):
    code, out, _ = run(capsys, "depth", "--partition", "6,6,6")
    reports = json.loads(out)["result"]
    assert code == 0 and [r["scenario"] for r in reports] == ["S1", "S2", "S3"]
    assert reports[0]["recursive_calls"] == 464
