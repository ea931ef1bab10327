import json
from pathlib import Path

import pytest

from carkit.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_reports_verdict_with_exit_zero(capsys):
    code, out, _ = run(capsys, "check", SCENARIOS / "three-prisoners.json")
    assert code == EXIT_OK
    assert "CAR fails" in out


def test_json_output_is_parseable_and_deterministic(capsys):
    first = run(capsys, "--format", "json", "check", SCENARIOS / "missing-at-random.json")[1]
    second = run(capsys, "check", SCENARIOS / "missing-at-random.json", "--format", "json")[1]
    assert first == second
    assert json.loads(first)["overall"] is True


def test_feasibility_lists_blockers(capsys):
    code, out, _ = run(capsys, "--format", "json", "feasibility", SCENARIOS / "overlapping-pair.json")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["gamma"]["status"] == "NoSolution"
    assert {"rows": [0, 1], "kind": "AffineNonnegative", "observation": "U2",
            "lambda": ["-1", "1"], "combination": ["0", "1"]} in doc["blockers"]


def test_synthesize_with_explicit_gamma(capsys):
    code, out, _ = run(capsys, "synthesize", SCENARIOS / "overlapping-triangle.json",
                       "--gamma", "1/2,1/2,1/2", "--prior", "a1:1/2,a2:1/4,a3:1/4")
    assert code == EXIT_OK
    assert "(a1, U2): 1/4" in out


def test_synthesize_bad_gamma_is_infeasible(capsys):
    code, _, err = run(capsys, "synthesize", SCENARIOS / "overlapping-triangle.json", "--gamma", "1,0,0")
    assert code == EXIT_INFEASIBLE
    assert "cannot perform" in err


def test_cargen_with_simulation(capsys):
    code, out, _ = run(capsys, "--format", "json", "cargen", SCENARIOS / "triangle-cargen.json",
                       "--samples", 20000, "--seed", 4)
    doc = json.loads(out)
    assert code == EXIT_OK and doc["valid"] and doc["car"]
    assert doc["simulation"]["total_variation"] < 0.02


def test_cargen_invalid_parameters_reported(capsys, tmp_path):
    doc = json.loads((SCENARIOS / "triangle-cargen.json").read_text())
    doc["partitions"][0]["p"] = "1/2"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "cargen", path)
    assert code == EXIT_OK
    assert "parameters are invalid" in out


def test_jeffrey_and_mre_commands(capsys):
    code, out, _ = run(capsys, "jeffrey", SCENARIOS / "weather.json",
                       "--constraint", SCENARIOS / "weather-forecast.json")
    assert code == EXIT_OK and "sun: 2/7" in out
    code, out, _ = run(capsys, "mre", SCENARIOS / "judy-benjamin.json",
                       "--constraint", SCENARIOS / "judy-constraint.json")
    assert code == EXIT_OK and "P(Blue) = 0.532656" in out


def test_analyze_file(capsys):
    code, out, _ = run(capsys, "analyze", SCENARIOS / "weather.json", "--analysis", "gcar")
    assert code == EXIT_OK and "generalized CAR on every cell: True" in out
    code, _, err = run(capsys, "analyze", SCENARIOS / "weather.json", "--analysis", "mre")
    assert code == EXIT_INFEASIBLE and "contradicts" in err


@pytest.mark.parametrize("name", ["monty-hall", "three-prisoners", "overlapping-triangle", "mar"])
def test_puzzle_runs(capsys, name):
    assert run(capsys, "puzzle", name)[0] == EXIT_OK


def test_puzzle_inapplicable_is_exit_three(capsys):
    code, _, err = run(capsys, "puzzle", "judy-benjamin", "--analysis", "car-check")
    assert code == EXIT_INFEASIBLE


def test_invalid_inputs_exit_two(capsys, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    assert run(capsys, "check", broken)[0] == EXIT_INVALID
    assert run(capsys, "check", tmp_path / "missing.json")[0] == EXIT_INVALID
    assert run(capsys, "puzzle", "nope")[0] == EXIT_INVALID
    assert run(capsys, "puzzle", "monty-hall", "--param", "2")[0] == EXIT_INVALID
    assert run(capsys)[0] == EXIT_INVALID
