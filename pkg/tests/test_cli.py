import json

import numpy as np
import pytest

from kvbext import cli, kvb_core
from kvbext.serialization import dumps, problem_from_json, problem_to_json


@pytest.fixture
def problems(tmp_path):
    paths = {}
    for name, p in (("t2", kvb_core.toy_t2()), ("t4", kvb_core.toy_t4())):
        path = tmp_path / f"{name}.json"
        path.write_text(dumps(problem_to_json(p)))
        paths[name] = str(path)
    return paths


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


def test_problem_round_trip(problems):
    p = problem_from_json(problems["t4"])
    q = kvb_core.toy_t4()
    assert np.allclose(p.s_d, q.s_d) and np.allclose(p.action, q.action)
    assert p.gap == q.gap


def test_check_gap(capsys, problems):
    code, out = run_json(capsys, "check-gap", problems["t2"])
    assert code == 0 and out["holds"] and out["margin"] == 0
    code, out = run_json(capsys, "check-gap", problems["t2"], "--a=-inf", "--b", "3")
    assert code == 1 and not out["holds"]


def test_adjoint(capsys, problems):
    code, out = run_json(capsys, "adjoint", problems["t4"])
    assert code == 0
    assert out["dim"] == 6 and out["deficiency_index"] == 2 and out["oracle_distance"] < 1e-9
    code, out = run_json(capsys, "adjoint", problems["t2"], "--psi", "[1, 1]", "--phi", "[2, 5]")
    assert code == 0 and out["decomposition"]["residual"] < 1e-12


def test_extend_scalar_and_dirichlet(capsys, problems):
    code, out = run_json(capsys, "extend", problems["t2"], "--beta", "1.0")
    assert code == 0 and out["selfadjoint_defect"] < 1e-12 and out["kernel_dim"] == 0
    code, out = run_json(capsys, "extend", problems["t2"], "--beta", "0")
    assert code == 0 and out["kernel_dim"] == 1 and out["t_kernel_dim"] == 1
    code, out = run_json(capsys, "extend", problems["t2"], "--beta", "inf")
    assert code == 0 and out["injective"]


def test_extend_parameter_file(capsys, problems, tmp_path):
    t_file = tmp_path / "t.json"
    t_file.write_text(json.dumps({"support": [[[0, 0], [0, 0], [1, 0], [0, 0]]], "matrix": [[[1, 0]]]}))
    code, out = run_json(capsys, "extend", problems["t4"], "--t-file", str(t_file))
    assert code == 0 and out["selfadjoint_defect"] < 1e-12


def test_kvn_and_beta(capsys, problems):
    code, out = run_json(capsys, "kvn", problems["t4"], "--lambda", "0.5")
    assert code == 0 and out["multiplicity"] == 2
    code, out = run_json(capsys, "beta", problems["t2"], "--lambda", "0.5")
    assert code == 0 and out["beta"] == pytest.approx(1.0) and out["graph_distance"] < 1e-9


def test_engineer_lambdas(capsys, problems, tmp_path):
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({"lambdas": [0.5, 0.5]}))
    code, out = run_json(capsys, "engineer", problems["t4"], str(targets))
    assert code == 0 and out["certificate"]["passed"]
    assert out["multiplicities"] == [{"lambda": 0.5, "observed": 2, "repeats": 2}]


def test_engineer_csv(capsys, problems, tmp_path):
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({"lambdas": [0.5, 0.5]}))
    code, out = run(capsys, "--format", "csv", "engineer", problems["t4"], str(targets))
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "eigenvalue,multiplicity,residual"
    assert lines[1].startswith("0.5,2,")


def test_engineer_set_targets(capsys, tmp_path):
    p = kvb_core.random_problem(np.random.default_rng(3), 12, 6, b=1.0)
    prob = tmp_path / "p.json"
    prob.write_text(dumps(problem_to_json(p)))
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({"set": {"points": [0], "intervals": [[0.25, 0.5]]}, "count": 5}))
    code, out = run_json(capsys, "engineer", str(prob), str(targets))
    assert code == 0 and out["targets"] == [0, 0.25, 0.5, 0.375, 0.3125]


def test_netspec(capsys, tmp_path):
    p = kvb_core.random_problem(np.random.default_rng(3), 12, 6, b=1.0)
    prob = tmp_path / "p.json"
    prob.write_text(dumps(problem_to_json(p)))
    code, out = run_json(capsys, "netspec", str(prob), "--set", "0;[0.25,0.5]", "--count", "5")
    assert code == 0 and out["covering_radius"] == 1 / 16
    code, _ = run(capsys, "netspec", str(prob), "--set", "[2,3]", "--count", "3")
    assert code == 1


def test_halfline_demo(capsys):
    code, out = run_json(capsys, "halfline", "demo")
    assert code == 0
    assert out["beta_closed"] == 1 and out["sign_flag"] == "OPPOSITE"
    code, out = run_json(capsys, "halfline", "demo", "--lambda", "0")
    assert code == 0 and out["sign_flag"] == "UNDEFINED"


def test_halfline_beta_sweep(capsys):
    code, out = run(capsys, "--format", "csv", "halfline", "beta-sweep", "--from", "-50", "--to", "0.99", "--steps", "100")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "lambda,beta_closed,beta_general,abs_diff" and len(lines) == 101
    code, out = run_json(capsys, "halfline", "beta-sweep", "--endpoint")
    assert code == 0 and "not observed" in out["note"] and len(out["rows"]) == 7


def test_halfline_engineer(capsys):
    code, out = run_json(capsys, "halfline", "engineer", "--copies", "2", "--targets", "0.75,-3", "--mixing")
    assert code == 0 and out["certificate"]["passed"]
    assert out["parameter_spectrum"] == pytest.approx([-2, 1], abs=1e-12)
    code, _ = run(capsys, "halfline", "engineer", "--copies", "1", "--targets", "0.75,0.5")
    assert code == 1


def test_oracle_selftest(capsys):
    code, out = run_json(capsys, "oracle-selftest", "--count", "5")
    assert code == 0 and out["failures"] == []
    code, out = run_json(capsys, "oracle-selftest", "--count", "5", "--inject-fault")
    assert code == 1 and out["failures"]


def test_make_problem(capsys, tmp_path):
    code, out = run_json(capsys, "make-problem", "random", "--dim", "6", "--deficiency", "2")
    assert code == 0
    path = tmp_path / "p.json"
    path.write_text(json.dumps(out))
    p = problem_from_json(path)
    assert p.dim == 6 and p.deficiency_index == 2


def test_output_file(capsys, tmp_path):
    out = tmp_path / "demo.json"
    code, printed = run(capsys, "--out", str(out), "halfline", "demo")
    assert code == 0 and printed == ""
    assert json.loads(out.read_text())["beta_closed"] == 1


@pytest.mark.parametrize(
    "argv",
    [
        ("halfline", "demo", "--seed", "7"),
        ("oracle-selftest", "--count", "3"),
        ("halfline", "engineer", "--copies", "3", "--targets", "0.5,0.5,-1", "--mixing"),
    ],
)
def test_output_is_deterministic(capsys, argv):
    _, first = run(capsys, *argv)
    _, second = run(capsys, *argv)
    assert first == second and first


# ---------------------------------------------------------------------------
# exit codes


def test_parse_errors(capsys, tmp_path, problems):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["check-gap", str(bad)]) == 2
    assert cli.main(["check-gap", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["no-such-command"]) == 2
    assert cli.main(["adjoint", problems["t2"], "--psi", "[1, 1]"]) == 2
    assert cli.main(["halfline", "engineer", "--targets", "a,b"]) == 2
    capsys.readouterr()


def test_validation_error(capsys, tmp_path):
    data = problem_to_json(kvb_core.toy_t2())
    # a non-Hermitian S_D
    data["s_d"][0][1] = [5.0, 0.0]
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    assert cli.main(["check-gap", str(path)]) == 3
    capsys.readouterr()


def test_pipeline_refusals_exit_one(capsys, problems, tmp_path):
    targets = tmp_path / "targets.json"
    targets.write_text(json.dumps({"lambdas": [0.5, 0.5]}))
    assert cli.main(["engineer", problems["t2"], str(targets)]) == 1
    targets.write_text(json.dumps({"lambdas": [7.0]}))
    assert cli.main(["engineer", problems["t2"], str(targets)]) == 1
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    capsys.readouterr()
