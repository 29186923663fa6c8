import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from harmonia.cli import run
from harmonia.verify import CHECK_FIELDS, REPORT_SCHEMA, VerifyReport, emit, report_from_json

HALF = "[[0,0.5],[2,0.5]]"


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))


def test_moments(capsys):
    code, out, _ = call(capsys, "moments", "--pmf", HALF)
    assert code == 0
    assert out.strip() == "mean=1 m1=2 m2=2 m0=1 alpha=1"


def test_moments_alpha_none(capsys):
    code, out, _ = call(capsys, "moments", "--pmf", "[[1,0.5],[3,0.5]]")
    assert code == 0 and out.strip().endswith("alpha=none")


def test_pmf_from_file(capsys, tmp_path):
    f = tmp_path / "law.json"
    f.write_text(HALF)
    assert call(capsys, "moments", "--pmf", str(f))[1] == call(capsys, "moments", "--pmf", HALF)[1]


def test_bad_pmf_is_usage_error(capsys):
    code, _, err = call(capsys, "moments", "--pmf", "[[0,0.5],[2,0.6]]")
    assert code == 2 and "error" in err


def test_solve_h_infinite_regime(capsys):
    code, out, err = call(capsys, "solve-h", "--pmf", HALF, "--k", "2")
    assert code == 1 and out == ""
    assert "h(k) infinite" in err


def test_solve_h_table(capsys):
    code, out, _ = call(capsys, "solve-h", "--pmf", "[[1,0.9],[9,0.1]]", "--k-max", "10")
    assert code == 0
    assert "# m1=1.8" in out
    table = rows(out)
    assert [int(r["k"]) for r in table] == list(range(2, 11))
    for r in table:
        assert float(r["lo"]) <= float(r["hi"])
        assert float(r["width"]) == pytest.approx(float(r["hi"]) - float(r["lo"]), abs=1e-15)


def test_seventeen_digits(capsys):
    _, out, _ = call(capsys, "solve-h", "--pmf", HALF, "--k-max", "5")
    assert "5,0.33333333333333331,0.33333333333333331,0" in out
    _, out, _ = call(capsys, "bounds", "--pmf", "[[1,0.9],[9,0.1]]", "--k", "10")
    assert ",0.20000000000000001," in out


def test_gclass_and_curvature(capsys):
    code, out, _ = call(capsys, "gclass", "--pmf", HALF, "--c", "0.5,2")
    assert code == 0
    got = {r["c"]: r["in_class"] for r in rows(out)}
    assert got == {"0.5": "false", "2": "true"}
    code, out, _ = call(capsys, "curvature", "--pmf", HALF, "--tol", "1e-6")
    (r,) = rows(out)
    assert code == 0
    assert float(r["lo"]) <= 1.0 <= float(r["hi"])
    assert float(r["hi"]) - float(r["lo"]) <= 1e-6


def test_bounds(capsys):
    code, out, _ = call(capsys, "bounds", "--pmf", "[[1,0.9],[9,0.1]]", "--k", "6,10")
    assert code == 0
    for r in rows(out):
        assert float(r["lower_iterate"]) <= float(r["lower"]) < float(r["prop71"])
        assert float(r["prop71"]) <= float(r["upper"])


@pytest.mark.parametrize("argv", [
    ["rho", "--pmf", HALF, "--x", "1.5", "--n", "10", "--reps", "10"],
    ["simulate", "--pmf", HALF, "--k0", "3", "--t-grid", "1", "--reps", "10"],
    ["simulate-dt", "--pmf", HALF, "--k0", "3", "--n", "2", "--reps", "10"],
    ["crosscheck", "--pmf", HALF, "--k", "3"],
    ["verify", "--suite", "theorem5"],
])
def test_seed_is_mandatory(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 2 and out == ""
    assert "--seed" in err


def test_usage_errors(capsys):
    assert call(capsys, "verify", "--suite", "bogus", "--seed", "1")[0] == 2
    assert call(capsys, "moments", "--pmf", HALF, "--frobnicate")[0] == 2
    assert call(capsys, "nonsense")[0] == 2
    assert call(capsys)[0] == 2
    assert call(capsys, "--help")[0] == 0


def test_out_file_and_reruns(capsys, tmp_path):
    argv = ["simulate", "--pmf", HALF, "--k0", "3", "--t-grid", "0.5,2", "--reps", "200",
            "--seed", "5"]
    _, first, _ = call(capsys, *argv)
    _, second, _ = call(capsys, *argv)
    assert first == second
    target = tmp_path / "out.csv"
    code, out, _ = call(capsys, *argv, "--out", str(target))
    assert code == 0 and out == ""
    assert target.read_text() == first


def test_threads_flag_and_env(capsys, monkeypatch):
    argv = ["simulate-dt", "--pmf", HALF, "--k0", "3", "--n", "3,6", "--reps", "300", "--seed", "2"]
    _, one, _ = call(capsys, *argv, "--threads", "1")
    _, four, _ = call(capsys, *argv, "--threads", "4")
    monkeypatch.setenv("HARMONIA_THREADS", "3")
    _, env, _ = call(capsys, *argv)
    assert one == four == env


def test_rho_and_crosscheck(capsys):
    code, out, _ = call(capsys, "rho", "--pmf", "[[1,1]]", "--x", "2", "--n", "100", "--reps", "5",
                        "--seed", "1")
    (r,) = rows(out)
    assert code == 0 and float(r["estimate"]) == pytest.approx(103 / 200)
    assert r["stderr"] == "0" and r["diverging"] == "false"
    code, out, _ = call(capsys, "crosscheck", "--pmf", "[[1,1]]", "--k", "3", "--n", "1000",
                        "--reps", "5", "--seed", "1")
    assert code == 0
    assert {r["status"] for r in rows(out)} == {"pass"}


def test_reduce(capsys):
    model = json.dumps({"k0": 3, "segments": [{"duration": "inf", "rate": 2.0, "pmf": HALF}]})
    code, out, _ = call(capsys, "reduce", "--model", model)
    got = json.loads(out)
    assert code == 0
    assert got["segments"][0]["rate"] == 1.0
    assert got["segments"][0]["pmf"] == [[2, 1.0]]


def test_verify_json_validates(capsys):
    code, out, err = call(capsys, "verify", "--suite", "theorem5", "--seed", "1", "--format", "json")
    assert code == 0
    assert "wall time" in err
    doc = json.loads(out)
    jsonschema.validate(doc, REPORT_SCHEMA)
    rep = report_from_json(out)
    assert rep.passed and rep.suite == "theorem5"
    assert emit(rep, "json").decode() == out


def test_verify_csv_failure_exit(capsys):
    code, out, _ = call(capsys, "verify", "--suite", "bernoulli", "--seed", "1")
    assert code == 1
    header = out.splitlines()[0].split(",")
    assert tuple(header) == CHECK_FIELDS
    assert any(r["status"] == "fail" for r in rows(out))


def test_verify_with_pmf(capsys):
    code, out, _ = call(capsys, "verify", "--suite", "theorem6", "--pmf", "[[1,1]]", "--k", "3",
                        "--seed", "3")
    assert code == 0
    assert rows(out)


def test_emit_empty_report():
    text = emit(VerifyReport("empty", 0, []), "csv").decode()
    assert text.strip() == ",".join(CHECK_FIELDS)
    doc = json.loads(emit(VerifyReport("empty", 0, []), "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "harmonia", "moments", "--pmf", HALF],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith("mean=1 ")
