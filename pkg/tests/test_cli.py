import json

import numpy as np
import pytest
from jsonschema import Draft202012Validator
from numpy.testing import assert_allclose
from scipy import stats

from asymindep import cli
from asymindep.cli import main
from asymindep.empirical import SampleMatrix, read_diagonal_csv
from asymindep.exceptions import FitError, PrecisionError
from asymindep.gaussian import example_matrix
from asymindep.schemas import CORRELATION_SCHEMA, RATES_SCHEMA, REPORT_SCHEMA, TAILORDER_SCHEMA


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def example_file(tmp_path):
    doc = {"dim": 3, "rho": example_matrix(0.6).tolist()}
    Draft202012Validator(CORRELATION_SCHEMA).validate(doc)
    path = tmp_path / "example.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_analyze_gaussian_file(capsys, example_file):
    rep = run_json(capsys, "analyze", "gaussian", "--matrix", example_file)
    Draft202012Validator(REPORT_SCHEMA).validate(rep)
    assert rep["pairwise"] and not rep["mutual"]
    assert rep["details"]["failing_subsets"] == ["1,2,3"]


def test_analyze_gaussian_keyword(capsys):
    rep = run_json(capsys, "analyze", "gaussian", "--matrix", "example", "--rho", "0.3")
    Draft202012Validator(REPORT_SCHEMA).validate(rep)
    assert rep["mutual"]


def test_analyze_mo_equal(capsys):
    rep = run_json(capsys, "analyze", "mo", "--family", "mo-equal", "--dim", "3")
    Draft202012Validator(REPORT_SCHEMA).validate(rep)
    assert rep["mutual"]
    assert rep["details"]["exponents"]["1,2"] == "3/2"


def test_analyze_mo_rates_file(capsys, tmp_path):
    doc = {"dim": 2, "lambda": {"1": 1, "2": 2, "1,2": 1}}
    Draft202012Validator(RATES_SCHEMA).validate(doc)
    path = tmp_path / "rates.json"
    path.write_text(json.dumps(doc))
    rep = run_json(capsys, "analyze", "mo", "--rates", str(path))
    assert rep["mutual"]
    # Delta = (2, 3): ex({1,2}) = 1/2 + 2/3 + max(1/2, 1/3)
    assert rep["details"]["exponents"]["1,2"] == "5/3"


def test_analyze_acig(capsys):
    rep = run_json(capsys, "analyze", "archimedean", "--family", "acig", "--alpha", "2.5", "--dim", "4")
    Draft202012Validator(REPORT_SCHEMA).validate(rep)
    assert rep["max_k"] == 3
    assert rep["details"]["kappa_by_size"] == {"2": 2.0, "3": 2.5, "4": 2.5}


def test_analyze_archimedean_generator(capsys):
    rep = run_json(capsys, "analyze", "archimedean", "--family", "log-generator", "--theta", "1", "--dim", "3")
    Draft202012Validator(REPORT_SCHEMA).validate(rep)
    assert rep["details"]["verdict"] == "pairwise-only"
    assert rep["max_k"] == 2


def test_out_keeps_stdout_empty(capsys, tmp_path):
    out = tmp_path / "rep.json"
    code, stdout, _ = run(capsys, "analyze", "counterexample", "--out", str(out))
    assert code == 0 and stdout == ""
    rep = json.loads(out.read_text())
    Draft202012Validator(REPORT_SCHEMA).validate(rep)
    assert rep["pairwise"] and not rep["mutual"]


def test_diag_independence(capsys):
    code, out, _ = run(capsys, "diag", "independence", "--dim", "2", "--subset", "1,2", "--u-min", "1e-4", "--u-max", "0.1")
    assert code == 0
    rows = read_diagonal_csv(out)
    assert len(rows) == 10
    for u, v, _ in rows:
        assert_allclose(v, u**2, rtol=1e-12)


def test_diag_counterexample(capsys):
    code, out, _ = run(capsys, "diag", "counterexample", "--subset", "1,2")
    assert code == 0
    for u, v, _ in read_diagonal_csv(out):
        assert_allclose(v, (np.sqrt(1 + 3 * u) - 1) ** 2, rtol=1e-10)


def test_diag_mo_proportional(capsys, tmp_path):
    out = tmp_path / "d.csv"
    code, stdout, _ = run(capsys, "diag", "mo", "--family", "mo-proportional", "--dim", "3", "--subset", "1,2", "--out", str(out))
    assert code == 0 and stdout == ""
    for u, v, _ in read_diagonal_csv(out.read_text()):
        assert_allclose(v, u ** (11 / 8), rtol=1e-10)


def test_diag_many_subsets_to_files(capsys, tmp_path):
    out = tmp_path / "diag.csv"
    code, stdout, _ = run(capsys, "diag", "mo", "--family", "mo-equal", "--dim", "3", "--subset", "1,2;1,2,3", "--out", str(out))
    assert code == 0 and stdout == ""
    assert sorted(p.name for p in tmp_path.iterdir()) == ["diag_S1-2-3.csv", "diag_S1-2.csv"]


def test_diag_precision_failure_is_recorded(capsys, tmp_path):
    out = tmp_path / "g.csv"
    code, _, err = run(
        capsys, "diag", "archimedean", "--family", "acig", "--alpha", "2.5", "--dim", "3",
        "--subset", "1,2,3", "--u-min", "1e-7", "--u-max", "1e-1", "--points", "7", "--precision", "1e-3",
        "--out", str(out),
    )
    assert code == 0
    rows = read_diagonal_csv(out.read_text())
    # quadrature error ~1e-8 swamps the alternating sum once the value drops below ~1e-5
    assert [v is not None for _, v, _ in rows] == [True, True] + [False] * 5
    assert (tmp_path / "g.csv.warnings.txt").read_text().strip()
    assert "warning" in err


def test_diag_json(capsys):
    doc = run_json(capsys, "diag", "independence", "--dim", "2", "--format", "json", "--points", "3")
    assert [round(r["u"] / r["value"] ** 0.5, 10) for r in doc["diagonals"]["1,2"]] == [1.0, 1.0, 1.0]


def test_sample_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        code, _, _ = run(capsys, "sample", "gaussian", "--matrix", "example", "--rho", "0.3", "--n", "1000", "--seed", "7", "--out", str(path))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    s = SampleMatrix.from_csv(a.read_text())
    assert s.seed == 7 and s.values.shape == (1000, 3)


def test_sample_mo(capsys):
    code, out, _ = run(capsys, "sample", "mo", "--family", "mo-equal", "--dim", "3", "--n", "10")
    assert code == 0
    s = SampleMatrix.from_csv(out)
    assert s.values.shape == (10, 3)
    assert np.all((s.values >= 0) & (s.values <= 1))


def test_sample_clayton_uniform(capsys):
    code, out, _ = run(capsys, "sample", "archimedean", "--family", "clayton", "--theta", "1", "--dim", "2", "--n", "100000")
    assert code == 0
    s = SampleMatrix.from_csv(out)
    for j in range(2):
        assert stats.kstest(s.values[:, j], "uniform").pvalue > 0.01


def test_sample_without_sampler(capsys):
    code, out, err = run(capsys, "sample", "archimedean", "--family", "frank", "--theta", "1", "--dim", "3")
    assert code == 2 and out == ""
    assert "sampler" in err


def test_tailorder_example(capsys):
    doc = run_json(capsys, "tailorder", "gaussian", "--matrix", "example", "--rho", "0.3", "--subset", "1,2,3")
    Draft202012Validator(TAILORDER_SCHEMA).validate(doc)
    (r,) = doc["results"]
    assert_allclose(r["kappa_exact"], (3 - (4 * np.sqrt(2) - 1) * 0.3) / (1 + 0.3 - 4 * 0.09), rtol=1e-9)
    assert abs(r["kappa_fitted"] - r["kappa_exact"]) < 0.05


def test_tailorder_identity_and_pair(capsys):
    doc = run_json(capsys, "tailorder", "gaussian", "--matrix", "identity", "--dim", "3", "--subset", "1,2,3")
    Draft202012Validator(TAILORDER_SCHEMA).validate(doc)
    assert doc["results"][0]["kappa_exact"] == 3.0
    doc = run_json(capsys, "tailorder", "gaussian", "--matrix", "pair", "--rho", "0.5")
    assert_allclose(doc["results"][0]["kappa_exact"], 4 / 3, rtol=1e-12)


def test_tailorder_csv(capsys):
    code, out, _ = run(capsys, "tailorder", "mo", "--family", "mo-equal", "--dim", "3", "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "subset,kappa_exact,active_set,log_exponent,kappa_fitted,fit_rms"
    assert len(lines) == 1 + 4


def test_classify_numeric(capsys):
    rep = run_json(capsys, "classify", "counterexample", "--strategy", "numeric")
    Draft202012Validator(REPORT_SCHEMA).validate(rep)
    assert rep["pairwise"] and not rep["mutual"]
    assert all("trace" in e for e in rep["evidence"])


def test_classify_max_k(capsys):
    rep = run_json(capsys, "classify", "independence", "--dim", "4", "--max-k", "3")
    assert rep["max_k"] == 3 and not rep["mutual"]


def test_malformed_json(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"dim": 3,\n "rho": [1, 2,, 3]}')
    code, out, err = run(capsys, "analyze", "gaussian", "--matrix", str(path))
    assert code == 2 and out == ""
    assert "line 2" in err and "column" in err


def test_invalid_matrix(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"dim": 2, "rho": [[1, 0.5], [0.4, 1]]}))
    assert run(capsys, "analyze", "gaussian", "--matrix", str(path))[0] == 2


def test_subset_all_limit(capsys):
    code, _, err = run(capsys, "diag", "independence", "--dim", "13", "--subset", "all")
    assert code == 2
    assert "12" in err


def test_uncovered_component_exit_code(capsys, tmp_path):
    # Delta_2 = 0 passes validation of the map but fails model construction
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"dim": 2, "lambda": {"1": 1, "2": 0, "1,2": 0}}))
    assert run(capsys, "analyze", "mo", "--rates", str(path))[0] == 2


@pytest.mark.parametrize("exc", [PrecisionError("target missed"), FitError("collinear"), ArithmeticError("gap")])
def test_numeric_failure_exit_code(capsys, monkeypatch, exc):
    def boom(args, model):
        raise exc

    monkeypatch.setattr(cli, "cmd_analyze", boom)
    code, out, err = run(capsys, "analyze", "independence")
    assert code == 3 and out == ""
    assert "numeric failure" in err


def test_argparse_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "gaussian", "--precision", "-1"])
    assert exc.value.code == 2
