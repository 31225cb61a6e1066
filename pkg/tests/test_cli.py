import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cramp.cli import main
from cramp.dataio import ExpressionMatrix, write_matrix


@pytest.fixture
def data_file(tmp_path):
    g = np.random.default_rng(21)
    X = np.vstack([g.standard_normal((20, 30)), 2.0 * g.standard_normal((20, 30))])
    m = ExpressionMatrix(X, [f"g{j}" for j in range(30)], [f"s{i}" for i in range(40)],
                         ["A"] * 20 + ["B"] * 20)
    path = tmp_path / "expr.csv"
    write_matrix(path, m)
    return path


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


FAST = ["-k", "3", "-K", "10", "--null-reps", "100"]


def test_test1(data_file, capsys):
    code, out, _ = _run(["test1", "-i", data_file, *FAST, "--method", "cramp,czz,lw"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert [r["method"] for r in doc["results"]] == ["cramp-lrt-identity", "czz", "lw"]
    assert doc["provenance"]["input_digest"] and doc["schema"] == "cramp.report/1"


def test_test2_groups_csv(data_file, capsys):
    code, out, _ = _run(["test2", "-i", data_file, "--groups", "A,B", *FAST,
                         "--method", "cramp-box,lc,clx", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["method"] for r in rows] == ["cramp-box", "lc", "clx"]
    assert rows[0]["reject"] == "True"


def test_test2_two_files(tmp_path, data_file, capsys):
    other = tmp_path / "other.csv"
    other.write_text(data_file.read_text().replace("g0", "h0"))
    code, _, err = _run(["test2", "-i", data_file, "--input2", other, *FAST], capsys)
    assert code == 3 and "variables" in err
    code, out, _ = _run(["test2", "-i", data_file, "--input2", data_file, *FAST], capsys)
    assert code == 0 and json.loads(out)["results"][0]["reject"] is False


def test_nulldist(capsys, tmp_path):
    code, out, _ = _run(["nulldist", "--n", 15, "--p", 40, *FAST, "--cache-dir", tmp_path], capsys)
    assert code == 0
    doc = json.loads(out)
    assert 0 < doc["critical_value"] < 1
    assert list(tmp_path.glob("null-*.npz"))


def test_simulate(tmp_path, capsys):
    grid = tmp_path / "grid.ini"
    grid.write_text("[study]\nseed=1\nreplicates=5\n[scenario a]\nn=15\np=20\n[method czz]\n")
    out_path = tmp_path / "rows.csv"
    code, _, _ = _run(["simulate", "-c", grid, "-o", out_path], capsys)
    assert code == 0
    rows = list(csv.DictReader(out_path.open()))
    assert rows[0]["method"] == "czz" and rows[0]["replicates"] == "5"


def test_genes_small(data_file, capsys):
    code, out, _ = _run(["genes", "-i", data_file, "--groups", "A,B", "--top", 25, *FAST,
                         "--method", "cramp-box,schott", "--split-reps", 5], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["provenance"]["genes_kept"] == 25
    assert doc["bootstrap"]["replicates"] == 5


@pytest.mark.parametrize("argv", [
    ["test1", "-i", "X", "--method", "nope"],
    ["test2", "-i", "X"],
    ["test1", "-i", "X", "--alpha", "2"],
    ["test1", "-i", "X", "--method", "box-m"],
])
def test_config_errors_exit_2(argv, data_file, capsys):
    argv = [str(data_file) if a == "X" else a for a in argv]
    code, _, err = _run(argv + FAST, capsys)
    assert code == 2 and "configuration error" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["test1"])
    assert exc.value.code == 2


@pytest.mark.parametrize("content", ["sample,g1\na,zz\n", None])
def test_data_errors_exit_3(tmp_path, content, capsys):
    path = tmp_path / "bad.csv"
    if content is not None:
        path.write_text(content)
    code, _, err = _run(["test1", "-i", path, *FAST], capsys)
    assert code == 3 and "data error" in err


def test_degenerate_request_exit_3(data_file, capsys):
    code, _, _ = _run(["test1", "-i", data_file, "-k", 35, "-K", 5, "--null-reps", 100], capsys)
    assert code == 3


def test_provenance_rerun_reproduces(data_file, tmp_path):
    argv = ["test2", "-i", str(data_file), "--groups", "A,B", *FAST, "--seed", "4",
            "--method", "cramp-box,cramp-wald,schott", "--strategy", "monte-carlo", "--mc-reps", "50",
            "--no-cache"]
    first = subprocess.run([sys.executable, "-m", "cramp.cli", *argv], capture_output=True,
                           text=True, check=True)
    doc = json.loads(first.stdout)
    again = subprocess.run([sys.executable, "-m", "cramp.cli", *doc["provenance"]["argv"]],
                           capture_output=True, text=True, check=True)
    assert json.loads(again.stdout)["results"] == doc["results"]
