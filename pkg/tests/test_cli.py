"""End-to-end command-line runs, in process through cli.main."""

import json

import numpy as np
import pytest

from tvfold import cli
from tvfold.checks import CheckResult
from tvfold.harness import COMPARE_COLUMNS, TABLE_COLUMNS


@pytest.fixture
def data_file(tmp_path):
    rng = np.random.Generator(np.random.Philox(2024))
    pts = rng.beta(2.0, 5.0, size=120)
    path = tmp_path / "points.txt"
    np.savetxt(path, pts)
    return path


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# select
# ---------------------------------------------------------------------------

def test_select_reports_json(capsys, data_file):
    code, out, _ = run(capsys, "select", "--input", str(data_file),
                       "--V", "4", "--seed", "1")
    assert code == 0
    rep = json.loads(out)
    assert rep["chosen_label"] == rep["labels"][rep["chosen"]]
    assert rep["telemetry"]["mode"] == "tvf-fast"
    assert rep["estimate"]["kind"] in ("histogram", "kernel", "convex-average")
    # criterion keys are labels of completed members only
    assert set(rep["criterion"]) <= set(rep["labels"])
    assert rep["n"] == 120 and rep["V"] == 4
    lo, hi = rep["support"]
    assert lo < hi


def test_select_fast_and_naive_agree(capsys, data_file):
    picks, tests = [], []
    for mode in ("fast", "naive"):
        code, out, _ = run(capsys, "select", "--input", str(data_file),
                           "--mode", mode, "--V", "3", "--seed", "9")
        assert code == 0
        rep = json.loads(out)
        picks.append(rep["chosen"])
        tests.append(rep["telemetry"]["tests_performed"])
    assert picks[0] == picks[1]
    assert tests[0] <= tests[1]


def test_select_warm_start_none(capsys, data_file):
    code, out, _ = run(capsys, "select", "--input", str(data_file),
                       "--warm-start", "none", "--V", "3")
    assert code == 0
    assert json.loads(out)["telemetry"]["warm_start"] == 0


def test_select_writes_file(tmp_path, capsys, data_file):
    out_path = tmp_path / "report.json"
    code, out, _ = run(capsys, "select", "--input", str(data_file),
                       "--V", "3", "--out", str(out_path))
    assert code == 0 and out == ""
    rep = json.loads(out_path.read_text())
    assert "chosen" in rep


@pytest.mark.parametrize("content,message", [
    ("3.14\n", "two data points"),
    ("1.0\n1.0\n1.0\n", "identical"),
    ("1.0\nnan\n2.0\n", "non-finite"),
])
def test_select_rejects_bad_data(tmp_path, capsys, content, message):
    bad = tmp_path / "bad.txt"
    bad.write_text(content)
    code, _, err = run(capsys, "select", "--input", str(bad))
    assert code == 2
    assert message in err


def test_select_missing_file_exits_2(capsys, tmp_path):
    code, _, err = run(capsys, "select", "--input", str(tmp_path / "nope.txt"))
    assert code == 2
    assert "tvfold: error:" in err


# ---------------------------------------------------------------------------
# simulate / run-table / compare
# ---------------------------------------------------------------------------

def test_simulate_json_shape(capsys):
    code, out, _ = run(capsys, "simulate", "--density", "s1", "--family", "R",
                       "--n", "40", "--V", "2", "--reps", "2", "--seed", "3")
    assert code == 0
    rep = json.loads(out)
    assert rep["method"] == "tvf" and rep["n"] == 40
    assert len(rep["losses"]) == 2
    assert sum(rep["selected_counts"]) == 2


def test_simulate_rejects_list_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[{}, {}]")
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == 2
    assert "single config object" in err


def test_run_table_stdout_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "density": "s1", "family": "R", "n": 40, "V": [2],
        "replications": 5, "seed": 4, "bins": [1, 2],
    }))
    # --reps overrides the config file entry
    code, out, _ = run(capsys, "run-table", "--config", str(cfg),
                       "--reps", "1", "--methods", "tvf", "klvf")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == ",".join(TABLE_COLUMNS)
    assert len(lines) == 3  # header + tvf + klvf
    reps_col = TABLE_COLUMNS.index("reps")
    assert all(line.split(",")[reps_col] == "1" for line in lines[1:])


def test_run_table_file_matches_stdout(tmp_path, capsys):
    argv = ["run-table", "--density", "s1", "--family", "R", "--n", "40",
            "--V", "2", "--reps", "1", "--seed", "6"]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    path = tmp_path / "table.csv"
    code, silent, _ = run(capsys, *argv, "--out", str(path))
    assert code == 0 and silent == ""
    assert path.read_text() == out


def test_compare_stdout(capsys):
    code, out, _ = run(capsys, "compare", "--density", "s1", "--family", "R",
                       "--n", "40", "--V", "2", "--reps", "2", "--seed", "8")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == ",".join(COMPARE_COLUMNS)
    assert len(lines) == 3
    assert lines[1].split(",")[3] == "tvf/klvf"


def test_compare_rejects_malformed_pairs(capsys):
    code, _, err = run(capsys, "compare", "--density", "s1", "--n", "40",
                       "--V", "2", "--reps", "1", "--pairs", "tvf-klvf")
    assert code == 2
    assert "a:b" in err


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def test_check_exit_codes(capsys, monkeypatch):
    ok = lambda: CheckResult(name="ok", passed=True, detail="fine")  # noqa: E731
    bad = lambda: CheckResult(name="bad", passed=False, detail="broken")  # noqa: E731
    monkeypatch.setitem(cli.SUITES, "green", (ok,))
    monkeypatch.setitem(cli.SUITES, "red", (ok, bad))

    code, out, _ = run(capsys, "check", "--suite", "green")
    assert code == 0
    assert "[PASS] ok" in out

    code, out, _ = run(capsys, "check", "--suite", "red")
    assert code == 1
    assert "[FAIL] bad" in out


def test_check_unknown_suite_is_a_usage_error(capsys):
    with pytest.raises(SystemExit):
        cli.main(["check", "--suite", "everything"])
