import subprocess
import sys

import pytest

from evag.benchmarks import load_instance, make_instance, ProblemKind
from evag.cli import main
from evag.experiment import RUN_COLUMNS, read_results_csv

FAST = ["--dim", "4", "--population", "16", "--budget", "2000", "--runs", "2", "--quiet"]


def test_run_writes_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["run", "--nodes", "2", *FAST, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(RUN_COLUMNS) and len(lines) == 3


def test_run_to_stdout(capsys):
    assert main(["run", "--model", "island", *FAST]) == 0
    out = capsys.readouterr().out
    assert out.startswith("model,") and out.count("\n") == 3


def test_progress_lines_on_stderr(capsys):
    args = [a for a in FAST if a != "--quiet"]
    assert main(["run", *args]) == 0
    err = capsys.readouterr().err
    assert err.count("run=") == 2


def test_sweep_row_count(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--nodes-from", "1", "--nodes-to", "8", *FAST, "--out", str(out)]) == 0
    rows = read_results_csv(out)
    assert len(rows) == 8 * 2
    assert sorted({r.nodes for r in rows}) == list(range(1, 9))


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\nmodel = island\nnodes = 2\nbudget = 999999\ndim=4\npopulation = 16\nruns = 1\n")
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(cfg), "--budget", "1000", "--quiet", "--out", str(out)]) == 0
    (r,) = read_results_csv(out)
    assert r.model == "island" and r.nodes == 2 and 1000 <= r.evaluations_used < 1008


def test_summarize(tmp_path, capsys):
    runs = tmp_path / "r.csv"
    main(["sweep", "--nodes-from", "1", "--nodes-to", "2", *FAST, "--out", str(runs)])
    assert main(["summarize", "--in", str(runs)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("model,problem,nodes,runs,best_mean") and len(lines) == 3


def test_instance_export(tmp_path, capsys):
    out = tmp_path / "i.txt"
    assert main(["instance", "export", "--problem", "rastrigin", "--dim", "3", "--seed", "5", "--out", str(out)]) == 0
    assert load_instance(out) == make_instance(ProblemKind.ShiftedRotatedRastrigin, 3, 5)
    assert main(["instance", "export", "--problem", "schwefel", "--dim", "2"]) == 0
    assert "kind Schwefel213" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["run", "--model", "ga"],
        ["run", "--problem", "ackley"],
        ["run", "--nodes", "0"],
        ["run", "--nodes", "x"],
        ["run", "--migration-freq", "30"],
        ["run", "--config", "/nonexistent/file.cfg"],
        ["sweep", "--nodes-from", "5", "--nodes-to", "2"],
        ["summarize", "--in", "/nonexistent.csv"],
        ["summarize", "--in", "x.csv", "--group-by", "colour"],
        ["instance", "export", "--problem", "sphere", "--no-rotation", "--dim", "0"],
    ],
)
def test_errors_are_one_line(argv, capsys):
    assert main(argv) != 0
    err = capsys.readouterr().err.strip()
    assert err.startswith("evag: error:") and "\n" not in err


def test_bad_config_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nodes 4\n")
    assert main(["run", "--config", str(cfg)]) == 2
    cfg.write_text("colour = red\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown option" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    assert main(["run", *FAST, "--out", str(tmp_path / "no" / "r.csv")]) == 1
    assert "no/r.csv" in capsys.readouterr().err


def test_event_log(tmp_path):
    pattern = str(tmp_path / "ev-{run}.log")
    assert main(["run", "--nodes", "2", *FAST, "--budget", "30000", "--event-log", pattern]) == 0
    log = (tmp_path / "ev-1.log").read_text().splitlines()
    assert log and all(len(line.split()) == 6 for line in log)
    assert any(" migrant " in line for line in log)


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, "-m", "evag", "run", *FAST, "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == 3
