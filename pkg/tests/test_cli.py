import json

import numpy as np
import pytest

from cyclesync import io
from cyclesync.cli import EXIT_ASSERTION, EXIT_ERROR, EXIT_OK, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_location_pipeline(tmp_path, capsys):
    scn = tmp_path / "scn"
    code, out = run(capsys, "generate", "--n", 25, "--p", 0.6, "--q", 0.2, "--seed", 1, "--out", scn)
    assert code == EXIT_OK and "wrote" in out.out
    est = tmp_path / "est.json"
    code, _ = run(capsys, "solve-location", "--graph", scn / io.GRAPH_FILE, "--dirs", scn / io.DIRECTIONS_FILE,
                  "--out", est, "--set", "solver.t_max=20")
    assert code == EXIT_OK
    doc = io.read_estimate(est)
    assert doc["config"]["t_max"] == 20 and len(doc["edges"]["s"]) == len(doc["edges"]["i"])
    code, out = run(capsys, "evaluate", "--est", est, "--gt", scn)
    assert code == EXIT_OK
    report = json.loads(out.out)
    assert report["median"] < 1e-4 and report["exact_recovery"]


def test_rotation_pipeline(tmp_path, capsys):
    scn = tmp_path / "rot"
    assert run(capsys, "generate", "--kind", "rotation", "--n", 20, "--p", 0.6, "--q", 0.1, "--out", scn)[0] == 0
    for extra in ([], ["--baseline"]):
        est = tmp_path / f"est{len(extra)}.json"
        code, _ = run(capsys, "solve-rotation", "--graph", scn / io.GRAPH_FILE,
                      "--rots", scn / io.ROTATIONS_FILE, "--out", est, *extra)
        assert code == EXIT_OK
        code, out = run(capsys, "evaluate", "--est", est, "--gt", scn)
        report = json.loads(out.out)
        assert code == EXIT_OK and report["kind"] == "rotations" and report["max_deg"] >= 0
    assert json.loads(out.out)["median_deg"] >= 0


def test_sweep_to_stdout(tmp_path, capsys):
    agg = tmp_path / "agg.json"
    code, out = run(capsys, "sweep", "--param", "q", "--values", "0,0.1", "--seeds", 2,
                    "--set", "scenario.n=20", "--aggregates", agg)
    assert code == EXIT_OK
    lines = out.out.strip().splitlines()
    assert lines[0].startswith("method,param,value") and len(lines) == 5
    assert len(json.loads(agg.read_text())["aggregates"]) == 2


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "g.txt"
    bad.write_text("3 1\n0 1 2\n")
    code, out = run(capsys, "solve-location", "--graph", bad, "--dirs", bad, "--out", tmp_path / "x")
    assert code == EXIT_ERROR and ":2:" in out.err
    code, out = run(capsys, "sweep", "--set", "solver.nope=1")
    assert code == EXIT_ERROR and "unknown config key" in out.err
    code, _ = run(capsys, "sweep", "--set", "scenario.n=10", "--out", tmp_path / "no" / "x.csv")
    assert code == EXIT_ERROR


def test_theorem_check_exit_codes(capsys):
    code, out = run(capsys, "theorem-check", "--n", 40, "--q", 0.3, "--max-attempts", 1)
    assert code == EXIT_OK and json.loads(out.out)["outcome"] == "hypotheses unmet"
    code, out = run(capsys, "theorem-check", "--planted", "--n", 100, "--alpha", 1.0)
    assert code == EXIT_OK and json.loads(out.out)["outcome"] == "passed"


def test_theorem_check_failure_exit_code(monkeypatch, capsys):
    from cyclesync import cli
    from cyclesync.harness import TheoremReport

    monkeypatch.setattr(cli, "theorem_check", lambda *a: TheoremReport("failed", 0, 1, violations=1))
    code, _ = run(capsys, "theorem-check")
    assert code == EXIT_ASSERTION


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
