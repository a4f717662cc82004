import csv
import json

import pytest

from quartz.cli import main
from quartz.io import synth_instance, write_libsvm


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_example_writes_trace(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", "--loss", "smoothed-hinge", "--gamma", "1",
                       "--lambda", "1e-3", "--sampling", "tau-nice", "--tau", "8",
                       "--epsilon", "1e-9", "--seed", "1", "--out-dir", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "trace_seed1.csv")))
    assert float(rows[-1]["gap"]) <= 1e-9
    summary = json.load(open(tmp_path / "summary.json"))
    assert summary["config"]["seed"] == 1
    assert summary["config"]["lambda"] == 1e-3
    assert summary["runs"][0]["status"] == "converged"
    assert "status=converged" in out


def test_solve_multiple_seeds(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("QUARTZ_THREADS", "2")
    code, _, _ = run(capsys, "solve", "--synth-n", "40", "--synth-d", "10", "--seeds", "3,4",
                     "--sampling", "importance", "--out-dir", str(tmp_path))
    assert code == 0
    assert (tmp_path / "trace_seed3.csv").exists() and (tmp_path / "trace_seed4.csv").exists()
    assert [r["seed"] for r in json.load(open(tmp_path / "summary.json"))["runs"]] == [3, 4]


def test_solve_non_convergence_exit_code(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", "--synth-n", "40", "--synth-d", "10", "--epsilon", "1e-14",
                     "--max-epochs", "1", "--out-dir", str(tmp_path))
    assert code == 3


def test_solve_from_libsvm(tmp_path, capsys):
    data = tmp_path / "d.svm"
    data.write_text("+1 1:1 2:0.5\n-1 2:1 3:-1\n+1 1:0.3 3:2\n-1 1:-1\n")
    code, _, _ = run(capsys, "solve", "--data", str(data), "--normalize", "--loss", "squared-hinge",
                     "--option", "II", "--out-dir", str(tmp_path / "o"))
    assert code == 0
    cfg = json.load(open(tmp_path / "o" / "summary.json"))["config"]
    assert cfg["source"] == {"data": str(data), "normalize": True}


def test_eso_json(tmp_path, capsys):
    code, out, _ = run(capsys, "eso", "--synth-n", "8", "--synth-d", "6", "--sampling",
                       "distributed", "--c", "2", "--tau", "2", "--lambda", "1/sqrt(n)")
    assert code == 0
    report = json.loads(out)
    assert len(report["v"]) == 8 and len(report["p"]) == 8
    assert report["p"] == [0.5] * 8
    assert 0 < report["theta"] <= 0.5
    assert sum(report["omega_histogram"].values()) == 6
    assert report["config"]["lambda"] == pytest.approx(8 ** -0.5)


def test_speedup_fully_sparse_is_tau(tmp_path, capsys):
    out_csv = tmp_path / "s.csv"
    code, _, _ = run(capsys, "speedup", "--sampling", "tau-nice", "--tau-list", "1,2,4,8",
                     "--synth-profile", "fully-sparse", "--synth-n", "32", "--synth-d", "64",
                     "--synth-density", "0.01", "--out", str(out_csv))
    assert code == 0
    rows = list(csv.DictReader(open(out_csv)))
    assert [float(r["theoretical"]) for r in rows] == pytest.approx([1, 2, 4, 8])


def test_speedup_practical_and_report(tmp_path, capsys):
    code, out, _ = run(capsys, "speedup", "--tau-list", "1,4", "--practical", "--synth-n", "32",
                       "--synth-d", "16", "--report", str(tmp_path / "r.json"))
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert float(rows[0]["practical"]) == pytest.approx(1.0)
    assert float(rows[1]["practical"]) > 1.5
    report = json.load(open(tmp_path / "r.json"))
    assert report["config"]["source"]["normalize"] is True
    assert len(report["rows"]) == 2


def test_speedup_distributed_grid(capsys):
    code, out, _ = run(capsys, "speedup", "--sampling", "distributed", "--synth-n", "64",
                       "--c-list", "1,2,4", "--tau-list", "1,2,32")
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert {(r["c"], r["tau"]) for r in rows} == {
        ("1", "1"), ("1", "2"), ("1", "32"), ("2", "1"), ("2", "2"), ("2", "32"),
        ("4", "1"), ("4", "2")}


def test_detect_groups(tmp_path, capsys):
    m = synth_instance(9, 18, 1 / 18, "fully_sparse", seed=2)
    data = tmp_path / "d.svm"
    write_libsvm(data, m)
    part = tmp_path / "p.txt"
    code, out, _ = run(capsys, "detect-groups", "--data", str(data), "--n-features", "18",
                       "--balance", "3", "--out", str(part))
    assert code == 0
    lines = [l.split() for l in part.read_text().splitlines()]
    assert sorted(len(l) for l in lines) == [3, 3, 3]
    code, _, _ = run(capsys, "solve", "--data", str(data), "--n-features", "18", "--sampling",
                     "product", "--partition", str(part), "--out-dir", str(tmp_path / "o"))
    assert code == 0


def test_detect_groups_single_component(tmp_path, capsys):
    code, _, err = run(capsys, "detect-groups", "--synth-profile", "fully-dense", "--synth-n", "5",
                       "--synth-d", "3", "--out", str(tmp_path / "p.txt"))
    assert code == 2
    assert "single connected component" in err


def test_verify(capsys):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    assert out.count("PASS") == 3


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--bogus"])
    assert info.value.code == 1
    assert "usage:" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_inconsistent_flags_are_usage_errors(capsys):
    assert run(capsys, "eso", "--sampling", "serial", "--tau", "3")[0] == 1
    assert run(capsys, "eso", "--sampling", "tau-nice", "--c", "2", "--tau", "2")[0] == 1
    assert run(capsys, "eso", "--sampling", "tau-nice")[0] == 1
    assert run(capsys, "eso", "--lambda", "-1")[0] == 1
    assert run(capsys, "eso", "--sampling", "serial", "--partition", "x.txt")[0] == 1


def test_data_errors(tmp_path, capsys):
    bad = tmp_path / "bad.svm"
    bad.write_text("+1 1:1\n3 1:1\n")
    code, _, err = run(capsys, "solve", "--data", str(bad))
    assert code == 2 and "bad.svm:2" in err
    code, _, _ = run(capsys, "solve", "--data", str(tmp_path / "missing.svm"))
    assert code == 2
    code, _, _ = run(capsys, "eso", "--synth-n", "7", "--sampling", "distributed", "--c", "2")
    assert code == 2
