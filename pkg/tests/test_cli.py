import csv
import json
import logging

import numpy as np
import pytest

from medol.cli import TRACE_FIELDS, compare_text, format_trace, main
from medol.config import build, parse_config, preset_names, preset_text
from medol.core import TraceRecord
from medol.topology import load_matrix

SMALL = """
[experiment]
solver = {solver}
oracle = {oracle}
seed = 1
trace_every = 5

[data]
source = synthetic
samples = 240
dim = 6
separation = 3.0
data_seed = 2
test_fraction = 0.25

[network]
topology = ring
n = 6
m = 3

[schedule]
{schedule}

[eval]
delta = 0.05
"""

MANUAL = "mode = manual\nK = 4\nT = 10\nD = 0.01\neta = 0.001\ndelta_prime = {dp}"


def small_config(tmp_path, solver="medol", oracle="first", schedule=None, name="small.ini"):
    if schedule is None:
        schedule = MANUAL.format(dp=0.05 if oracle == "zero" else 0)
    path = tmp_path / name
    path.write_text(SMALL.format(solver=solver, oracle=oracle, schedule=schedule))
    return path


def run(tmp_path, *args):
    return main([str(a) for a in args])


def test_topology_prints_rho(capsys):
    assert main(["topology", "ring", "n=20", "m=7"]) == 0
    out = capsys.readouterr().out
    rho = float(out.split("rho = ")[1].split()[0])
    assert rho == pytest.approx(0.814, abs=0.001)
    assert "validation: ok" in out
    assert main(["topology", "ring n=20 m=13"]) == 0
    assert float(capsys.readouterr().out.split("rho = ")[1].split()[0]) == pytest.approx(0.44, abs=0.01)
    assert main(["topology", "uniform", "n=5"]) == 0
    assert float(capsys.readouterr().out.split("rho = ")[1].split()[0]) < 1e-12


def test_topology_errors_and_save(tmp_path, capsys):
    assert main(["topology", "ring", "n=20", "m=6"]) == 2
    assert main(["topology", "ring", "n=20"]) == 2
    assert main(["topology", "star", "n=5"]) == 2
    assert main(["topology", "ring", "n20"]) == 2
    target = tmp_path / "m.txt"
    assert main(["topology", "erdos", "n=10", "p=0.5", "seed=3", "--save", str(target)]) == 0
    assert "attempts" in capsys.readouterr().out
    assert load_matrix(target).n == 10


def test_run_writes_artifacts(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    for name in ("trace.csv", "summary.json", "resolved_config.ini", "candidates.txt"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["K"] == 4 and len(summary["grad_norms"]) == 4
    assert summary["consensus_violations"] == 0
    assert np.loadtxt(out / "candidates.txt").shape == (4, 6)
    rows = list(csv.reader((out / "trace.csv").open()))
    assert tuple(rows[0]) == TRACE_FIELDS
    assert len(rows) - 1 == 4 * 2


def test_run_is_deterministic_and_resolved_config_reproduces(tmp_path):
    cfg = small_config(tmp_path, oracle="zero")
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    trace = (tmp_path / "a" / "trace.csv").read_bytes()
    assert trace == (tmp_path / "b" / "trace.csv").read_bytes()
    assert main(["run", str(tmp_path / "a" / "resolved_config.ini"), "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "trace.csv").read_bytes() == trace


def test_run_workers_env_does_not_change_trace(tmp_path, monkeypatch):
    cfg = small_config(tmp_path)
    monkeypatch.setenv("MEDOL_WORKERS", "1")
    assert main(["run", str(cfg), "--out", str(tmp_path / "w1")]) == 0
    monkeypatch.setenv("MEDOL_WORKERS", "4")
    assert main(["run", str(cfg), "--out", str(tmp_path / "w4")]) == 0
    assert (tmp_path / "w1" / "trace.csv").read_bytes() == (tmp_path / "w4" / "trace.csv").read_bytes()


def test_theory_schedule_resolves_to_manual(tmp_path):
    cfg = small_config(tmp_path, schedule="mode = theory\ndelta = 0.2\nrounds = 60\nc_t = 1.0")
    out = tmp_path / "t"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    resolved = parse_config((out / "resolved_config.ini").read_text())
    assert resolved.get("schedule", "mode") == "manual"
    assert resolved.get("provenance", "schedule_mode") == "nonsmooth_first"
    exp = build(resolved)
    assert exp.run_config.T * exp.run_config.K >= 60


@pytest.mark.parametrize("solver", ["dpsgd", "dgfm"])
def test_run_baselines(tmp_path, solver):
    schedule = "rounds = 20\nstep_size = 0.01\neval_every = 10" + ("\ndelta_prime = 0.05" if solver == "dgfm" else "")
    cfg = small_config(tmp_path, solver=solver, schedule=schedule)
    cfg.write_text(cfg.read_text().replace("[schedule]", "[baseline]"))
    out = tmp_path / solver
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["solver"] == solver and len(summary["grad_norms"]) == 2


def test_format_trace_uses_round_trip_floats():
    rec = TraceRecord(1, 2, "medol", 0.1, None, 1 / 3, 2e-17, 40)
    text = format_trace([rec])
    header, row = text.splitlines()
    assert header == ",".join(TRACE_FIELDS)
    cells = row.split(",")
    assert cells[4] == ""
    assert float(cells[5]) == 1 / 3 and cells[5] == "%.17g" % (1 / 3)


def test_eval_on_quadratic_fixture(tmp_path, capsys):
    out = tmp_path / "q"
    assert main(["run", "--preset", "quadratic_fixture", "--out", str(out)]) == 0
    assert main(["eval", str(out), "--delta", "0.1", "--samples", "400"]) == 0
    payload = json.loads((out / "stationarity.json").read_text())
    assert payload["summary"]["smoothed_grad_norm"] < 0.05
    assert len(payload["candidates"]) == 40
    assert main(["eval", str(tmp_path / "missing"), "--delta", "0.1"]) == 2
    assert main(["eval", str(out), "--delta", "0"]) == 2
    assert main(["eval", str(out), "--delta", "0.1", "--samples", "99"]) == 2


def write_trace(d, epochs, T):
    d.mkdir()
    recs = [TraceRecord(k, t, "medol", 1.0 / (k * t), None, None, 0.0, k * t)
            for k in range(1, epochs + 1) for t in range(1, T + 1)]
    (d / "trace.csv").write_text(format_trace(recs))
    (d / "summary.json").write_text(json.dumps({"rounds_per_epoch": T}))


def test_compare(tmp_path, caplog, capsys):
    write_trace(tmp_path / "a", 2, 3)
    write_trace(tmp_path / "b", 2, 3)
    rows = list(csv.reader(compare_text([tmp_path / "a", tmp_path / "b"]).splitlines()))
    assert rows[0][:2] == ["global_round", "a:epoch"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 7))
    assert all(r[1:9] == r[9:] for r in rows[1:])

    write_trace(tmp_path / "c", 1, 3)
    with caplog.at_level(logging.WARNING, logger="medol"):
        rows = list(csv.reader(compare_text([tmp_path / "a", tmp_path / "c"]).splitlines()))
    assert "unequal lengths" in caplog.text
    assert rows[-1][9:] == [""] * len(TRACE_FIELDS)
    assert main(["compare"]) == 2
    assert main(["compare", str(tmp_path / "nowhere")]) == 2


def test_preset_listing_and_printing(tmp_path, capsys):
    assert main(["preset"]) == 0
    listed = capsys.readouterr().out.split()
    assert listed == preset_names() and "ijcnn_first_small" in listed
    target = tmp_path / "p.ini"
    assert main(["preset", "quadratic_fixture", "--out", str(target)]) == 0
    assert target.read_text() == preset_text("quadratic_fixture")
    assert main(["preset", "no_such_preset"]) == 2


@pytest.mark.parametrize("name", [n for n in preset_names() if n != "ijcnn1_real"])
def test_presets_build(name):
    build(parse_config(preset_text(name)))


@pytest.mark.parametrize("edit", [
    lambda s: s.replace("solver = medol", "solver = adam"),
    lambda s: s.replace("m = 3", "m = 4"),
    lambda s: s.replace("K = 4\n", ""),
    lambda s: s.replace("source = synthetic", "source = libsvm\npath = /nonexistent/file"),
    lambda s: s.replace("[experiment]\nsolver = medol\n", "[experiment]\nsolver = medol\nn = 9\n"),
    lambda s: s + "\n[bogus\n",
])
def test_config_validation_errors(tmp_path, edit):
    path = small_config(tmp_path)
    path.write_text(edit(path.read_text()))
    assert main(["run", str(path), "--out", str(tmp_path / "x")]) == 2


def test_run_usage_errors(tmp_path):
    assert main(["run"]) == 2
    assert main(["run", str(tmp_path / "none.ini")]) == 2
    assert main(["bogus"]) == 2
