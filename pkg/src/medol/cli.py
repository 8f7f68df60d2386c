"""``medol`` command-line front end.

Subcommands: ``run``, ``topology``, ``eval``, ``compare`` and ``preset``.
Exit status is 0 on success, 1 on a runtime failure and 2 when the input
(config, arguments, files) fails validation. The worker count for a run is
read from ``MEDOL_WORKERS``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import run_dgfm, run_dpsgd
from .config import build, load_config, parse_config, preset_names, preset_text, resolved_text
from .core import run_medol
from .errors import ConstructionError, NonFiniteError, ParameterError, ParseError
from .evaluation import EvalConfig, evaluate_run
from .topology import (erdos_renyi_matrix, load_matrix, ring_matrix, save_matrix, uniform_matrix,
                       validate)

log = logging.getLogger("medol")

TRACE_FIELDS = ("epoch", "round", "solver", "grad_norm", "proxy_norm", "test_acc",
                "disagreement_max", "oracle_calls")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    """Bad command-line input; maps to exit status 2."""


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def format_trace(trace) -> str:
    lines = [",".join(TRACE_FIELDS)]
    for rec in trace:
        lines.append(",".join(_cell(getattr(rec, f)) for f in TRACE_FIELDS))
    return "\n".join(lines) + "\n"


def _summary(result, exp) -> dict:
    recs = [r for r in result.trace if r.grad_norm is not None]
    return {
        "solver": result.solver,
        "K": len(result.candidates),
        "rounds_per_epoch": result.rounds_per_epoch,
        "grad_norms": [r.grad_norm for r in recs],
        "proxy_norms": [r.proxy_norm for r in recs],
        "test_acc": [r.test_acc for r in recs],
        "output_index": result.output_index,
        "oracle_calls": result.oracle_calls,
        "function_evals": result.function_evals,
        "rho": exp.M.rho,
        "consensus_bound": result.consensus_bound,
        "consensus_violations": result.consensus_violations,
        "max_disagreement": result.max_disagreement,
        "epoch_diameters": result.epoch_diameters,
    }


def cmd_run(config: str | None, out: str | None = None, preset: str | None = None) -> int:
    if preset is not None:
        cfg = parse_config(preset_text(preset))
        stem = preset
    else:
        cfg = load_config(config)
        stem = Path(config).stem
    out_dir = Path(out or cfg.get("output", "dir") or Path("runs") / stem)
    exp = build(cfg)
    if exp.run_config is not None:
        result = run_medol(exp.run_config, exp.suite, exp.M, test_set=exp.test_set)
    else:
        runner = run_dpsgd if cfg.solver == "dpsgd" else run_dgfm
        result = runner(exp.baseline_config, exp.suite, exp.M, test_set=exp.test_set)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.csv").write_text(format_trace(result.trace))
    (out_dir / "summary.json").write_text(json.dumps(_summary(result, exp), indent=2) + "\n")
    (out_dir / "resolved_config.ini").write_text(resolved_text(exp))
    np.savetxt(out_dir / "candidates.txt", result.candidates, fmt="%.17g")
    print(f"{result.solver}: {len(result.candidates)} candidates, "
          f"{result.oracle_calls} oracle calls -> {out_dir}")
    return EXIT_OK


def parse_topology_spec(spec: str):
    tokens = spec.split()
    if not tokens:
        raise UsageError("empty topology spec")
    kind, params = tokens[0], {}
    for tok in tokens[1:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise UsageError(f"expected key=value, got {tok!r}")
        params[key] = val
    try:
        if kind == "ring":
            return ring_matrix(int(params["n"]), int(params["m"]))
        if kind == "uniform":
            return uniform_matrix(int(params["n"]))
        if kind in ("erdos", "er"):
            return erdos_renyi_matrix(int(params["n"]), float(params["p"]), int(params.get("seed", 0)))
        if kind == "file":
            return load_matrix(params["path"])
    except KeyError as exc:
        raise UsageError(f"topology {kind!r} needs parameter {exc.args[0]}") from None
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise UsageError(f"bad topology parameter: {exc}") from None
    raise UsageError(f"unknown topology {kind!r}; expected ring, erdos, uniform or file")


def cmd_topology(spec: str, save: str | None = None) -> int:
    M = parse_topology_spec(spec)
    problems = validate(M.weights)
    print(f"n = {M.n}")
    print(f"rho = {M.rho:.17g}")
    for key in ("attempts", "seed_used"):
        if key in M.info:
            print(f"{key} = {M.info[key]}")
    print("validation: " + ("ok" if not problems else "failed (" + ", ".join(problems) + ")"))
    if save:
        save_matrix(M, save)
    return EXIT_OK if not problems else EXIT_INVALID


def cmd_eval(run_dir: str, delta: float, samples: int, k_samples: int = 64, seed: int = 0) -> int:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise UsageError(f"run directory {run_dir} does not exist")
    if not delta > 0:
        raise UsageError(f"--delta must be > 0, got {delta}")
    if samples < 100:
        raise UsageError(f"--samples must be >= 100, got {samples}")
    cfg_path, cand_path = run_dir / "resolved_config.ini", run_dir / "candidates.txt"
    for p in (cfg_path, cand_path):
        if not p.exists():
            raise UsageError(f"{p} is missing; is {run_dir} a finished run?")
    exp = build(load_config(cfg_path))
    cands = np.atleast_2d(np.loadtxt(cand_path, ndmin=2))
    reports, summary = evaluate_run(cands, exp.suite, delta,
                                    EvalConfig(samples=samples, k_samples=k_samples, seed=seed),
                                    exp.test_set)
    payload = {"summary": summary, "candidates": [r.to_dict() for r in reports]}
    (run_dir / "stationarity.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"mean smoothed-gradient norm {summary['smoothed_grad_norm']:.6g}, "
          f"mean min-norm estimate {summary['goldstein_estimate']:.6g}")
    return EXIT_OK


def _read_run(run_dir: Path):
    trace_path = run_dir / "trace.csv"
    if not trace_path.exists():
        raise UsageError(f"{trace_path} is missing")
    with trace_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
            raise UsageError(f"{trace_path} does not have the trace header")
        rows = list(reader)
    T = None
    summary = run_dir / "summary.json"
    if summary.exists():
        T = json.loads(summary.read_text()).get("rounds_per_epoch")
    if T is None:
        T = max((int(r["round"]) for r in rows), default=1)
    return {(int(r["epoch"]) - 1) * T + int(r["round"]): r for r in rows}


def compare_text(run_dirs) -> str:
    """Merge traces into one CSV keyed by global round ``(epoch - 1) * T + round``."""
    if not run_dirs:
        raise UsageError("compare needs at least one run directory")
    labels, tables = [], []
    for d in map(Path, run_dirs):
        label = d.name or str(d)
        while label in labels:
            label += "_"
        labels.append(label)
        tables.append(_read_run(d))
    lengths = {max(t, default=0) for t in tables}
    if len(lengths) > 1:
        log.warning("runs have unequal lengths %s; shorter runs are padded with empty cells",
                    sorted(lengths))
    keys = sorted(set().union(*tables))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["global_round"] + [f"{lab}:{f}" for lab in labels for f in TRACE_FIELDS])
    for key in keys:
        row = [key]
        for t in tables:
            rec = t.get(key)
            row += [rec[f] if rec else "" for f in TRACE_FIELDS]
        writer.writerow(row)
    return buf.getvalue()


def cmd_compare(run_dirs, out: str | None = None) -> int:
    text = compare_text(run_dirs)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_preset(name: str | None = None, out: str | None = None) -> int:
    if name is None:
        print("\n".join(preset_names()))
        return EXIT_OK
    text = preset_text(name)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="medol", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", nargs="?", help="config file (INI)")
    r.add_argument("--preset", help="run a bundled preset instead of a file")
    r.add_argument("--out", help="output directory (default: [output] dir or runs/<name>)")

    t = sub.add_parser("topology", help="build a mixing matrix and print n, rho and validation")
    t.add_argument("spec", nargs="+", help='e.g. "ring n=20 m=7", "erdos n=20 p=0.3 seed=7"')
    t.add_argument("--save", help="write the matrix to this file")

    e = sub.add_parser("eval", help="stationarity metrics for a finished run")
    e.add_argument("run_dir")
    e.add_argument("--delta", type=float, required=True)
    e.add_argument("--samples", type=int, default=1000)
    e.add_argument("--k-samples", type=int, default=64)
    e.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("compare", help="merge run traces on the global round index")
    c.add_argument("run_dirs", nargs="*")
    c.add_argument("--out", help="write the merged CSV here instead of stdout")

    s = sub.add_parser("preset", help="list bundled presets or print one")
    s.add_argument("name", nargs="?")
    s.add_argument("--out")
    return p


def _dispatch(args) -> int:
    if args.command == "run":
        if (args.config is None) == (args.preset is None):
            raise UsageError("give exactly one of a config file or --preset")
        return cmd_run(args.config, args.out, args.preset)
    if args.command == "topology":
        return cmd_topology(" ".join(args.spec), args.save)
    if args.command == "eval":
        return cmd_eval(args.run_dir, args.delta, args.samples, args.k_samples, args.seed)
    if args.command == "compare":
        return cmd_compare(args.run_dirs, args.out)
    return cmd_preset(args.name, args.out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return _dispatch(args)
    except (UsageError, ParameterError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonFiniteError, ConstructionError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
