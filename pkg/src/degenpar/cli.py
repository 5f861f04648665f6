"""Command line: ``degenpar run|solve|classify <config>`` and ``degenpar describe <builtin>``.

Each run writes into ``<out>/<run name>/``: ``partition.csv``, the Fichera
report for Heston runs, per-level solution CSVs and ``trajectory.npy``,
``report.json``/``report.txt``, and ``manifest.json`` with sha256 checksums.
Wall-clock timings go to ``timing.json``, which the manifest leaves out so the
rest stays byte-stable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .fd import TimeStepper, build_grid, solve_terminal_value_problem
from .fichera import heston_beta
from .geometry import AmbiguousFaceError, classify_degenerate_boundary
from .harness import ProblemInstance, RegimeMismatch, check_weak_max_bound, ghost_data_check, sample_c
from .obstacle import check_compatibility, complementarity_residual, solve_obstacle_problem
from .operator import describe
from .suites import SUITES, fichera_suite
from .verdict import VerificationReport, Verdict

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write(path: Path, content, written: list):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(content, np.ndarray):
        with open(path, "wb") as fh:
            np.save(fh, content, allow_pickle=False)
    else:
        path.write_text(content)
    written.append(path)


def _manifest(run_dir: Path, written: list) -> str:
    entries = []
    for p in sorted(written):
        entries.append({"path": str(p.relative_to(run_dir)), "sha256": hashlib.sha256(p.read_bytes()).hexdigest(),
                        "bytes": p.stat().st_size})
    return json.dumps({"artifacts": entries}, indent=2, sort_keys=True) + "\n"


def _suite_verdicts(spec: dict, seed: int, jobs: int) -> list[Verdict]:
    opts = {k: v for k, v in spec.items() if k != "suite"}
    if "seeds" in opts:
        opts["seeds"] = range(seed, seed + int(opts["seeds"]))
    if "resolution" in opts:
        opts["resolution"] = tuple(opts["resolution"])
    return SUITES[spec["suite"]](jobs=jobs, **opts)


def _weak_max_verdicts(inst: ProblemInstance, traj) -> list[Verdict]:
    c_min = inst.tags["c_min"]
    if c_min > 0:
        inst.tags["c0"] = c_min
    out = []
    for item in range(1, 7):
        try:
            out.append(check_weak_max_bound(traj, inst, item))
        except RegimeMismatch:
            continue
    if not out:
        raise ConfigError(f"run {inst.tags['name']!r}: no weak-maximum estimate applies (c_min = {c_min:.3g} < 0)")
    return out


def execute_run(run: RunConfig, out_root: Path, mode: str = "run", strict: bool = False, jobs: int = 1) -> dict:
    """Carry out one run; returns ``{"name", "exit_code", "n_verdicts", "n_failed", "lines"}``."""
    run_dir = out_root / (run.output or run.name)
    written, verdicts, timing = [], [], {}
    summary = {"run": run.name, "seed": run.seed, "mode": mode}
    monotone = None
    t_start = time.perf_counter()
    if run.has_problem:
        op = run.build_operator()
        dom = run.domain
        part = classify_degenerate_boundary(op, dom, strict=strict)
        _write(run_dir / "partition.csv", part.to_csv(dom), written)
        summary.update(operator=op.name, degenerate_faces=sorted(part.deg), ambiguous_faces=sorted(part.ambiguous))
        if run.is_heston:
            rep = heston_beta(run.heston_params(), dom)
            _write(run_dir / "fichera.csv", rep.to_csv(), written)
            _write(run_dir / "fichera.txt", rep.to_text(), written)
            summary["beta"] = rep.beta
        if mode != "classify":
            grid = build_grid(dom, part, run.shape, run.n_levels)
            data = run.build_data()
            t0 = time.perf_counter()
            if data.psi is not None:
                res = solve_obstacle_problem(op, grid, data, run.solver, run.psor)
                traj = res.trajectory
            else:
                res = None
                traj = solve_terminal_value_problem(op, grid, data.without_obstacle(), run.solver)
            timing["solve"] = time.perf_counter() - t0
            monotone = bool(traj.stats.get("monotone"))
            summary.update(grid=list(grid.shape), levels=grid.n_levels, node_counts=grid.counts())
            for lv in range(grid.n_levels):
                _write(run_dir / "solution" / f"level_{lv:04d}.csv", traj.level(lv).to_csv(), written)
            _write(run_dir / "trajectory.npy", traj.values, written)
            if mode == "run":
                c_min, c_max = sample_c(op, grid)
                inst = ProblemInstance(op, dom, grid, data, run.seed, "config",
                                       {"c_min": c_min, "c_max": c_max, "name": run.name})
                for check in run.checks:
                    if check == "monotone":
                        verdicts.append(TimeStepper(op, grid, run.solver).monotonicity(0))
                    elif check == "fichera":
                        verdicts += fichera_suite({run.name: run.heston_params()}, dom=dom)[0]
                    elif check == "ghost_data":
                        verdicts += ghost_data_check(inst, run.solver)
                    elif check == "obstacle_complementarity":
                        if res is None:
                            raise ConfigError(f"run {run.name!r}: obstacle_complementarity needs data.psi")
                        v1, _, v3 = complementarity_residual(res)
                        verdicts.append(check_compatibility(data, grid))
                        verdicts.append(Verdict("obstacle.above_psi", "u >= psi on free nodes", v1, 0.0))
                        verdicts.append(Verdict("obstacle.complementarity", "max |min(Lu - f, u - psi)|", v3, 1e-8))
                    elif check == "weak_max":
                        verdicts += _weak_max_verdicts(inst, traj)
    if mode == "run":
        for check in run.checks:
            if isinstance(check, dict):
                t0 = time.perf_counter()
                verdicts += _suite_verdicts(check, run.seed, jobs)
                timing[f"suite:{check['suite']}"] = time.perf_counter() - t0
    lines = []
    if verdicts:
        report = VerificationReport(summary, verdicts, monotone, time.perf_counter() - t_start)
        _write(run_dir / "report.json", report.to_json() + "\n", written)
        _write(run_dir / "report.txt", report.to_text(), written)
        code = report.exit_code
        lines = [v.line() for v in verdicts if not v.passed]
    else:
        code = EXIT_OK
    _write(run_dir / "manifest.json", _manifest(run_dir, written), [])
    timing["total"] = time.perf_counter() - t_start
    (run_dir / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return {"name": run.name, "exit_code": code, "n_verdicts": len(verdicts),
            "n_failed": sum(not v.passed for v in verdicts), "lines": lines}


def _execute(args):
    return execute_run(*args)


def _cmd_config(args, mode: str) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    runs = cfg.runs if args.seed is None else [replace(r, seed=args.seed) for r in cfg.runs]
    jobs = args.jobs if args.jobs is not None else cfg.jobs
    out = Path(args.out)
    try:
        if jobs > 1 and len(runs) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_execute, [(r, out, mode, args.strict, 1) for r in runs]))
        else:
            results = [execute_run(r, out, mode, args.strict, jobs) for r in runs]
    except (AmbiguousFaceError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code = EXIT_OK
    for r in results:
        status = "ok" if r["exit_code"] == 0 else "FAILED"
        print(f"{r['name']}: {status} ({r['n_verdicts'] - r['n_failed']}/{r['n_verdicts']} verdicts passed)")
        for line in r["lines"]:
            print("  " + line)
        code = max(code, r["exit_code"])
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degenpar", description="Degenerate parabolic solvers and verification suites")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("run", "solve and run all configured checks"), ("solve", "solve only, no checks"),
                        ("classify", "boundary partition and Fichera report only")):
        s = sub.add_parser(verb, help=help_)
        s.add_argument("config")
        s.add_argument("--out", default="runs", help="output root (default: runs)")
        s.add_argument("--seed", type=int, default=None, help="override every run's seed")
        s.add_argument("--jobs", type=int, default=None, help="parallel workers (default: config value)")
        s.add_argument("--strict", action="store_true", help="ambiguous boundary classification is fatal")
    d = sub.add_parser("describe", help="print a builtin operator's coefficients")
    d.add_argument("name")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "describe":
        try:
            print(describe(args.name).rstrip("\n"))
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_USAGE
        return EXIT_OK
    return _cmd_config(args, args.verb)


if __name__ == "__main__":
    sys.exit(main())
