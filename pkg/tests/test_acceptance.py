"""Acceptance criteria 1 to 10, each at its stated tolerance.

Every test records one pass/fail line which the terminal summary prints under
"acceptance criteria" (see conftest.py).
"""

import os
import time
from collections import Counter

from degenpar.harness import C_BOUNDED_BELOW, C_NONNEG, C_POS
from degenpar.suites import (boundary_condition_suite, bounds_suite, comparison_suite, convergence_suite,
                             fichera_suite, ghost_suite, hopf_suite, obstacle_suite, strong_max_suite, wmp_suite)
from degenpar.verdict import Verdict

JOBS = max(1, min(4, os.cpu_count() or 1))


def _record(lines, number, title, verdicts, elapsed, budget=None, extra=""):
    failed = [v for v in verdicts if not v.passed]
    in_time = budget is None or elapsed < budget
    ok = bool(verdicts) and not failed and in_time
    kinds = Counter(v.property_id for v in verdicts)
    worst = max((v.violation for v in verdicts), default=float("nan"))
    timing = f"{elapsed:.2f}s" + (f" (< {budget:g}s)" if budget is not None else "")
    msg = (f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  {title}: {len(verdicts) - len(failed)}/"
           f"{len(verdicts)} verdicts, {len(kinds)} properties, worst violation {worst:.2e}, {timing}")
    if extra:
        msg += f"; {extra}"
    if failed:
        msg += f"; first failure: {failed[0].line().strip()}"
    lines[number] = msg
    return ok, failed, in_time


def _timed(fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t0


def test_fichera_reproduction(acceptance_lines):
    (verdicts, reports), dt = _timed(fichera_suite)
    unique = sorted({id(r): r for r in reports.values()}.values(), key=lambda r: r.beta)
    floors = [r.fb_floor for r in unique]
    # example parameter sets give fb = -0.04, 0, 0.04 on the variance floor
    err = max(abs(a - b) for a, b in zip(floors, (-0.04, 0.0, 0.04))) if len(floors) == 3 else float("inf")
    verdicts = verdicts + [Verdict("fichera.example_values", "fb on x2=0 is -0.04, 0, 0.04", err, 1e-10)]
    fb = ", ".join(f"beta={r.beta:g}: fb={r.fb_floor:+.4f}" for r in unique)
    _, failed, in_time = _record(acceptance_lines, 1, "Fichera partition and fb on x2=0", verdicts, dt, 1.0, fb)
    assert len(verdicts) == 7
    assert not failed and in_time


def test_degenerate_data_independence(acceptance_lines):
    verdicts, dt = _timed(ghost_suite)
    _, failed, _ = _record(acceptance_lines, 2, "ghost data on degenerate boundary (21x21x11 Heston)", verdicts, dt)
    assert not failed
    assert {v.property_id for v in verdicts} == {"ghost_data.unchanged", "ghost_data.unread"}


def test_discrete_weak_maximum_principle(acceptance_lines):
    verdicts, dt = _timed(wmp_suite, range(200), jobs=JOBS)
    _, failed, in_time = _record(acceptance_lines, 3, "weak maximum principle, 200 seeds", verdicts, dt, 120.0)
    assert len(verdicts) == 200
    assert not failed and in_time


def test_a_priori_bounds(acceptance_lines):
    t0 = time.perf_counter()
    verdicts, per_regime = [], []
    for regime in (C_POS, C_NONNEG, C_BOUNDED_BELOW):
        vs = bounds_suite(regime, range(100), jobs=JOBS)
        verdicts += vs
        per_regime.append(f"{regime}: {len(vs)}")
    dt = time.perf_counter() - t0
    _, failed, _ = _record(acceptance_lines, 4, "a priori bounds, 100 seeds per regime", verdicts, dt,
                           extra=", ".join(per_regime))
    assert not failed


def test_comparison_and_uniqueness(acceptance_lines):
    verdicts, dt = _timed(comparison_suite, range(100), jobs=JOBS)
    _, failed, _ = _record(acceptance_lines, 5, "comparison on 100 ordered pairs and uniqueness", verdicts, dt)
    assert Counter(v.property_id for v in verdicts)["comparison.ordered_pair"] == 100
    assert not failed


def test_obstacle_suite(acceptance_lines):
    verdicts, dt = _timed(obstacle_suite, range(50), jobs=JOBS)
    _, failed, _ = _record(acceptance_lines, 6, "obstacle problem, 50 seeds", verdicts, dt)
    ids = {v.property_id for v in verdicts}
    assert {"obstacle.complementarity", "obstacle.inactive_matches_plain"} <= ids
    assert not failed


def test_strong_maximum_principle(acceptance_lines):
    verdicts, dt = _timed(strong_max_suite, 20, 50, jobs=JOBS)
    _, failed, _ = _record(acceptance_lines, 7, "strong maximum principle (constancy and argmax on Dirichlet)",
                           verdicts, dt)
    assert not failed


def test_hopf_sign(acceptance_lines):
    verdicts, dt = _timed(hopf_suite)
    _, failed, _ = _record(acceptance_lines, 8, "Hopf sign on 10 boundary-max instances", verdicts, dt)
    assert sum(v.property_id != "hopf.inconclusive_on_constant" for v in verdicts) == 10
    assert not failed


def test_manufactured_convergence(acceptance_lines):
    verdicts, dt = _timed(convergence_suite)
    orders = {v.property_id.split(".")[1]: v.details.get("orders") for v in verdicts if "orders" in v.details}
    extra = ", ".join(f"{k} orders {[round(o, 3) for o in o_]}" for k, o_ in orders.items())
    _, failed, in_time = _record(acceptance_lines, 9, "manufactured-solution convergence", verdicts, dt, 60.0, extra)
    assert not failed and in_time


def test_boundary_condition_matters(acceptance_lines):
    verdicts, dt = _timed(boundary_condition_suite, 0.5)
    sup = verdicts[0].details.get("sup_change")
    extra = f"sup-norm change {sup:.3f}" if sup is not None else ""
    _, failed, _ = _record(acceptance_lines, 10, "extra Dirichlet data on x2=0 at beta=0.5", verdicts, dt,
                           extra=extra)
    assert not failed
