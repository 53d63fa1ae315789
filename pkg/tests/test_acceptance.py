"""Acceptance criteria at their stated sample sizes and tolerances.

Each test appends one PASS/FAIL line to ``conftest.ACCEPTANCE_LINES`` (echoed in
the terminal summary) and prints it. Results do not depend on the worker count,
so the pool is sized to the machine.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES

from vlcsee import experiments as ex
from vlcsee import zf
from vlcsee.config import parse_config

pytestmark = pytest.mark.acceptance

THREADS = os.cpu_count() or 1
SEED = 1
HERE = os.path.dirname(__file__)


def report(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _cfg(**kw):
    return parse_config("", seed=SEED).replace(**kw)


def test_criterion_1_default_feasibility():
    t0 = time.perf_counter()
    summary, _ = ex.feasibility_probability(_cfg(n_realizations=1000), threads=THREADS)
    elapsed = time.perf_counter() - t0
    row = summary[0]
    ok = row["probability"] >= 0.88 and elapsed <= 600
    report(1, "feasibility (4,3), 0.5 b/s/Hz, 30 dBm", ok,
           f"p={row['probability']:.3f} [{row['ci_low']:.3f}, {row['ci_high']:.3f}] over {row['n']} drops "
           f"(zf {row['by_zf']}, phase-I {row['by_phase_one']}), {elapsed:.0f} s on {THREADS} worker(s); "
           f"need p>=0.88, <=600 s")


def test_criterion_2_configuration_ladder():
    summary, _ = ex.feasibility_probability(_cfg(n_realizations=1000), "config", ("6/4", "9/6"), threads=THREADS)
    probs = {row["value"]: row["probability"] for row in summary}
    ok = all(p >= 0.88 for p in probs.values())
    report(2, "feasibility ladder", ok,
           ", ".join(f"{v}: p={p:.3f}" for v, p in probs.items()) + " over 1000 drops each; need >=0.88")


def test_criterion_3_convergence_speed():
    res = ex.convergence_trace(_cfg(n_realizations=30, max_feasible=20), threads=THREADS)
    own = res.own_iterations_to_95
    # per-realization worst case from ZF init, against each run's own converged value
    worst = {"cccp": 0, "cccp_sdr": 0}
    per_run = {}
    for rec in res.records:
        per_run.setdefault((rec["realization"], rec["init"], rec["algorithm"]), []).append(rec["normalized"])
    for (rid, init, algo), trace in per_run.items():
        if init == "zf":
            t = np.array(trace)
            worst[algo] = max(worst[algo], ex.iterations_to(t / t[-1]))
    ok = (res.n_used >= 20 and own[("zf", "cccp_sdr")] <= 12 and own[("zf", "cccp")] <= 20
          and worst["cccp_sdr"] <= 12 and worst["cccp"] <= 20
          and own[("random", "cccp_sdr")] > own[("zf", "cccp_sdr")]
          and own[("random", "cccp")] > own[("zf", "cccp")])
    report(3, "convergence from ZF vs random init", ok,
           f"{res.n_used} drops; mean iterations to 95% of own final: "
           + ", ".join(f"{a}/{i}={own[(i, a)]:.2f}" for i in ("zf", "random") for a in ("cccp", "cccp_sdr"))
           + f"; worst from ZF cccp={worst['cccp']} sdr={worst['cccp_sdr']}; need sdr<=12, cccp<=20, random>zf")


def _equivalence_task(cfg, rid):
    problem = ex.realization(cfg, rid)
    det = zf.detect_feasibility(problem, ex.rng_for(cfg, rid, ex.STREAM_PHASE_ONE))
    if not det.feasible:
        return None
    a = ex.run_algorithm(problem, "cccp", cfg, det.w)
    b = ex.run_algorithm(problem, "cccp_sdr", cfg, det.w)
    if not (a.ok and b.ok):
        return ("failed", a.status, b.status)
    gaps = [row["gap"] for row in b.rows if row["gap"] is not None]
    return (a.see, b.see, gaps[-1] if gaps else 0.0, b.status)


def test_criterion_4_cccp_sdr_equivalence():
    cfg = _cfg()
    out = ex.pmap(_equivalence_task, [(cfg, rid) for rid in range(240)], THREADS)
    done = [o for o in out if o is not None and o[0] != "failed"]
    failed = [o for o in out if o is not None and o[0] == "failed"]
    done = done[:200]
    a = np.array([d[0] for d in done])
    b = np.array([d[1] for d in done])
    rel = np.abs(a - b) / a
    gaps = np.array([d[2] for d in done])
    frac_tight = float(np.mean(gaps < 0.05))
    ok = len(done) >= 200 and rel.mean() <= 0.05 and frac_tight >= 0.90
    report(4, "cccp vs cccp_sdr", ok,
           f"{len(done)} feasible drops ({len(failed)} run failures skipped); mean |rel diff|={rel.mean():.2e}, "
           f"max={rel.max():.2e}; relaxation gap <0.05 on {100 * frac_tight:.1f}%; need mean<=5%, >=90%")


def test_criterion_5_zf_ordering():
    cfg = _cfg(n_realizations=400, max_feasible=100)
    res = ex.see_sweep(cfg, "power_dbm", (25.0, 35.0), ("cccp", "zf", "random_zf"), threads=THREADS)
    gap, rgap, above = {}, {}, 0
    for v in (25.0, 35.0):
        c, z, r = res.see[(v, "cccp")], res.see[(v, "zf")], res.see[(v, "random_zf")]
        above += int(np.sum(z > c))
        gap[v] = float(np.mean((c - z) / c))
        rgap[v] = float(np.mean((c - r) / c))
    ok = above == 0 and gap[35.0] <= 0.10 and gap[35.0] < gap[25.0] and rgap[35.0] <= 0.10
    report(5, "zf <= cccp, gap closes with power", ok,
           f"{len(res.used[25.0])}/{len(res.used[35.0])} drops at 25/35 dBm; zf above cccp on {above}; "
           f"zf gap 25 dBm={gap[25.0]:.2%}, 35 dBm={gap[35.0]:.2%}; random_zf gap 35 dBm={rgap[35.0]:.2%}; "
           f"need none above, gap35<=10% and <gap25, random_zf<=10%")


def test_criterion_6_interior_optimum_shift():
    powers = tuple(float(p) for p in range(20, 41))
    argmax, details = [], []
    interior = True
    for pc in (2.0, 4.0, 8.0, 16.0):
        cfg = _cfg(circuitry_power=pc, n_realizations=40, max_feasible=15, sampling="common")
        res = ex.see_sweep(cfg, "power_dbm", powers, ("cccp",), threads=THREADS)
        mean = np.array([res.see[(p, "cccp")].mean() for p in powers])
        k = int(np.argmax(mean))
        interior &= 0 < k < len(powers) - 1
        argmax.append(powers[k])
        details.append(f"{pc:g} W -> {powers[k]:g} dBm ({len(res.used[powers[0]])} drops)")
    ok = interior and all(x <= y for x, y in zip(argmax, argmax[1:]))
    report(6, "interior SEE optimum moves up with circuitry power", ok,
           "; ".join(details) + "; need interior and nondecreasing")


def test_criterion_7_threshold_trend():
    mean, counts = {}, {}
    for p in (25.0, 35.0):
        cfg = _cfg(power_dbm=p, n_realizations=20000, max_feasible=20)
        res = ex.see_sweep(cfg, "threshold", (1.0, 3.0), ("cccp",), threads=THREADS)
        for lam in (1.0, 3.0):
            mean[(p, lam)] = float(res.see[(lam, "cccp")].mean())
            counts[(p, lam)] = (len(res.used[lam]), res.scanned[lam])
    inc = {p: mean[(p, 3.0)] / mean[(p, 1.0)] - 1.0 for p in (25.0, 35.0)}
    ok = (all(n >= 20 for n, _ in counts.values()) and mean[(25.0, 3.0)] > mean[(25.0, 1.0)]
          and inc[25.0] > inc[35.0])
    report(7, "SEE grows with threshold, more at low power", ok,
           "; ".join(f"{p:g} dBm: lambda=1 {mean[(p, 1.0)]:.4f} ({counts[(p, 1.0)][0]}/{counts[(p, 1.0)][1]}), "
                     f"lambda=3 {mean[(p, 3.0)]:.4f} ({counts[(p, 3.0)][0]}/{counts[(p, 3.0)][1]}), "
                     f"increase {inc[p]:+.1%}" for p in (25.0, 35.0))
           + "; need increase at 25 dBm > 0 and > increase at 35 dBm")


PROPERTY_SUITES = ("test_cccp.py", "test_sdr.py", "test_dinkelbach.py", "test_zf.py", "test_entropy.py",
                   "test_geometry.py", "test_power.py")


def test_criterion_8_property_suites():
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *(os.path.join(HERE, f) for f in PROPERTY_SUITES)],
                          capture_output=True, text=True, cwd=HERE)
    elapsed = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    ok = proc.returncode == 0 and elapsed < 120
    report(8, "property suites", ok, f"{tail.strip('= ')} in {elapsed:.1f} s wall; need all pass in <120 s")
