"""Monte Carlo harness: feasibility probability, convergence traces and SEE sweeps.

Every random quantity of realization ``rid`` comes from
``numpy.random.default_rng([seed, rid, stream])``, so results do not depend on
the number of worker processes or on the order in which tasks finish.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from . import cccp, dinkelbach, sdr, zf
from .config import LAYOUT_TX, ScenarioConfig
from .geometry import build_channel, make_scene, sample_users
from .power import DrivePolicy, PowerModel
from .problem import CONVERGED, DEGRADED, MAX_ITER, DesignProblem

STREAM_USERS = 0
STREAM_PHASE_ONE = 1
STREAM_RANDOM_ZF = 2
STREAM_RANDOM_INIT = 3

_LAYOUT_FOR_TX = {n: k for k, n in LAYOUT_TX.items()}


def rng_for(cfg: ScenarioConfig, rid: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, rid, stream])


def draw_users(cfg: ScenarioConfig, rid: int):
    return sample_users(rng_for(cfg, rid, STREAM_USERS), cfg.n_users)


def build_problem(cfg: ScenarioConfig, users) -> DesignProblem:
    scene = make_scene(cfg.layout, users)
    policy = DrivePolicy.from_dbm(cfg.power_dbm, scene.n_tx)
    channel = build_channel(scene, policy.dc_bias)
    model = PowerModel(cfg.circuitry_power, cfg.led_voltage, cfg.xi)
    return DesignProblem.create(channel, policy, model, cfg.threshold_vector())


def realization(cfg: ScenarioConfig, rid: int) -> DesignProblem:
    return build_problem(cfg, draw_users(cfg, rid))


def apply_axis(cfg: ScenarioConfig, axis: str | None, value) -> ScenarioConfig:
    if axis is None:
        return cfg
    if axis == "power_dbm":
        return cfg.replace(power_dbm=float(value))
    if axis == "threshold":
        return cfg.replace(thresholds=float(value))
    if axis == "circuitry":
        return cfg.replace(circuitry_power=float(value))
    if axis == "config":
        n_tx, n_users = (int(x) for x in str(value).split("/"))
        if n_tx not in _LAYOUT_FOR_TX:
            raise ValueError(f"no luminary layout with {n_tx} fixtures")
        return cfg.replace(layout=_LAYOUT_FOR_TX[n_tx], n_users=n_users)
    raise ValueError(f"unknown sweep axis {axis!r}")


def pmap(fn, tasks, threads: int = 1):
    """Order-preserving map, optionally over a process pool."""
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        chunk = max(1, len(tasks) // (4 * threads))
        return list(pool.map(_star, [(fn, t) for t in tasks], chunksize=chunk))


def _star(item):
    fn, args = item
    return fn(*args)


# ---------------------------------------------------------------- algorithms


@dataclass
class AlgoOutcome:
    algorithm: str
    status: str
    w: np.ndarray | None
    see: float
    rates: np.ndarray | None
    rows: list = field(default_factory=list)  # per-iteration record dicts
    outer_iterations: int = 0
    inner_iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.w is not None and self.status in (CONVERGED, MAX_ITER, DEGRADED)


def _dinkelbach_rows(problem, res, w0):
    rows = [dict(outer=0, inner=0, mu=float("nan"), objective=float("nan"), see=problem.see(w0),
                 rates=problem.rates(w0), gap=None, violation=False)]
    inner_total = 0
    for outer, (inner, (mu, _)) in enumerate(zip(res.inner, res.trace + [(math.nan, math.nan)]), start=1):
        for rec in inner.history:
            inner_total += 1
            rows.append(dict(outer=outer, inner=inner_total, mu=float(mu), objective=rec.objective, see=rec.see,
                             rates=rec.rates, gap=rec.relaxation_gap, violation=rec.threshold_violation))
    return rows


def run_algorithm(problem: DesignProblem, algorithm: str, cfg: ScenarioConfig, w0=None, rng=None) -> AlgoOutcome:
    """One full design run; ``w0`` must be feasible for the CCCP variants."""
    dk_cfg = dinkelbach.DinkelbachConfig(eps1=cfg.eps1, lmax1=cfg.lmax1)
    if algorithm == "random_zf":
        sel = zf.random_zf_selection(problem, cfg.random_zf_samples, rng)
        rates = None if sel.w is None else problem.rates(sel.w)
        return AlgoOutcome(algorithm, sel.status, sel.w, sel.see, rates)
    if algorithm == "zf":
        start = zf.zf_initial_point(problem)
        if start is None:
            return AlgoOutcome(algorithm, "infeasible", None, math.nan, None)
        inner_cfg = zf.ZfConfig(eps4=cfg.eps_inner, lmax4=cfg.lmax_inner)

        def inner(mu, w):
            return zf.solve_parameterized_zf(problem, mu, zf.ZfState.from_precoder(problem.gains, w).rho, inner_cfg)

        w0 = start.w
    elif algorithm == "cccp":
        inner_cfg = cccp.CccpConfig(eps2=cfg.eps_inner, lmax2=cfg.lmax_inner)

        def inner(mu, w):
            return cccp.solve_parameterized(problem, mu, w, inner_cfg)
    elif algorithm == "cccp_sdr":
        inner_cfg = sdr.SdrConfig(eps3=cfg.eps_inner, lmax3=cfg.lmax_inner)

        def inner(mu, w):
            return sdr.solve_parameterized_sdr(problem, mu, w, inner_cfg)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if w0 is None:
        return AlgoOutcome(algorithm, "infeasible", None, math.nan, None)
    fp = dinkelbach.FractionalProblem(problem.numerator, problem.denominator, inner)
    res = dinkelbach.run(fp, dk_cfg, w0)
    w = res.w if res.inner and res.inner[0].ok else None
    if w is not None and not problem.feasible(w, rate_tol=1e-4):
        w = None
    see = problem.see(w) if w is not None else math.nan
    rates = problem.rates(w) if w is not None else None
    return AlgoOutcome(algorithm, res.status, w, see, rates, _dinkelbach_rows(problem, res, w0),
                       res.outer_iterations, res.inner_iterations)


# ---------------------------------------------------------------- feasibility


def _feasibility_task(cfg: ScenarioConfig, rid: int) -> str:
    problem = realization(cfg, rid)
    return zf.detect_feasibility(problem, rng_for(cfg, rid, STREAM_PHASE_ONE)).method


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def feasibility_probability(cfg: ScenarioConfig, axis: str | None = None, values=(None,), threads: int = 1):
    """Fraction of user drops for which the design problem is feasible, per grid value.

    Returns ``(summary_rows, record_rows)``.
    """
    summary, records = [], []
    for value in values:
        c = apply_axis(cfg, axis, value)
        methods = pmap(_feasibility_task, [(c, rid) for rid in range(c.n_realizations)], threads)
        n = len(methods)
        k = sum(m in ("zf", "phase_one") for m in methods)
        lo, hi = wilson_interval(k, n)
        summary.append(dict(axis=axis or "", value=value if value is not None else "", n=n, feasible=k,
                            probability=k / n, ci_low=lo, ci_high=hi, by_zf=methods.count("zf"),
                            by_phase_one=methods.count("phase_one"), screened=methods.count("screen")))
        for rid, m in enumerate(methods):
            records.append(dict(value=value if value is not None else "", realization=rid,
                                feasible=m in ("zf", "phase_one"), method=m))
    return summary, records


# ---------------------------------------------------------------- convergence


def random_feasible_start(problem: DesignProblem, rng) -> np.ndarray | None:
    """Random precoder, pushed into the feasible set by phase-I CCCP when needed."""
    w = rng.uniform(-1.0, 1.0, size=(problem.n_tx, problem.n_users))
    w *= (problem.bounds * rng.uniform(0.5, 1.0, size=problem.n_tx) / np.abs(w).sum(axis=1))[:, None]
    if problem.feasible(w, rate_tol=0.0):
        return w
    w, _ = cccp.find_feasible(problem, w)
    return w


def _convergence_task(cfg: ScenarioConfig, rid: int, inits, algorithms):
    problem = realization(cfg, rid)
    start = zf.zf_initial_point(problem)
    if start is None:
        return None
    ref = run_algorithm(problem, "cccp", cfg, start.w)
    if not ref.ok:
        return None
    starts = {"zf": start.w}
    if "random" in inits:
        starts["random"] = random_feasible_start(problem, rng_for(cfg, rid, STREAM_RANDOM_INIT))
        if starts["random"] is None:
            return None
    out = {"reference": ref.see, "traces": {}}
    for init in inits:
        for algo in algorithms:
            res = ref if (init == "zf" and algo == "cccp") else run_algorithm(problem, algo, cfg, starts[init])
            if not res.ok:
                return None
            trace, last = [], None
            for row in res.rows:
                # thresholds broken after retrieval: hold the last admissible value
                last = row["see"] if (last is None or not row["violation"]) else last
                trace.append(last)
            out["traces"][(init, algo)] = np.array(trace) / ref.see
    return out


def iterations_to(trace, level: float = 0.95) -> int:
    """First inner iteration at which the normalised trace reaches ``level``; ``len(trace)`` if never."""
    hits = np.flatnonzero(np.asarray(trace) >= level)
    return int(hits[0]) if hits.size else len(trace)


@dataclass
class ConvergenceResult:
    rows: list
    records: list
    iterations_to_95: dict  # against the cccp-from-ZF reference
    own_iterations_to_95: dict  # against each run's own final value
    mean_traces: dict
    n_used: int


def convergence_trace(cfg: ScenarioConfig, inits=("zf", "random"), algorithms=("cccp", "cccp_sdr"), threads=1):
    """Mean normalised SEE per cumulative inner iteration, normalised per realization by cccp from ZF init."""
    limit = cfg.max_feasible or cfg.n_realizations
    results = pmap(_convergence_task, [(cfg, rid, tuple(inits), tuple(algorithms)) for rid in range(cfg.n_realizations)],
                   threads)
    used = [(rid, r) for rid, r in enumerate(results) if r is not None][:limit]
    rows, records, it95, own95, means = [], [], {}, {}, {}
    for key in [(i, a) for i in inits for a in algorithms]:
        traces = [r["traces"][key] for _, r in used]
        if not traces:
            continue
        length = max(len(t) for t in traces)
        padded = np.array([np.concatenate([t, np.full(length - len(t), t[-1])]) for t in traces])
        mean = padded.mean(axis=0)
        means[key] = mean
        it95[key] = float(np.mean([iterations_to(t) for t in traces]))
        own95[key] = float(np.mean([iterations_to(t / t[-1]) for t in traces]))
        for i, v in enumerate(mean):
            rows.append(dict(init=key[0], algorithm=key[1], iteration=i, mean_normalized=float(v),
                             min_normalized=float(padded[:, i].min()), n=len(traces)))
        for (rid, _), t in zip(used, traces):
            for i, v in enumerate(t):
                records.append(dict(realization=rid, init=key[0], algorithm=key[1], iteration=i, normalized=float(v)))
    return ConvergenceResult(rows, records, it95, own95, means, len(used))


# ---------------------------------------------------------------- SEE sweeps


def _sweep_task(cfg: ScenarioConfig, rid: int, axis, values, algorithms, require_all: bool, timing: bool):
    """Per grid value: ``None`` if infeasible, else ``{algorithm: (see, rates, status, seconds)}``."""
    users = None
    out = {}
    for value in values:
        c = apply_axis(cfg, axis, value)
        if users is None or axis == "config":
            users = draw_users(c, rid)
        problem = build_problem(c, users)
        det = zf.detect_feasibility(problem, rng_for(c, rid, STREAM_PHASE_ONE))
        if not det.feasible:
            out[value] = None
            if require_all:
                return out
            continue
        res = {}
        for algo in algorithms:
            t0 = time.perf_counter()
            oc = run_algorithm(problem, algo, c, det.w, rng_for(c, rid, STREAM_RANDOM_ZF))
            dt = time.perf_counter() - t0 if timing else None
            res[algo] = (oc.see if oc.ok else math.nan, oc.rates, oc.status, dt, oc.inner_iterations)
        out[value] = res
    return out


@dataclass
class SweepResult:
    rows: list
    records: list
    see: dict  # (value, algorithm) -> array of SEE over used realizations
    used: dict  # value -> list of realization ids
    scanned: dict
    feasible: dict


def see_sweep(cfg: ScenarioConfig, axis: str, values, algorithms=("cccp",), threads: int = 1, timing: bool = False):
    """Mean and quartiles of SEE per grid value and algorithm.

    A realization counts at a grid value when the detector finds it feasible and
    every requested algorithm returns a feasible design. With ``cfg.sampling ==
    "common"`` only realizations feasible at every grid value are used. At most
    ``cfg.max_feasible`` realizations (lowest ids first) enter each grid value.
    """
    values = list(values)
    common = cfg.sampling == "common"
    cap = cfg.max_feasible or cfg.n_realizations
    used = {v: [] for v in values}
    scanned = {v: 0 for v in values}
    feasible = {v: 0 for v in values}
    results = {}
    batch = max(8, 8 * threads)
    rid = 0
    while rid < cfg.n_realizations:
        open_values = [v for v in values if len(used[v]) < cap]
        if not open_values:
            break
        ids = list(range(rid, min(rid + batch, cfg.n_realizations)))
        task_values = values if common else open_values
        outs = pmap(_sweep_task, [(cfg, i, axis, tuple(task_values), tuple(algorithms), common, timing) for i in ids],
                    threads)
        for i, out in zip(ids, outs):
            if common:
                if any(len(used[v]) >= cap for v in values):
                    break
                for v in values:
                    scanned[v] += 1
                ok = all(out.get(v) is not None for v in values)
                if ok:
                    for v in values:
                        feasible[v] += 1
                if ok and all(np.isfinite(out[v][a][0]) for v in values for a in algorithms):
                    for v in values:
                        used[v].append(i)
                        results[(v, i)] = out[v]
                continue
            for v in task_values:
                if len(used[v]) >= cap:
                    continue
                scanned[v] += 1
                res = out.get(v)
                if res is None:
                    continue
                feasible[v] += 1
                if all(np.isfinite(res[a][0]) for a in algorithms):
                    used[v].append(i)
                    results[(v, i)] = res
        rid = ids[-1] + 1

    rows, records, see = [], [], {}
    for v in values:
        for a in algorithms:
            arr = np.array([results[(v, i)][a][0] for i in used[v]])
            see[(v, a)] = arr
            row = dict(axis=axis, value=v, algorithm=a, scanned=scanned[v], feasible=feasible[v], used=len(arr))
            if arr.size:
                q25, q50, q75 = np.percentile(arr, [25, 50, 75])
                row.update(mean_see=float(arr.mean()), q25=float(q25), median=float(q50), q75=float(q75))
            else:
                row.update(mean_see=math.nan, q25=math.nan, median=math.nan, q75=math.nan)
            if "cccp" in algorithms and arr.size:
                ref = see[(v, "cccp")]
                row["mean_gap_vs_cccp"] = float(np.mean((ref - arr) / ref))
            rows.append(row)
        for i in used[v]:
            for a in algorithms:
                s, rates, status, dt, iters = results[(v, i)][a]
                records.append(dict(value=v, realization=i, algorithm=a, status=status, see=s,
                                    rates=rates, inner_iterations=iters, wall_time=dt))
    return SweepResult(rows, records, see, used, scanned, feasible)


# ---------------------------------------------------------------- single run


def optimize_realization(cfg: ScenarioConfig, rid: int = 0, algorithm: str | None = None, timing: bool = False):
    """Detect, initialise and run one algorithm on realization ``rid``; returns ``(outcome, detection, problem)``."""
    algorithm = algorithm or cfg.algorithm
    problem = realization(cfg, rid)
    det = zf.detect_feasibility(problem, rng_for(cfg, rid, STREAM_PHASE_ONE))
    if not det.feasible:
        return None, det, problem
    t0 = time.perf_counter()
    oc = run_algorithm(problem, algorithm, cfg, det.w, rng_for(cfg, rid, STREAM_RANDOM_ZF))
    if timing:
        elapsed = time.perf_counter() - t0
        for row in oc.rows:
            row["wall_time"] = elapsed
    return oc, det, problem
