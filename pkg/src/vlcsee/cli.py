"""Command-line front end: ``vlcsee <command> [options]``.

Every command writes ``records.csv``, ``summary.csv`` and ``manifest.json`` to
``--out-dir``. Exit codes: 0 success, 1 appendix bound violated, 2 bad
configuration or arguments, 3 infeasible scenario.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys

import numpy as np

from . import __version__
from . import experiments as ex
from .config import ALGORITHMS, ConfigError, ScenarioConfig, config_echo, load_config, parse_config, parse_grid

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

AXIS_LABEL = {
    "power_dbm": "optical power per luminary (dBm)",
    "threshold": "secrecy threshold (bits/s/Hz)",
    "circuitry": "circuitry power (W)",
    "config": "(luminaries / users)",
}


# ---------------------------------------------------------------- output


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, np.ndarray):
        return ";".join(repr(float(x)) for x in v)
    return str(v)


def write_csv(path, rows, fields=None):
    fields = fields or (list(rows[0].keys()) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_cell(row.get(f)) for f in fields])
    return fields


def _versions():
    import clarabel
    import scipy

    return {
        "vlcsee": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "clarabel": getattr(clarabel, "__version__", "unknown"),
    }


def write_outputs(out_dir, command, cfg, records, summary, totals, record_fields=None, summary_fields=None,
                  exit_code=EXIT_OK):
    os.makedirs(out_dir, exist_ok=True)
    rf = write_csv(os.path.join(out_dir, "records.csv"), records, record_fields)
    sf = write_csv(os.path.join(out_dir, "summary.csv"), summary, summary_fields)
    manifest = {
        "command": command,
        "config": config_echo(cfg) if cfg is not None else None,
        "seed": cfg.seed if cfg is not None else None,
        "versions": _versions(),
        "totals": totals,
        "files": {"records.csv": rf, "summary.csv": sf},
        "exit_code": exit_code,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return manifest


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


# ---------------------------------------------------------------- commands


def _grid(args, cfg):
    axis = args.axis or cfg.sweep_axis
    values = parse_grid(args.values) if args.values else cfg.sweep_values
    if axis and not values:
        raise ConfigError("a sweep axis needs values", field="values")
    if values and not axis:
        raise ConfigError("sweep values given without an axis", field="axis")
    return axis, values


def _algorithms(args, cfg, default):
    names = [a.strip() for a in args.algo.split(",")] if args.algo else list(default or [cfg.algorithm])
    bad = [a for a in names if a not in ALGORITHMS]
    if bad:
        raise ConfigError(f"unknown algorithm(s) {bad}; choose from {ALGORITHMS}", field="algo")
    return names


def cmd_channel(args, cfg):
    problem = ex.realization(cfg, args.realization)
    users = ex.draw_users(cfg, args.realization)
    records = [dict(user=k, luminary=n, gain=problem.gains[k, n])
               for k in range(problem.n_users) for n in range(problem.n_tx)]
    summary = [dict(user=k, x=users[k][0], y=users[k][1], z=users[k][2],
                    noise_var_effective=problem.channel.noise_vars_effective[k],
                    a=problem.coeffs.a[k], b=problem.coeffs.b[k]) for k in range(problem.n_users)]
    return records, summary, {"users": problem.n_users, "luminaries": problem.n_tx}, EXIT_OK, []


def cmd_feasibility(args, cfg):
    axis, values = _grid(args, cfg)
    summary, records = ex.feasibility_probability(cfg, axis, values or (None,), args.threads)
    figs = []
    if args.figures:
        from .plotting import feasibility_figure

        figs.append(feasibility_figure(summary, args.out_dir, AXIS_LABEL.get(axis, "scenario")))
    totals = {"realizations": cfg.n_realizations, "grid_points": len(summary)}
    return records, summary, totals, EXIT_OK, figs


def cmd_convergence(args, cfg):
    inits = [s.strip() for s in args.inits.split(",")]
    for i in inits:
        if i not in ("zf", "random"):
            raise ConfigError("inits must be drawn from {zf, random}", field="inits")
    algos = _algorithms(args, cfg, ["cccp", "cccp_sdr"])
    for a in algos:
        if a not in ("cccp", "cccp_sdr"):
            raise ConfigError("convergence traces exist only for cccp and cccp_sdr", field="algo")
    res = ex.convergence_trace(cfg, inits, algos, args.threads)
    if res.n_used == 0:
        return [], [], {"used": 0}, EXIT_INFEASIBLE, []
    summary = [dict(init=i, algorithm=a, used=res.n_used, mean_iterations_to_95=v,
                    mean_iterations_to_95_own=res.own_iterations_to_95[(i, a)])
               for (i, a), v in res.iterations_to_95.items()]
    figs = []
    if args.figures:
        from .plotting import convergence_figure

        figs.append(convergence_figure(res.rows, args.out_dir))
    # the mean trace per iteration goes to records alongside per-realization rows
    records = [dict(kind="mean", realization="", **{k: r[k] for k in ("init", "algorithm", "iteration")},
                    normalized=r["mean_normalized"]) for r in res.rows]
    records += [dict(kind="realization", **r) for r in res.records]
    return records, summary, {"used": res.n_used, "scanned": cfg.n_realizations}, EXIT_OK, figs


def cmd_sweep(args, cfg):
    axis, values = _grid(args, cfg)
    if not axis:
        raise ConfigError("sweep needs an axis ([sweep] axis or --axis)", field="axis")
    algos = _algorithms(args, cfg, None)
    res = ex.see_sweep(cfg, axis, values, algos, args.threads, timing=args.timing)
    figs = []
    if args.figures:
        from .plotting import sweep_figure

        figs.append(sweep_figure(res.rows, args.out_dir, AXIS_LABEL[axis]))
    fields = ["value", "realization", "algorithm", "status", "see", "rates", "inner_iterations", "wall_time"]
    totals = {"grid_points": len(values), "used": {str(v): len(res.used[v]) for v in values}}
    code = EXIT_OK if any(res.used[v] for v in values) else EXIT_INFEASIBLE
    summary_fields = ["axis", "value", "algorithm", "scanned", "feasible", "used", "mean_see", "q25", "median",
                      "q75"] + (["mean_gap_vs_cccp"] if "cccp" in algos else [])
    return (res.records, res.rows, totals, code, figs, fields, summary_fields)


def cmd_optimize(args, cfg):
    algo = _algorithms(args, cfg, None)
    if len(algo) != 1:
        raise ConfigError("optimize runs exactly one algorithm", field="algo")
    oc, det, problem = ex.optimize_realization(cfg, args.realization, algo[0], timing=args.timing)
    if oc is None or not oc.ok:
        summary = [dict(realization=args.realization, algorithm=algo[0], feasible=False,
                        detector=det.method, status=oc.status if oc else "infeasible")]
        return [], summary, {"feasible": False}, EXIT_INFEASIBLE, []
    rows = oc.rows or [dict(outer="", inner="", mu=None, objective=None, see=oc.see, rates=oc.rates,
                            gap=None, violation=False)]
    records = [dict(realization=args.realization, algorithm=oc.algorithm, outer=r["outer"], inner=r["inner"],
                    mu=r["mu"], objective=r["objective"], see=r["see"], rates=r["rates"],
                    feasible=bool(np.all(r["rates"] >= problem.thresholds - 1e-4)),
                    relaxation_gap=r["gap"], threshold_violation=r["violation"], wall_time=r.get("wall_time"))
               for r in rows]
    summary = [dict(realization=args.realization, algorithm=oc.algorithm, feasible=True, detector=det.method,
                    status=oc.status, see=oc.see, rates=oc.rates, outer_iterations=oc.outer_iterations,
                    inner_iterations=oc.inner_iterations)]
    figs = []
    if args.figures and oc.rows:
        from .plotting import trace_figure

        figs.append(trace_figure(oc.rows, args.out_dir))
    fields = ["realization", "algorithm", "outer", "inner", "mu", "objective", "see", "rates", "feasible",
              "relaxation_gap", "threshold_violation", "wall_time"]
    return records, summary, {"inner_iterations": oc.inner_iterations}, EXIT_OK, figs, fields


def cmd_verify_appendix(args, cfg):
    from .entropy import verify_entropy_chain
    from .geometry import LuminaryParams, NoiseParams, ReceiverParams, Scene, build_channel, sample_users
    from .power import DrivePolicy

    if not 1 <= args.users <= 3 or not 1 <= args.tx <= 3:
        raise ConfigError("verify-appendix supports 1..3 users and 1..3 luminaries", field="users")
    rng = np.random.default_rng([cfg.seed, 0, 7])
    xs = np.linspace(-1.5, 1.5, args.tx) if args.tx > 1 else np.zeros(1)
    leds = tuple(LuminaryParams(position=(float(x), 0.0, 3.0)) for x in xs)
    users = tuple(ReceiverParams(position=p) for p in sample_users(rng, args.users, room_dims=(3.0, 3.0, 3.0)))
    scene = Scene(luminaries=leds, users=users, noise=NoiseParams(), room_dims=(5.0, 5.0, 3.0))
    policy = DrivePolicy.from_dbm(cfg.power_dbm, args.tx)
    channel = build_channel(scene, policy.dc_bias)
    w = rng.uniform(-1.0, 1.0, size=(args.tx, args.users))
    w *= (policy.bounds / np.abs(w).sum(axis=1))[:, None]
    report = verify_entropy_chain(channel, w, args.samples, [cfg.seed, 1])
    for line in report.lines():
        print(line)
    summary = []
    for u in report.users:
        for name, est, bound, rel in (
            ("epi", u.h_y, u.epi_bound, ">="),
            ("gaussian", u.h_y_given_dk, u.gaussian_bound, "<="),
            ("determinant", u.h_others_given_rest, u.det_bound, "<="),
            ("noise", u.h_noise, u.noise_entropy, "=="),
        ):
            summary.append(dict(user=u.user, check=name, estimate_bits=est.value, stderr_bits=est.stderr,
                                bound_bits=bound, relation=rel, holds=u.checks[name]))
    records = [dict(tx=n, user=k, w=w[n, k]) for n in range(args.tx) for k in range(args.users)]
    code = EXIT_OK if report.all_hold else EXIT_VIOLATION
    return records, summary, {"samples": args.samples, "all_hold": report.all_hold}, code, []


COMMANDS = {
    "channel": cmd_channel,
    "feasibility": cmd_feasibility,
    "convergence": cmd_convergence,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "verify-appendix": cmd_verify_appendix,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI scenario file")
    common.add_argument("--algo", help="algorithm, or comma separated list for sweeps")
    common.add_argument("--seed", type=int)
    common.add_argument("--realizations", type=int)
    common.add_argument("--out-dir", default="out")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--max-feasible", type=int, help="cap on feasible realizations per grid point")
    common.add_argument("--sampling", choices=("per_point", "common"))
    common.add_argument("--figures", action="store_true", help="also render PNG figures")
    common.add_argument("--timing", action="store_true", help="fill the wall_time column")

    parser = argparse.ArgumentParser(prog="vlcsee", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("feasibility", "sweep"):
            p.add_argument("--axis", choices=("power_dbm", "threshold", "circuitry", "config"))
            p.add_argument("--values", help="start:stop:step or comma list, e.g. 20:40:1 or 4/3,6/4")
        if name in ("channel", "optimize"):
            p.add_argument("--realization", type=int, default=0)
        if name == "convergence":
            p.add_argument("--inits", default="zf,random")
        if name == "verify-appendix":
            p.add_argument("--users", type=int, default=2)
            p.add_argument("--tx", type=int, default=2)
            p.add_argument("--samples", type=int, default=1_000_000)
    return parser


def _load(args) -> ScenarioConfig:
    overrides = dict(seed=args.seed, n_realizations=args.realizations, max_feasible=args.max_feasible,
                     sampling=args.sampling)
    if args.algo and "," not in args.algo:
        overrides["algorithm"] = args.algo
    if args.config:
        try:
            return load_config(args.config, **overrides)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", field="config") from None
    return parse_config("", **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.threads < 1:
            raise ConfigError("threads must be >= 1", field="threads")
        os.makedirs(args.out_dir, exist_ok=True)
        out = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    records, summary, totals, code, figs = out[:5]
    record_fields = out[5] if len(out) > 5 else None
    summary_fields = out[6] if len(out) > 6 else None
    totals = dict(totals, figures=[os.path.basename(f) for f in figs])
    write_outputs(args.out_dir, args.command, cfg, records, summary, totals, record_fields, summary_fields, code)
    for row in summary[:50]:
        print(", ".join(f"{k}={_cell(v)}" for k, v in row.items()))
    return code


if __name__ == "__main__":
    sys.exit(main())
