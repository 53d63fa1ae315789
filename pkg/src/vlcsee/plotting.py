"""Optional PNG figures for the CLI; the CSV files stay the primary output."""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def feasibility_figure(rows, out_dir, xlabel="grid value"):
    xs = list(range(len(rows)))
    p = [r["probability"] for r in rows]
    err = [[r["probability"] - r["ci_low"] for r in rows], [r["ci_high"] - r["probability"] for r in rows]]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(xs, p, yerr=err, marker="o", capsize=3)
    ax.set_xticks(xs, [str(r["value"]) for r in rows])
    ax.set_xlabel(xlabel)
    ax.set_ylabel("feasibility probability")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    return _save(fig, out_dir, "feasibility.png")


def convergence_figure(rows, out_dir):
    series = defaultdict(list)
    for r in rows:
        series[(r["init"], r["algorithm"])].append((r["iteration"], r["mean_normalized"]))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for (init, algo), pts in sorted(series.items()):
        it, val = zip(*pts)
        ax.plot(it, val, marker=".", label=f"{algo}, {init} init")
    ax.set_xlabel("inner iteration")
    ax.set_ylabel("normalised SEE")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, out_dir, "convergence.png")


def sweep_figure(rows, out_dir, xlabel):
    series = defaultdict(list)
    for r in rows:
        series[r["algorithm"]].append((r["value"], r["mean_see"]))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for algo, pts in series.items():
        x, y = zip(*pts)
        if all(isinstance(v, (int, float)) for v in x):
            ax.plot(x, y, marker="o", label=algo)
        else:
            ax.plot(range(len(x)), y, marker="o", label=algo)
            ax.set_xticks(range(len(x)), [str(v) for v in x])
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean SEE (bits/s/Hz/W)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, out_dir, "sweep.png")


def trace_figure(rows, out_dir):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([r["inner"] for r in rows], [r["see"] for r in rows], marker="o")
    ax.set_xlabel("cumulative inner iteration")
    ax.set_ylabel("SEE (bits/s/Hz/W)")
    ax.grid(alpha=0.3)
    return _save(fig, out_dir, "trace.png")
