"""Convex-concave procedure for the parameterised SEE problem in the precoder domain.

Each iteration replaces the concave pieces of the objective and of the secrecy
constraints by first-order surrogates around the previous iterate and solves
the resulting exponential-cone program. Surrogates are tight at the expansion
point, so every iterate stays feasible and the exact objective never drops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conic import Affine, ConicProgram, add_log_epigraph, linear_sum, solve
from .problem import (
    CONVERGED,
    DEGRADED,
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_ERROR,
    DesignProblem,
    InnerResult,
    IterationRecord,
    relative_change,
)

LN2 = math.log(2.0)


def taylor_quadratic_lower(w_prev, h, w):
    """First-order expansion of ``(h^T w)^2`` at ``w_prev``; a global under-estimator.

    ``w`` may be a numeric vector or a list of :class:`Affine` expressions.
    """
    c = float(np.dot(h, w_prev))
    if len(w) and isinstance(w[0], Affine):
        return linear_sum(2.0 * c * np.asarray(h, dtype=float), w) - c * c
    return 2.0 * c * float(np.dot(h, w)) - c * c


def taylor_log_upper(p_prev, p):
    """First-order expansion of ``0.5 * log2(1 + p)`` at ``p_prev``; a global over-estimator."""
    p_prev = float(p_prev)
    slope = 1.0 / (2.0 * LN2 * (1.0 + p_prev))
    return (p - p_prev) * slope + 0.5 * math.log2(1.0 + p_prev)


@dataclass(frozen=True)
class SlackState:
    """Auxiliary quantities evaluated exactly at a precoder; ``r*`` in bits, ``p*`` dimensionless."""

    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    @classmethod
    def at(cls, problem: DesignProblem, w) -> "SlackState":
        g2 = (problem.gains @ np.asarray(w, dtype=float)) ** 2
        own = np.diag(g2)
        a, b = problem.coeffs.a, problem.coeffs.b
        p1 = a * g2.sum(axis=1)
        p2 = b * (g2.sum(axis=1) - own)
        p3 = (b[:, None] * g2).sum(axis=0) - b * own
        half_log = lambda p: 0.5 * np.log2(1.0 + p)  # noqa: E731
        return cls(half_log(p1), half_log(p2), half_log(p3), p1, p2, p3)


@dataclass(frozen=True)
class CccpConfig:
    eps2: float = 1e-4
    lmax2: int = 100
    solver_tol: float = 1e-8
    change_floor: float = 1e-12
    phase_one_max: int = 60
    phase_one_margin: float = 1e-6


def _precoder_block(prog: ConicProgram, n_tx: int, n_users: int):
    wp = prog.matrix("Wp", n_tx, n_users)
    wm = prog.matrix("Wm", n_tx, n_users)
    w = [[wp[n, k] - wm[n, k] for k in range(n_users)] for n in range(n_tx)]
    return wp, wm, w


def _add_swing_bounds(prog: ConicProgram, wp, wm, bounds):
    n_tx, n_users = wp.shape
    for n in range(n_tx):
        for k in range(n_users):
            prog.add_ge(wp[n, k])
            prog.add_ge(wm[n, k])
        row = Affine()
        for k in range(n_users):
            row += wp[n, k] + wm[n, k]
        prog.add_le(row, float(bounds[n]))


def build_subproblem(problem: DesignProblem, w_prev, slack_prev: SlackState, mu: float | None, phase_one=False):
    """Convex surrogate around ``w_prev``.

    With ``phase_one`` the program maximises the smallest secrecy margin ``t``
    instead of ``sum(r) - mu * D`` and the thresholds become ``>= lambda + t``.
    """
    n_tx, n_users = problem.n_tx, problem.n_users
    h = problem.gains
    a, b = problem.coeffs.a, problem.coeffs.b
    sb = np.sqrt(b)
    w_prev = np.asarray(w_prev, dtype=float)

    prog = ConicProgram()
    wp, wm, w = _precoder_block(prog, n_tx, n_users)
    r1, r2, r3 = prog.vector("r1", n_users), prog.vector("r2", n_users), prog.vector("r3", n_users)
    p1, p2, p3 = prog.vector("p1", n_users), prog.vector("p2", n_users), prog.vector("p3", n_users)
    cols = [[w[n][i] for n in range(n_tx)] for i in range(n_users)]
    hw = [[linear_sum(h[k], cols[i]) for i in range(n_users)] for k in range(n_users)]

    _add_swing_bounds(prog, wp, wm, problem.bounds)
    margin = prog.scalar("t").expr if phase_one else None
    objective = Affine()
    for k in range(n_users):
        add_log_epigraph(prog, r1[k], p1[k])
        lin = Affine()
        for i in range(n_users):
            lin += taylor_quadratic_lower(w_prev[:, i], h[k], cols[i]) * a[k]
        prog.add_le(p1[k], lin)
        prog.add_square_le([hw[k][i] * sb[k] for i in range(n_users) if i != k], p2[k])
        prog.add_square_le([hw[i][k] * sb[i] for i in range(n_users) if i != k], p3[k])
        prog.add_ge(r2[k], taylor_log_upper(slack_prev.p2[k], p2[k]))
        prog.add_ge(r3[k], taylor_log_upper(slack_prev.p3[k], p3[k]))
        rate = r1[k] - r2[k] - r3[k]
        if phase_one:
            prog.add_ge(rate - margin, float(problem.thresholds[k]))
        else:
            prog.add_ge(rate, float(problem.thresholds[k]))
            objective += rate

    if phase_one:
        # cap the margin so the program stays bounded once feasibility is reached
        prog.add_le(margin, 1.0)
        prog.maximize(margin)
    else:
        tau = prog.scalar("tau").expr
        prog.add_square_le([w[n][k] for n in range(n_tx) for k in range(n_users)], tau)
        prog.maximize(objective - (tau * problem.xi + problem.p_dc) * mu)
    return prog


def _extract(problem: DesignProblem, values) -> np.ndarray:
    return problem.clip_to_bounds(values["Wp"] - values["Wm"])


def solve_parameterized(problem: DesignProblem, mu: float, w_init, cfg: CccpConfig = CccpConfig()) -> InnerResult:
    """Maximise ``N(W) - mu * D(W)`` from a feasible ``w_init``."""
    w = np.asarray(w_init, dtype=float)
    slack = SlackState.at(problem, w)
    result = InnerResult(w=w, objective=problem.parameterized(w, mu), iterations=0, status=MAX_ITER)
    for m in range(1, cfg.lmax2 + 1):
        sol = solve(build_subproblem(problem, w, slack, mu), tol=cfg.solver_tol)
        if not sol.ok:
            if m == 1:
                result.status = INFEASIBLE if sol.status == INFEASIBLE else NUMERICAL_ERROR
            else:
                # last accepted iterate is still feasible and ascent-ordered
                result.status = DEGRADED
            return result
        w_new = _extract(problem, sol.values)
        slack_new = SlackState.at(problem, w_new)
        change = max(
            relative_change(w_new, w, cfg.change_floor),
            relative_change(slack_new.p2, slack.p2, cfg.change_floor),
            relative_change(slack_new.p3, slack.p3, cfg.change_floor),
        )
        obj = problem.parameterized(w_new, mu)
        result.history.append(
            IterationRecord(m, w_new, obj, problem.see(w_new), problem.rates(w_new), change)
        )
        w, slack = w_new, slack_new
        result.w, result.objective, result.iterations = w, obj, m
        if change <= cfg.eps2:
            result.status = CONVERGED
            return result
    result.status = MAX_ITER
    return result


def find_feasible(problem: DesignProblem, w_start, cfg: CccpConfig = CccpConfig()):
    """Phase-I CCCP: push the smallest secrecy margin above zero.

    Returns ``(w, history)`` where ``w`` is ``None`` if no feasible point was
    reached. ``history`` lists the precoder after each phase-I iteration.
    """
    w = problem.clip_to_bounds(w_start)
    history = []
    best = problem.min_slack(w)
    if best >= cfg.phase_one_margin:
        return w, history
    for _ in range(cfg.phase_one_max):
        sol = solve(build_subproblem(problem, w, SlackState.at(problem, w), None, phase_one=True), tol=cfg.solver_tol)
        if not sol.ok:
            return None, history
        w = _extract(problem, sol.values)
        history.append(w)
        slack = problem.min_slack(w)
        if slack >= cfg.phase_one_margin:
            return w, history
        if slack - best <= 1e-6 * max(1.0, abs(best)):
            return None, history
        best = slack
    return None, history
