"""CCCP with semidefinite relaxation in the Gram domain ``Q_k = w_k w_k^T``.

The first log term of each secrecy rate is concave in ``Q`` and is kept exact
through an exponential cone; the leakage terms are linearised. Row amplitude
limits become weighted ellipsoids via Cauchy-Schwarz. After each solve the
leading eigenpair of every ``Q_k`` gives the precoder column that is actually
used, so every reported SEE is achievable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conic import Affine, ConicProgram, Variable, add_log_epigraph, solve
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
# weights below this fraction of the amplitude bound are lifted; tinier ones make
# the ellipsoid so ill-conditioned that solver-level residuals break it after retrieval
DELTA_FLOOR = 1e-3
PSD_TOL = 1e-9


@dataclass(frozen=True)
class GramChannel:
    p: np.ndarray  # (K, N, N), p[k] = h_k h_k^T

    @classmethod
    def from_gains(cls, gains) -> "GramChannel":
        h = np.asarray(gains, dtype=float)
        return cls(np.einsum("ki,kj->kij", h, h))

    @property
    def n_users(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class GramPrecoder:
    q: np.ndarray  # (K, N, N)

    @classmethod
    def from_precoder(cls, w) -> "GramPrecoder":
        w = np.asarray(w, dtype=float)
        return cls(np.einsum("ik,jk->kij", w, w))


@dataclass(frozen=True)
class EllipsoidWeights:
    delta: np.ndarray  # (N, K)
    floor: float = DELTA_FLOOR  # fraction of the row bound

    @classmethod
    def from_gram(cls, q, bounds, floor: float = DELTA_FLOOR) -> "EllipsoidWeights":
        diag = np.einsum("knn->nk", np.asarray(q, dtype=float))
        lift = floor * np.asarray(bounds, dtype=float)[:, None]
        return cls(np.maximum(np.sqrt(np.clip(diag, 0.0, None)), lift), floor)


@dataclass(frozen=True)
class SdrConfig:
    eps3: float = 1e-4
    lmax3: int = 100
    solver_tol: float = 1e-8
    change_floor: float = 1e-12
    violation_tol: float = 1e-4  # bits/s/Hz


def _traces(q, p) -> np.ndarray:
    # t[k, i] = Tr(P_k Q_i)
    return np.einsum("kab,iba->ki", p, q)


def fk_gk(q, p, coeffs, k: int) -> tuple[float, float]:
    """Concave and subtracted parts of user ``k``'s secrecy rate in the Gram domain."""
    q = q.q if isinstance(q, GramPrecoder) else np.asarray(q, dtype=float)
    p = p.p if isinstance(p, GramChannel) else np.asarray(p, dtype=float)
    t = _traces(q, p)
    a, b = coeffs.a, coeffs.b
    others = [i for i in range(t.shape[0]) if i != k]
    f = 0.5 * math.log2(1.0 + a[k] * t[k].sum())
    g = 0.5 * math.log2(1.0 + b[k] * t[k, others].sum()) + 0.5 * math.log2(
        1.0 + sum(b[i] * t[i, k] for i in others)
    )
    return f, g


def grad_g(q_prev, p, coeffs, k: int) -> np.ndarray:
    """Gradient of ``g_k`` with respect to every ``Q_i``; shape (K, N, N)."""
    q_prev = q_prev.q if isinstance(q_prev, GramPrecoder) else np.asarray(q_prev, dtype=float)
    p = p.p if isinstance(p, GramChannel) else np.asarray(p, dtype=float)
    t = _traces(q_prev, p)
    b = coeffs.b
    n_users = p.shape[0]
    others = [i for i in range(n_users) if i != k]
    z1 = 1.0 / (2.0 * LN2 * (1.0 + b[k] * t[k, others].sum()))
    z2 = 1.0 / (2.0 * LN2 * (1.0 + sum(b[i] * t[i, k] for i in others)))
    grads = np.zeros_like(q_prev)
    for i in others:
        grads[i] = z1 * b[k] * p[k].T
    grads[k] = z2 * sum((b[j] * p[j].T for j in others), np.zeros_like(p[0]))
    return grads


def linearized_g(q_prev, p, coeffs, k: int, q) -> float:
    """First-order expansion of ``g_k`` at ``q_prev`` evaluated at numeric ``q``."""
    q_prev = np.asarray(q_prev, dtype=float)
    _, g0 = fk_gk(q_prev, p, coeffs, k)
    return g0 + float(np.sum(grad_g(q_prev, p, coeffs, k) * (np.asarray(q, dtype=float) - q_prev)))


def trace_inner(m, var: Variable, scale: float = 1.0) -> Affine:
    """``scale * Tr(M Q)`` for a symmetric variable ``Q`` stored as its upper triangle."""
    m = np.asarray(m, dtype=float)
    n = var.shape[0]
    out = Affine()
    for j in range(n):
        for i in range(j + 1):
            c = m[i, i] if i == j else m[i, j] + m[j, i]
            if c != 0.0:
                out.terms[var.index(i, j)] = scale * c
    return out


def ellipsoid_constraint(program: ConicProgram, qvars, q_prev, bound: float, n: int, floor: float = DELTA_FLOOR):
    """Weighted ellipsoid that implies ``sum_k |w_{n,k}| <= bound`` after retrieval.

    By Cauchy-Schwarz any positive weights give a valid inner bound; they are the
    previous magnitudes, lifted to at least ``floor * bound``.
    """
    q_prev = np.asarray(q_prev, dtype=float)
    delta = np.maximum(np.sqrt(np.clip(q_prev[:, n, n], 0.0, None)), floor * bound)
    lhs = Affine()
    for k, var in enumerate(qvars):
        lhs += var[n, n] * (1.0 / delta[k])
    program.add_le(lhs, bound * bound / float(delta.sum()))


def build_sdr_subproblem(problem: DesignProblem, q_prev, mu: float, floor: float = DELTA_FLOOR):
    n_tx, n_users = problem.n_tx, problem.n_users
    gram = GramChannel.from_gains(problem.gains)
    p = gram.p
    a, b = problem.coeffs.a, problem.coeffs.b
    q_prev = np.asarray(q_prev, dtype=float)

    prog = ConicProgram()
    qv = [prog.symmetric(f"Q{k}", n_tx) for k in range(n_users)]
    r1 = prog.vector("r1", n_users)
    for var in qv:
        prog.add_psd_variable(var)
    objective = Affine()
    for k in range(n_users):
        snr = Affine()
        for i in range(n_users):
            snr += trace_inner(p[k], qv[i], a[k])
        add_log_epigraph(prog, r1[k], snr)
        _, g0 = fk_gk(q_prev, p, problem.coeffs, k)
        grads = grad_g(q_prev, p, problem.coeffs, k)
        g_lin = Affine(const=g0)
        for i in range(n_users):
            g_lin += trace_inner(grads[i], qv[i]) - float(np.sum(grads[i] * q_prev[i]))
        rate = r1[k] - g_lin
        prog.add_ge(rate, float(problem.thresholds[k]))
        objective += rate
    for n in range(n_tx):
        ellipsoid_constraint(prog, qv, q_prev, float(problem.bounds[n]), n, floor)
    power = Affine(const=problem.p_dc)
    for var in qv:
        power += trace_inner(np.eye(n_tx), var, problem.xi)
    prog.maximize(objective - power * mu)
    return prog, qv


def rank_one_retrieval(q) -> np.ndarray:
    """Leading eigenpair ``sqrt(lam_max) * v`` with a deterministic sign and tie-break."""
    q = np.asarray(q, dtype=float)
    q = 0.5 * (q + q.T)
    vals, vecs = np.linalg.eigh(q)
    if vals[0] < -PSD_TOL * max(1.0, abs(vals[-1])):
        raise ValueError("matrix is not positive semidefinite")
    lam = max(vals[-1], 0.0)
    if lam == 0.0:
        return np.zeros(q.shape[0])
    top = vecs[:, vals >= lam - 1e-12 * max(lam, 1.0)]
    if top.shape[1] == 1:
        v = top[:, 0]
    else:
        # project unit vectors in order and keep the first usable direction
        proj = top @ top.T
        j = int(np.argmax(np.linalg.norm(proj, axis=0) > 1e-6))
        v = proj[:, j] / np.linalg.norm(proj[:, j])
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return math.sqrt(lam) * v


def relaxation_gap(q) -> float:
    """Largest relative Frobenius distance from each ``Q_k`` to its rank-one retrieval."""
    worst = 0.0
    for qk in np.asarray(q, dtype=float):
        nrm = np.linalg.norm(qk)
        if nrm == 0.0:
            continue
        w = rank_one_retrieval(qk)
        worst = max(worst, float(np.linalg.norm(qk - np.outer(w, w)) / nrm))
    return worst


def _gram_values(values, qv) -> np.ndarray:
    # interior-point output can sit a hair outside the cone; clip to the nearest PSD matrix
    out = []
    for var in qv:
        vals, vecs = np.linalg.eigh(values[var.name])
        out.append((vecs * np.clip(vals, 0.0, None)) @ vecs.T)
    return np.array(out)


def solve_parameterized_sdr(problem: DesignProblem, mu: float, w_init, cfg: SdrConfig = SdrConfig()) -> InnerResult:
    """SDR-based CCCP for ``max N(W) - mu * D(W)`` from a feasible ``w_init``."""
    w = np.asarray(w_init, dtype=float)
    q_prev = GramPrecoder.from_precoder(w).q
    result = InnerResult(w=w, objective=problem.parameterized(w, mu), iterations=0, status=MAX_ITER)
    best = None  # last iterate that met every threshold after retrieval
    for m in range(1, cfg.lmax3 + 1):
        prog, qv = build_sdr_subproblem(problem, q_prev, mu)
        sol = solve(prog, tol=cfg.solver_tol)
        if not sol.ok:
            if m == 1:
                result.status = INFEASIBLE if sol.status == INFEASIBLE else NUMERICAL_ERROR
            else:
                result.status = DEGRADED
            break
        q_star = _gram_values(sol.values, qv)
        w_new = np.column_stack([rank_one_retrieval(qk) for qk in q_star])
        w_new = problem.clip_to_bounds(w_new)
        rates = problem.rates(w_new)
        violated = bool(np.any(rates < problem.thresholds - cfg.violation_tol))
        change = relative_change(w_new, w, cfg.change_floor)
        obj = problem.parameterized(w_new, mu)
        rec = IterationRecord(m, w_new, obj, problem.see(w_new), rates, change, relaxation_gap(q_star), violated)
        result.history.append(rec)
        w = w_new
        q_prev = GramPrecoder.from_precoder(w).q
        result.iterations = m
        if not violated:
            best = rec
        if change <= cfg.eps3:
            result.status = CONVERGED
            break
    if best is not None:
        result.w, result.objective = best.w, best.objective
    elif result.status != INFEASIBLE and result.status != NUMERICAL_ERROR:
        # no retrieved point met the thresholds; the feasible start is all we have
        result.status = DEGRADED
    return result
