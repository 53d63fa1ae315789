"""Zero-forcing precoding: CCCP design, random selection baseline and initial points.

Under ZF every user sees neither interference nor leakage, so the secrecy bound
collapses to ``0.5 * log2(1 + a_k * rho_k)`` with ``rho_k = (h_k^T w_k)^2``.
Internally the programs use the normalised gains ``q_k = a_k * rho_k`` because
raw ``rho`` values sit around 1e-10 and would wreck solver scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

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

RHO_FLOOR = 1e-10


def taylor_sqrt(rho_prev, rho, floor: float = RHO_FLOOR):
    """First-order expansion of ``sqrt(rho)`` at ``rho_prev``; a global over-estimator."""
    rho_prev = np.asarray(rho_prev, dtype=float)
    if np.any(rho_prev <= floor):
        raise ValueError("expansion point must be above the positivity floor")
    root = np.sqrt(rho_prev)
    if isinstance(rho, Affine):
        return (rho - float(rho_prev)) * (0.5 / float(root)) + float(root)
    if isinstance(rho, (list, tuple)) and rho and isinstance(rho[0], Affine):
        return [(r - float(p)) * (0.5 / float(s)) + float(s) for r, p, s in zip(rho, rho_prev, root)]
    return root + (np.asarray(rho, dtype=float) - rho_prev) / (2.0 * root)


@dataclass(frozen=True)
class ZfState:
    rho: np.ndarray
    w: np.ndarray

    @classmethod
    def from_precoder(cls, gains, w) -> "ZfState":
        w = np.asarray(w, dtype=float)
        return cls(np.diag(np.asarray(gains) @ w) ** 2, w)

    def residual(self, gains) -> float:
        """``||H W - diag(sqrt(rho))||`` in the Frobenius norm."""
        return float(np.linalg.norm(np.asarray(gains) @ self.w - np.diag(np.sqrt(self.rho))))


@dataclass(frozen=True)
class ZfConfig:
    eps4: float = 1e-4
    lmax4: int = 100
    solver_tol: float = 1e-8
    floor: float = RHO_FLOOR  # applied to the normalised gain a * rho


def zf_rates(problem: DesignProblem, rho) -> np.ndarray:
    return 0.5 * np.log2(1.0 + problem.coeffs.a * np.asarray(rho, dtype=float))


def min_rho(problem: DesignProblem) -> np.ndarray:
    return (2.0 ** (2.0 * problem.thresholds) - 1.0) / problem.coeffs.a


def _full_row_rank(h) -> bool:
    return np.linalg.matrix_rank(h) == h.shape[0]


def clean_zf(problem: DesignProblem, w) -> np.ndarray:
    """Project each column onto the null space of the other users, then fit the swing bounds."""
    h = problem.gains
    w = np.array(w, dtype=float)
    k_users = problem.n_users
    for k in range(k_users):
        others = np.delete(h, k, axis=0)
        if others.size:
            w[:, k] -= np.linalg.pinv(others) @ (others @ w[:, k])
    # flip columns so that every diagonal gain is nonnegative
    signs = np.where(np.diag(h @ w) < 0, -1.0, 1.0)
    w *= signs
    l1 = np.abs(w).sum(axis=1)
    scale = np.min(np.where(l1 > 0, problem.bounds / np.maximum(l1, 1e-300), np.inf))
    if scale < 1.0:
        w *= scale
    return w


def _build(problem: DesignProblem, mu: float, q_prev, q_min):
    n_tx, n_users = problem.n_tx, problem.n_users
    h = problem.gains
    sa = np.sqrt(problem.coeffs.a)
    prog = ConicProgram()
    wp = prog.matrix("Wp", n_tx, n_users)
    wm = prog.matrix("Wm", n_tx, n_users)
    w = [[wp[n, k] - wm[n, k] for k in range(n_users)] for n in range(n_tx)]
    q = prog.vector("q", n_users)
    r = prog.vector("r", n_users)
    tau = prog.scalar("tau").expr
    for n in range(n_tx):
        row = Affine()
        for k in range(n_users):
            prog.add_ge(wp[n, k])
            prog.add_ge(wm[n, k])
            row += wp[n, k] + wm[n, k]
        prog.add_le(row, float(problem.bounds[n]))
    lin = taylor_sqrt(q_prev, [q[k] for k in range(n_users)])
    for k in range(n_users):
        col = [w[n][k] for n in range(n_tx)]
        for i in range(n_users):
            hw = linear_sum(h[i] * sa[i], col)
            prog.add_eq(hw, lin[k] if i == k else 0.0)
        prog.add_ge(q[k], float(q_min[k]))
        # r_k <= 0.5 * log2(1 + q_k)
        add_log_epigraph(prog, r[k], q[k])
    prog.add_square_le([w[n][k] for n in range(n_tx) for k in range(n_users)], tau)
    obj = Affine()
    for k in range(n_users):
        obj += r[k]
    prog.maximize(obj - (tau * problem.xi + problem.p_dc) * mu)
    return prog


def solve_parameterized_zf(problem: DesignProblem, mu: float, rho_init, cfg: ZfConfig = ZfConfig()) -> InnerResult:
    """CCCP over ZF precoders for ``max N(W) - mu * D(W)``; ``rho_init`` must be ZF-feasible."""
    a = problem.coeffs.a
    q_min = np.maximum(a * min_rho(problem), cfg.floor)
    q = np.maximum(a * np.asarray(rho_init, dtype=float), q_min)
    w = None
    result = InnerResult(w=None, objective=-math.inf, iterations=0, status=MAX_ITER)
    restarted = False
    for m in range(1, cfg.lmax4 + 1):
        sol = solve(_build(problem, mu, q, q_min), tol=cfg.solver_tol)
        if not sol.ok:
            if m == 1:
                result.status = INFEASIBLE if sol.status == INFEASIBLE else NUMERICAL_ERROR
            else:
                result.status = DEGRADED
            return result
        w_new = clean_zf(problem, sol.values["Wp"] - sol.values["Wm"])
        q_new = a * np.diag(problem.gains @ w_new) ** 2
        if np.any(q_new <= cfg.floor):
            if restarted:
                result.status = NUMERICAL_ERROR if w is None else DEGRADED
                return result
            restarted = True
            q = np.maximum(q_new, np.maximum(q_min, 1e-3 * max(float(q_new.max()), 1.0)))
            continue
        change = relative_change(q_new, q)
        obj = problem.parameterized(w_new, mu)
        result.history.append(IterationRecord(m, w_new, obj, problem.see(w_new), zf_rates(problem, q_new / a), change))
        w, q = w_new, q_new
        result.w, result.objective, result.iterations = w, obj, m
        if change <= cfg.eps4:
            result.status = CONVERGED
            return result
    return result


@dataclass
class SelectionResult:
    w: np.ndarray | None
    see: float
    status: str
    n_feasible: int


def random_zf_selection(problem: DesignProblem, n_samples: int, rng_seed) -> SelectionResult:
    """Best of ``n_samples`` pseudoinverse ZF precoders scaled onto the swing frontier.

    Gains are drawn as ``rho_k = u_k^2 * scale`` with ``u_k ~ U(0, 1)``; the common
    scale is then fixed by the tightest row-L1 bound.
    """
    h = problem.gains
    if not _full_row_rank(h):
        return SelectionResult(None, -math.inf, NUMERICAL_ERROR, 0)
    pinv = np.linalg.pinv(h)
    rng = np.random.default_rng(rng_seed)
    u = rng.random((n_samples, problem.n_users))
    row_l1 = u @ np.abs(pinv).T  # (samples, n_tx)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.min(problem.bounds / row_l1, axis=1)
    scale = np.where(np.isfinite(scale), scale, 0.0)
    s = u * scale[:, None]
    rates = 0.5 * np.log2(1.0 + problem.coeffs.a * s**2)
    col_norm2 = np.sum(pinv**2, axis=0)
    see = rates.sum(axis=1) / (problem.p_dc + problem.xi * (s**2 @ col_norm2))
    ok = np.all(rates >= problem.thresholds, axis=1)
    if not np.any(ok):
        return SelectionResult(None, -math.inf, INFEASIBLE, 0)
    masked = np.where(ok, see, -np.inf)
    best = int(np.argmax(masked))  # first index wins ties
    w = clean_zf(problem, pinv * s[best])
    return SelectionResult(w, float(problem.see(w)), CONVERGED, int(ok.sum()))


def _pinv_max_min(problem: DesignProblem, pinv) -> np.ndarray | None:
    a, lam = problem.coeffs.a, problem.thresholds
    absp = np.abs(pinv)

    def load(t):
        s = np.sqrt((2.0 ** (2.0 * (lam + t)) - 1.0) / a)
        return s, np.max(absp @ s / problem.bounds)

    s0, l0 = load(0.0)
    if l0 > 1.0:
        return None
    lo, hi = 0.0, 1.0
    while load(hi)[1] <= 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e3:
            break
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if load(mid)[1] <= 1.0:
            lo = mid
        else:
            hi = mid
    s, _ = load(lo)
    return pinv * s


def _lp_zf(problem: DesignProblem) -> np.ndarray | None:
    """Largest common multiple of the minimum ZF amplitudes over all ZF precoders.

    Variables ``(W+, W-, s, t)``; ``H (W+ - W-) = diag(s)``, ``s >= t * s_min``, row L1 bounds.
    Feasible in the ZF sense iff the optimal ``t >= 1``.
    """
    h = problem.gains
    n, k = problem.n_tx, problem.n_users
    s_min = np.sqrt(min_rho(problem))
    nw = n * k
    nv = 2 * nw + k + 1
    widx = lambda r, c: r * k + c  # noqa: E731
    a_eq, b_eq = [], []
    for i in range(k):
        for c in range(k):
            row = np.zeros(nv)
            for r in range(n):
                row[widx(r, c)] = h[i, r]
                row[nw + widx(r, c)] = -h[i, r]
            if i == c:
                row[2 * nw + c] = -1.0
            a_eq.append(row)
            b_eq.append(0.0)
    a_ub, b_ub = [], []
    for r in range(n):
        row = np.zeros(nv)
        for c in range(k):
            row[widx(r, c)] = 1.0
            row[nw + widx(r, c)] = 1.0
        a_ub.append(row)
        b_ub.append(problem.bounds[r])
    for c in range(k):
        row = np.zeros(nv)
        row[2 * nw + c] = -1.0
        row[-1] = s_min[c]
        a_ub.append(row)
        b_ub.append(0.0)
    cost = np.zeros(nv)
    cost[-1] = -1.0
    bounds = [(0, None)] * (2 * nw + k) + [(0, 1e6)]
    # row scaling keeps HiGHS happy with channel gains around 1e-5
    scale = 1.0 / np.maximum(np.abs(np.array(a_eq)).max(axis=1), 1e-300)
    res = linprog(
        cost,
        A_ub=np.array(a_ub),
        b_ub=np.array(b_ub),
        A_eq=np.array(a_eq) * scale[:, None],
        b_eq=np.array(b_eq),
        bounds=bounds,
        method="highs",
    )
    if res.status != 0 or res.x[-1] < 1.0 + 1e-9:
        return None
    x = res.x
    return (x[:nw] - x[nw : 2 * nw]).reshape(n, k)


def zf_initial_point(problem: DesignProblem, null_space: bool = True) -> ZfState | None:
    """Strictly feasible ZF precoder or ``None``.

    The max-min slack pseudoinverse design is tried first. With ``null_space``
    a linear program over the full ZF family (null-space components allowed)
    is used as a fallback.
    """
    h = problem.gains
    if problem.n_tx < problem.n_users or not _full_row_rank(h):
        return None
    candidates = [_pinv_max_min(problem, np.linalg.pinv(h))]
    if candidates[0] is None and null_space:
        candidates.append(_lp_zf(problem))
    for w in candidates:
        if w is None:
            continue
        w = clean_zf(problem, w)
        if problem.feasible(w, rate_tol=1e-9):
            return ZfState.from_precoder(h, w)
    return None


def amplitude_screen(problem: DesignProblem) -> bool:
    """Necessary condition for feasibility of the general (non-ZF) design.

    Interference and leakage can only lower a user's bound, so user ``k`` needs
    ``sum_n h_kn |w_nk| >= sqrt(rho_min_k)``. Together with the row-L1 limits this
    is a linear feasibility problem in ``|W|``; if it fails no precoder works.
    """
    n, k = problem.n_tx, problem.n_users
    s_min = np.sqrt(min_rho(problem))
    if not np.any(s_min > 0):
        return True
    a_ub, b_ub = [], []
    for r in range(n):
        row = np.zeros(n * k)
        row[r * k : (r + 1) * k] = 1.0
        a_ub.append(row / problem.bounds[r])
        b_ub.append(1.0)
    for c in range(k):
        if s_min[c] == 0.0:
            continue
        row = np.zeros(n * k)
        row[c::k] = -problem.gains[c] / s_min[c]
        a_ub.append(row)
        b_ub.append(-1.0)
    res = linprog(np.zeros(n * k), A_ub=np.array(a_ub), b_ub=b_ub, bounds=(0, None), method="highs")
    return res.status == 0


@dataclass
class Detection:
    feasible: bool
    w: np.ndarray | None
    method: str  # screen | zf | phase_one | none


def random_zf_start(problem: DesignProblem, rng) -> np.ndarray:
    """One draw of the random-ZF family placed on the swing frontier."""
    pinv = np.linalg.pinv(problem.gains)
    w = pinv * rng.random(problem.n_users)
    l1 = np.abs(w).sum(axis=1)
    with np.errstate(divide="ignore"):
        scale = np.min(np.where(l1 > 0, problem.bounds / l1, np.inf))
    return w * scale if np.isfinite(scale) else w


def detect_feasibility(problem: DesignProblem, rng, phase_one: bool = True) -> Detection:
    """Cheap screen, then the ZF initial point, then one phase-I CCCP run.

    The phase-I start is a random ZF precoder on the swing frontier drawn from ``rng``.
    """
    from .cccp import find_feasible

    if not amplitude_screen(problem):
        return Detection(False, None, "screen")
    init = zf_initial_point(problem)
    if init is not None:
        return Detection(True, init.w, "zf")
    if not phase_one:
        return Detection(False, None, "none")
    w, _ = find_feasible(problem, random_zf_start(problem, rng))
    if w is not None:
        return Detection(True, w, "phase_one")
    return Detection(False, None, "none")
