"""Dinkelbach outer loop for single-ratio maximisation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .problem import CONVERGED, DEGRADED, INFEASIBLE, MAX_ITER


@dataclass(frozen=True)
class DinkelbachConfig:
    mu0: float | None = None
    eps1: float = 1e-4
    lmax1: int = 30

    def __post_init__(self):
        if self.eps1 <= 0 or self.lmax1 < 1:
            raise ValueError("need eps1 > 0 and lmax1 >= 1")


@dataclass
class FractionalProblem:
    """``maximize N(x) / D(x)`` given an inner solver for ``max N - mu * D``.

    ``inner_solver(mu, x_start)`` returns an object with attributes ``w`` and
    ``ok`` (an :class:`~vlcsee.problem.InnerResult` or anything shaped like it).
    """

    numerator: Callable[[Any], float]
    denominator: Callable[[Any], float]
    inner_solver: Callable[[float, Any], Any]


@dataclass
class DinkelbachResult:
    w: Any
    mu: float
    status: str
    trace: list[tuple[float, float]] = field(default_factory=list)  # (mu_l, F(mu_l))
    inner: list[Any] = field(default_factory=list)

    @property
    def outer_iterations(self) -> int:
        return len(self.trace)

    @property
    def inner_iterations(self) -> int:
        return sum(getattr(r, "iterations", 1) for r in self.inner)


def run(problem: FractionalProblem, cfg: DinkelbachConfig, x0) -> DinkelbachResult:
    num, den = problem.numerator, problem.denominator
    mu = cfg.mu0 if cfg.mu0 is not None else num(x0) / den(x0)
    x = x0
    out = DinkelbachResult(w=x0, mu=mu, status=MAX_ITER)
    for it in range(cfg.lmax1):
        inner = problem.inner_solver(mu, x)
        out.inner.append(inner)
        if not inner.ok:
            # keep the last ratio-improving iterate if there is one
            out.status = INFEASIBLE if it == 0 else DEGRADED
            return out
        x = inner.w
        f = num(x) - mu * den(x)
        out.trace.append((mu, f))
        out.w = x
        out.mu = num(x) / den(x)
        if f <= cfg.eps1:
            out.status = CONVERGED
            return out
        mu = out.mu
    return out
