"""Shared container for one SEE design instance and the inner-solver result type."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ChannelMatrix
from .power import DrivePolicy, PowerModel, dc_power, total_power
from .secrecy import LinkCoefficients, link_coefficients, secrecy_rates

CONVERGED = "converged"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"
NUMERICAL_ERROR = "numerical_error"
DEGRADED = "degraded"


@dataclass(frozen=True)
class DesignProblem:
    channel: ChannelMatrix
    coeffs: LinkCoefficients
    policy: DrivePolicy
    model: PowerModel
    thresholds: np.ndarray

    @classmethod
    def create(cls, channel, policy, model, thresholds, coeffs=None):
        lam = np.broadcast_to(np.asarray(thresholds, dtype=float), (channel.n_users,)).copy()
        if np.any(lam < 0):
            raise ValueError("secrecy thresholds must be nonnegative")
        if policy.n_tx != channel.n_tx:
            raise ValueError("drive policy and channel disagree on the number of luminaries")
        return cls(channel, coeffs or link_coefficients(channel), policy, model, lam)

    @property
    def n_tx(self) -> int:
        return self.channel.n_tx

    @property
    def n_users(self) -> int:
        return self.channel.n_users

    @property
    def gains(self) -> np.ndarray:
        return self.channel.gains

    @property
    def bounds(self) -> np.ndarray:
        return self.policy.bounds

    @property
    def p_dc(self) -> float:
        return dc_power(self.policy, self.model)

    @property
    def xi(self) -> float:
        return self.model.equiv_resistance

    def rates(self, w) -> np.ndarray:
        return secrecy_rates(w, self.channel, self.coeffs)

    def numerator(self, w) -> float:
        return float(self.rates(w).sum())

    def denominator(self, w) -> float:
        return total_power(w, self.policy, self.model)

    def see(self, w) -> float:
        return self.numerator(w) / self.denominator(w)

    def parameterized(self, w, mu: float) -> float:
        return self.numerator(w) - mu * self.denominator(w)

    def min_slack(self, w) -> float:
        return float(np.min(self.rates(w) - self.thresholds))

    def feasible(self, w, rate_tol: float = 1e-5, amp_tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float)
        rows_ok = np.all(np.abs(w).sum(axis=1) <= self.bounds + amp_tol)
        return bool(rows_ok and self.min_slack(w) >= -rate_tol)

    def clip_to_bounds(self, w) -> np.ndarray:
        """Shrink rows that overshoot their swing bound by solver round-off."""
        w = np.array(w, dtype=float)
        l1 = np.abs(w).sum(axis=1)
        over = l1 > self.bounds
        if np.any(over):
            w[over] *= (self.bounds[over] / l1[over])[:, None]
        return w

    def with_thresholds(self, thresholds) -> "DesignProblem":
        return DesignProblem.create(self.channel, self.policy, self.model, thresholds, self.coeffs)


@dataclass
class IterationRecord:
    iteration: int
    w: np.ndarray
    objective: float  # N(W) - mu * D(W) evaluated exactly
    see: float
    rates: np.ndarray
    change: float
    relaxation_gap: float | None = None
    threshold_violation: bool = False


@dataclass
class InnerResult:
    w: np.ndarray
    objective: float
    iterations: int
    status: str
    history: list[IterationRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in (CONVERGED, MAX_ITER, DEGRADED)


def relative_change(new, old, floor: float = 1e-12) -> float:
    new = np.asarray(new, dtype=float)
    old = np.asarray(old, dtype=float)
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(new), floor))
