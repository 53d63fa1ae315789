"""Secrecy-rate lower bound and secrecy energy efficiency.

All rates are in bits/s/Hz. The bound is deliberately left unclipped: it
can be negative when a user's leakage dominates its own link, and the
design problems keep it above a nonnegative threshold through explicit
constraints. Use :func:`secrecy_rate_clipped` for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ChannelMatrix
from .power import DrivePolicy, PowerModel, total_power

TWO_PI_E = 2.0 * math.pi * math.e


@dataclass(frozen=True)
class SymbolDistribution:
    diff_entropy_bits: float
    variance: float
    name: str = "custom"

    def __post_init__(self):
        if self.variance > 1.0 or self.variance <= 0:
            raise ValueError("symbol variance must lie in (0, 1] for support [-1, 1]")
        if self.diff_entropy_bits > 1.0:
            raise ValueError("no distribution on [-1, 1] has more than 1 bit of differential entropy")


@dataclass(frozen=True)
class LinkCoefficients:
    a: np.ndarray
    b: np.ndarray


def uniform_symbols() -> SymbolDistribution:
    return SymbolDistribution(diff_entropy_bits=1.0, variance=1.0 / 3.0, name="uniform")


def link_coefficients(channel: ChannelMatrix, dist: SymbolDistribution | None = None) -> LinkCoefficients:
    dist = dist or uniform_symbols()
    nv = channel.noise_vars_effective
    a = 2.0 ** (2.0 * dist.diff_entropy_bits) / (TWO_PI_E * nv)
    b = dist.variance / nv
    return LinkCoefficients(a=a, b=b)


def _cross_gains(w, gains):
    # G[k, i] = h_k^T w_i
    return np.asarray(gains, dtype=float) @ np.asarray(w, dtype=float)


def secrecy_rates(w, channel: ChannelMatrix, coeffs: LinkCoefficients) -> np.ndarray:
    """Vector of per-user secrecy-rate lower bounds."""
    g2 = _cross_gains(w, channel.gains) ** 2
    own = np.diag(g2)
    interference = g2.sum(axis=1) - own  # sum_{i != k} (h_k^T w_i)^2
    a, b = coeffs.a, coeffs.b
    leakage = (b[:, None] * g2).sum(axis=0) - b * own  # sum_{i != k} b_i (h_i^T w_k)^2
    num = 1.0 + a * g2.sum(axis=1)
    den = 1.0 + b * interference
    return 0.5 * np.log2(num / den) - 0.5 * np.log2(1.0 + leakage)


def secrecy_rate(w, channel: ChannelMatrix, coeffs: LinkCoefficients, k: int) -> float:
    return float(secrecy_rates(w, channel, coeffs)[k])


def secrecy_rate_clipped(w, channel: ChannelMatrix, coeffs: LinkCoefficients, k: int) -> float:
    return max(0.0, secrecy_rate(w, channel, coeffs, k))


def sum_rate(w, channel: ChannelMatrix, coeffs: LinkCoefficients) -> float:
    """Numerator of the secrecy energy efficiency."""
    return float(secrecy_rates(w, channel, coeffs).sum())


def see(w, channel: ChannelMatrix, coeffs: LinkCoefficients, policy: DrivePolicy, model: PowerModel) -> float:
    """Secrecy energy efficiency in bits/s/Hz/W."""
    return sum_rate(w, channel, coeffs) / total_power(w, policy, model)
