"""Drive-current bookkeeping and the total consumed power model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DrivePolicy:
    dc_bias: np.ndarray  # A, one entry per luminary
    i_max: float  # A

    def __post_init__(self):
        dc = np.array(self.dc_bias, dtype=float)
        if dc.ndim != 1:
            raise ValueError("dc_bias must be a vector")
        if np.any(dc < 0) or np.any(dc > self.i_max):
            raise ValueError("need 0 <= I_DC <= I_max for every luminary")
        dc.setflags(write=False)
        object.__setattr__(self, "dc_bias", dc)

    @classmethod
    def from_dbm(cls, power_dbm: float, n_tx: int, conversion_factor: float = 2.0, i_max: float | None = None):
        """Uniform DC bias giving ``power_dbm`` average optical power per luminary.

        ``i_max`` defaults to twice the bias, which makes the swing bound equal the bias.
        """
        dc = dbm_to_watts(power_dbm) / conversion_factor
        return cls(np.full(n_tx, dc), 2.0 * dc if i_max is None else i_max)

    @property
    def bounds(self) -> np.ndarray:
        return np.minimum(self.dc_bias, self.i_max - self.dc_bias)

    @property
    def n_tx(self) -> int:
        return self.dc_bias.shape[0]


@dataclass(frozen=True)
class PowerModel:
    circuitry_power: float = 8.0  # W
    led_forward_voltage: float = 3.0  # V
    equiv_resistance: float = 3.0  # ohm, already multiplied by the symbol variance

    def __post_init__(self):
        if min(self.circuitry_power, self.led_forward_voltage, self.equiv_resistance) < 0:
            raise ValueError("power model parameters must be nonnegative")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts) + 30.0


def amplitude_bound(policy: DrivePolicy, n: int) -> float:
    """Largest signal swing that keeps luminary ``n`` (0-based) inside [0, I_max]."""
    dc = policy.dc_bias[n]
    return float(min(dc, policy.i_max - dc))


def row_l1_feasible(w, policy: DrivePolicy, tol: float = 0.0) -> bool:
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if w.shape[0] != policy.n_tx:
        raise ValueError(f"precoder has {w.shape[0]} rows, policy has {policy.n_tx} luminaries")
    return bool(np.all(np.abs(w).sum(axis=1) <= policy.bounds + tol))


def dc_power(policy: DrivePolicy, model: PowerModel) -> float:
    return float(model.led_forward_voltage * policy.dc_bias.sum() + model.circuitry_power)


def total_power(w, policy: DrivePolicy, model: PowerModel) -> float:
    w = np.asarray(w, dtype=float)
    return dc_power(policy, model) + model.equiv_resistance * float(np.sum(w * w))
