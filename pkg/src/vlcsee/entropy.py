"""Monte Carlo check of the entropy inequalities behind the secrecy-rate bound.

For user ``k`` with ``g_ki = h_k^T w_i``, uniform symbols on [-1, 1] and
Gaussian noise, the four entropies

* ``h(y_k)``                  sum of K scaled uniforms plus noise
* ``h(y_k | d_k)``            same without the own term
* ``h(y_-k | d_-k)``          vector of the other outputs driven by ``d_k`` only
* ``h(y_-k | d_k, d_-k)``     pure noise

are estimated as ``-mean(log2 f(Y))`` with exact closed-form densities ``f``.
The estimator standard error decides whether a bound is violated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr

from .geometry import ChannelMatrix

LOG2E = 1.0 / math.log(2.0)
TWO_PI_E = 2.0 * math.pi * math.e
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_phi_diff(a, b):
    """``log(Phi(b) - Phi(a))`` for ``a < b`` without cancellation in either tail."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast(a, b).shape)
    upper = a > 0
    lower = b < 0
    mid = ~(upper | lower)
    la, lb = log_ndtr(-a[upper]), log_ndtr(-b[upper])
    out[upper] = la + np.log1p(-np.exp(lb - la))
    la, lb = log_ndtr(a[lower]), log_ndtr(b[lower])
    out[lower] = lb + np.log1p(-np.exp(la - lb))
    out[mid] = np.log(ndtr(b[mid]) - ndtr(a[mid]))
    return out


def log_density_uniform_line(y, u, s):
    """Natural-log density of ``y = u * t + n``, ``t ~ U(-1, 1)``, ``n ~ N(0, diag(s^2))``.

    ``y`` has shape (samples, m); ``u`` and ``s`` have length m.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    m = y.shape[1]
    z = y / s
    v = u / s
    a = float(v @ v)
    base = -m * HALF_LOG_2PI - float(np.sum(np.log(s)))
    c = np.sum(z * z, axis=1)
    if a < 1e-24:
        return base - 0.5 * c
    b = z @ v
    mu = b / a
    ra = math.sqrt(a)
    log_mass = _log_phi_diff(ra * (-1.0 - mu), ra * (1.0 - mu))
    return base - math.log(2.0) - 0.5 * (c - b * mu) + HALF_LOG_2PI - 0.5 * math.log(a) + log_mass


def _g_neg(x):
    # G(-|x|) with G(x) = x Phi(x) + phi(x); G(x) = max(x, 0) + G(-|x|)
    ax = -np.abs(x)
    return ax * ndtr(ax) + np.exp(-0.5 * ax * ax) / math.sqrt(2.0 * math.pi)


def density_two_uniforms(y, c1, c2, sigma):
    """Density of ``c1*t1 + c2*t2 + n``, ``t ~ U(-1, 1)``, ``n ~ N(0, sigma^2)``."""
    y = np.asarray(y, dtype=float) / sigma
    c1, c2 = abs(c1) / sigma, abs(c2) / sigma
    args = (y + c1 + c2, y - c1 + c2, y + c1 - c2, y - c1 - c2)
    signs = (1.0, -1.0, -1.0, 1.0)
    ramp = sum(sg * np.maximum(x, 0.0) for sg, x in zip(signs, args))
    smooth = sum(sg * _g_neg(x) for sg, x in zip(signs, args))
    return np.maximum(ramp + smooth, 0.0) / (4.0 * c1 * c2 * sigma)


def _h2_neg(x):
    # H(-|x|) with H(x) = ((x^2 + 1) Phi(x) + x phi(x)) / 2, the antiderivative of G
    ax = -np.abs(x)
    return 0.5 * ((ax * ax + 1.0) * ndtr(ax) + ax * np.exp(-0.5 * ax * ax) / math.sqrt(2.0 * math.pi))


def density_three_uniforms(y, c1, c2, c3, sigma):
    """Density of ``c1*t1 + c2*t2 + c3*t3 + n`` with ``t ~ U(-1, 1)`` and ``n ~ N(0, sigma^2)``."""
    y = np.asarray(y, dtype=float) / sigma
    c = [abs(c1) / sigma, abs(c2) / sigma, abs(c3) / sigma]
    total = np.zeros_like(y)
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            for s3 in (1.0, -1.0):
                x = y + s1 * c[0] + s2 * c[1] + s3 * c[2]
                sg = s1 * s2 * s3
                # H(x) = (x^2 + 1) / 2 - H(-x) for x > 0
                pos = x > 0
                total += sg * (np.where(pos, 0.5 * (x * x + 1.0), 0.0) + np.where(pos, -1.0, 1.0) * _h2_neg(x))
    return np.maximum(total, 0.0) / (8.0 * c[0] * c[1] * c[2] * sigma)


def log_density_sum(y, coeffs, sigma):
    """Natural-log density of ``sum_i c_i t_i + n`` with independent ``t_i ~ U(-1, 1)``."""
    y = np.asarray(y, dtype=float)
    c = [abs(x) for x in coeffs if abs(x) > 1e-12 * sigma]
    if not c:
        return -HALF_LOG_2PI - math.log(sigma) - 0.5 * (y / sigma) ** 2
    if len(c) == 1:
        return log_density_uniform_line(y[:, None], [c[0]], [sigma])
    with np.errstate(divide="ignore"):
        if len(c) == 2:
            return np.log(density_two_uniforms(y, c[0], c[1], sigma))
        if len(c) == 3:
            return np.log(density_three_uniforms(y, c[0], c[1], c[2], sigma))
    raise ValueError("at most three uniform terms are supported")


@dataclass
class Estimate:
    value: float  # bits
    stderr: float  # bits


def _mc(logf) -> Estimate:
    bits = -np.asarray(logf) * LOG2E
    return Estimate(float(np.mean(bits)), float(np.std(bits, ddof=1) / math.sqrt(bits.size)))


@dataclass
class UserCheck:
    user: int
    h_y: Estimate
    h_y_given_dk: Estimate
    h_others_given_rest: Estimate
    h_noise: Estimate
    epi_bound: float
    gaussian_bound: float
    det_bound: float
    noise_entropy: float
    checks: dict = field(default_factory=dict)


@dataclass
class EntropyReport:
    users: list
    n_samples: int
    z: float

    @property
    def all_hold(self) -> bool:
        return all(all(u.checks.values()) for u in self.users)

    def lines(self) -> list[str]:
        out = []
        for u in self.users:
            out.append(
                f"user {u.user}: "
                f"h(y)={u.h_y.value:.5f}+-{u.h_y.stderr:.1e} >= EPI {u.epi_bound:.5f} [{_pf(u.checks['epi'])}]; "
                f"h(y|d)={u.h_y_given_dk.value:.5f}+-{u.h_y_given_dk.stderr:.1e} <= Gauss {u.gaussian_bound:.5f} "
                f"[{_pf(u.checks['gaussian'])}]; "
                f"h(y_-k|d_-k)={u.h_others_given_rest.value:.5f}+-{u.h_others_given_rest.stderr:.1e} "
                f"<= det {u.det_bound:.5f} [{_pf(u.checks['determinant'])}]; "
                f"h(noise)={u.h_noise.value:.5f}+-{u.h_noise.stderr:.1e} == {u.noise_entropy:.5f} "
                f"[{_pf(u.checks['noise'])}]"
            )
        return out


def _pf(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def verify_entropy_chain(channel: ChannelMatrix, w, n_samples: int = 1_000_000, rng_seed=0, z: float = 3.0,
                         diff_entropy_bits: float = 1.0, variance: float = 1.0 / 3.0) -> EntropyReport:
    """Estimate the four entropies per user and test the bounds within ``z`` standard errors.

    Symbols are uniform on [-1, 1]; ``diff_entropy_bits`` and ``variance`` enter
    only the bound formulas and default to the uniform values.
    """
    h = np.asarray(channel.gains, dtype=float)
    w = np.asarray(w, dtype=float)
    k_users = h.shape[0]
    if k_users > 3:
        raise ValueError("entropy verification supports at most three users")
    g = h @ w  # g[k, i] = h_k^T w_i
    nv = np.asarray(channel.noise_vars_effective, dtype=float)
    sig = np.sqrt(nv)
    rng = np.random.default_rng(rng_seed)
    d = rng.uniform(-1.0, 1.0, size=(n_samples, k_users))
    noise = rng.standard_normal((n_samples, k_users)) * sig
    y = d @ g.T + noise  # y[:, k] = sum_i g[k, i] d_i + n_k

    users = []
    for k in range(k_users):
        others = [i for i in range(k_users) if i != k]
        e_y = _mc(log_density_sum(y[:, k], g[k], sig[k]))
        y_cond = y[:, k] - g[k, k] * d[:, k]
        e_cond = _mc(log_density_sum(y_cond, g[k, others], sig[k]))
        if others:
            y_hat = (g[np.ix_(others, [k])] * d[:, [k]].T).T + noise[:, others]
            e_vec = _mc(log_density_uniform_line(y_hat, g[others, k], sig[others]))
            e_noise = _mc(log_density_uniform_line(noise[:, others], np.zeros(len(others)), sig[others]))
        else:
            e_vec = e_noise = Estimate(0.0, 0.0)
        epi = 0.5 * math.log2(float(np.sum(g[k] ** 2)) * 2.0 ** (2 * diff_entropy_bits) + TWO_PI_E * nv[k])
        gauss = 0.5 * math.log2(TWO_PI_E * (float(np.sum(g[k, others] ** 2)) * variance + nv[k]))
        noise_h = 0.5 * math.log2(TWO_PI_E ** len(others) * float(np.prod(nv[others]))) if others else 0.0
        det = noise_h + 0.5 * math.log2(1.0 + float(np.sum(g[others, k] ** 2 * variance / nv[others])))
        checks = {
            "epi": e_y.value + z * e_y.stderr >= epi,
            "gaussian": e_cond.value - z * e_cond.stderr <= gauss,
            "determinant": e_vec.value - z * e_vec.stderr <= det,
            "noise": abs(e_noise.value - noise_h) <= z * e_noise.stderr + 1e-12,
        }
        users.append(UserCheck(k, e_y, e_cond, e_vec, e_noise, epi, gauss, det, noise_h, checks))
    return EntropyReport(users, n_samples, z)


def gaussian_symbol_tightness(channel: ChannelMatrix, w, k: int = 0, n_samples: int = 200_000, rng_seed=0,
                              variance: float = 1.0 / 3.0, z: float = 3.0) -> tuple[Estimate, float, bool]:
    """Diagnostic: with Gaussian symbols of the same variance the conditional bound is tight."""
    h = np.asarray(channel.gains, dtype=float)
    g = h @ np.asarray(w, dtype=float)
    nv = np.asarray(channel.noise_vars_effective, dtype=float)
    others = [i for i in range(h.shape[0]) if i != k]
    rng = np.random.default_rng(rng_seed)
    d = rng.standard_normal((n_samples, len(others))) * math.sqrt(variance)
    var = float(np.sum(g[k, others] ** 2)) * variance + nv[k]
    y = d @ g[k, others] + rng.standard_normal(n_samples) * math.sqrt(nv[k])
    est = _mc(-HALF_LOG_2PI - 0.5 * math.log(var) - 0.5 * y * y / var)
    bound = 0.5 * math.log2(TWO_PI_E * var)
    return est, bound, abs(est.value - bound) <= z * est.stderr
