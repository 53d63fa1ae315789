import math

import numpy as np
import pytest
from _builders import random_swing_precoder, two_by_two
from scipy import integrate, stats

from vlcsee.entropy import (
    density_three_uniforms,
    density_two_uniforms,
    gaussian_symbol_tightness,
    log_density_sum,
    log_density_uniform_line,
    verify_entropy_chain,
)


def _conv_uniform(f, c, y):
    """Density of ``X + c * t`` with ``t ~ U(-1, 1)`` by adaptive quadrature."""
    return integrate.quad(lambda t: f(y - t), -c, c, epsabs=1e-13, epsrel=1e-11)[0] / (2.0 * c)


def test_uniform_line_scalar_matches_quadrature():
    u, s = 1.7, 0.4
    for y in (-3.0, -1.7, 0.0, 0.9, 2.5):
        ref = _conv_uniform(stats.norm(scale=s).pdf, u, y)
        assert math.exp(log_density_uniform_line(np.array([[y]]), [u], [s])[0]) == pytest.approx(ref, rel=1e-9)


def test_uniform_line_far_tail_is_finite():
    v = log_density_uniform_line(np.array([[60.0], [-60.0]]), [1.0], [1.0])
    assert np.all(np.isfinite(v))
    assert v[0] == pytest.approx(v[1])


def test_uniform_line_two_dim_integrates_to_one():
    u, s = np.array([1.0, -0.6]), np.array([0.5, 0.8])
    f = lambda y2, y1: math.exp(log_density_uniform_line(np.array([[y1, y2]]), u, s)[0])  # noqa: E731
    total, _ = integrate.dblquad(f, -6, 6, -6, 6, epsabs=1e-9)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_two_uniforms_matches_quadrature():
    c1, c2, s = 1.3, 0.4, 0.25
    inner = lambda x: _conv_uniform(stats.norm(scale=s).pdf, c2, x)  # noqa: E731
    for y in (-2.0, -1.0, 0.0, 0.5, 1.69):
        ref = _conv_uniform(inner, c1, y)
        assert density_two_uniforms(np.array([y]), c1, c2, s)[0] == pytest.approx(ref, rel=1e-7)


def test_three_uniforms_matches_quadrature():
    c1, c2, c3, s = 1.0, 0.7, 0.3, 0.2
    for y in (-2.2, -0.5, 0.0, 1.1, 1.95):
        ref = _conv_uniform(lambda x: density_two_uniforms(np.array([x]), c1, c2, s)[0], c3, y)
        assert density_three_uniforms(np.array([y]), c1, c2, c3, s)[0] == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("coeffs", [(0.8, 0.5), (1.0, 0.7, 0.3), (2.0, 1e-3, 0.4)])
def test_sum_densities_integrate_to_one(coeffs):
    s = 0.3
    f = lambda y: math.exp(log_density_sum(np.array([y]), coeffs, s)[0])  # noqa: E731
    lim = sum(coeffs) + 10 * s
    total, _ = integrate.quad(f, -lim, lim, limit=200, points=[-sum(coeffs), 0.0, sum(coeffs)])
    assert total == pytest.approx(1.0, abs=1e-8)


def test_sum_density_degenerates_to_gaussian():
    y = np.linspace(-2, 2, 9)
    assert log_density_sum(y, [0.0, 0.0], 0.7) == pytest.approx(stats.norm(scale=0.7).logpdf(y))


def test_sum_density_rejects_four_terms():
    with pytest.raises(ValueError):
        log_density_sum(np.zeros(3), [1.0, 1.0, 1.0, 1.0], 1.0)


@pytest.fixture(scope="module")
def chain_report():
    problem = two_by_two()
    w = random_swing_precoder(problem, np.random.default_rng(5))
    return verify_entropy_chain(problem.channel, w, 1_000_000, rng_seed=11)


def test_entropy_chain_holds_two_users(chain_report):
    assert chain_report.n_samples == 1_000_000
    assert len(chain_report.users) == 2
    assert chain_report.all_hold, "\n".join(chain_report.lines())


def test_entropy_chain_estimates_are_precise(chain_report):
    for u in chain_report.users:
        for est in (u.h_y, u.h_y_given_dk, u.h_others_given_rest, u.h_noise):
            assert 0 < est.stderr < 5e-3


def test_entropy_chain_detects_a_false_bound():
    # claiming 4 bits of symbol entropy inflates the lower bound beyond h(y)
    problem = two_by_two()
    w = random_swing_precoder(problem, np.random.default_rng(5))
    rep = verify_entropy_chain(problem.channel, w, 20_000, rng_seed=1, diff_entropy_bits=4.0)
    assert not rep.all_hold
    assert not any(u.checks["epi"] for u in rep.users)


def test_gaussian_symbols_are_tight():
    problem = two_by_two()
    w = random_swing_precoder(problem, np.random.default_rng(2))
    est, bound, ok = gaussian_symbol_tightness(problem.channel, w, k=0, n_samples=200_000, rng_seed=4)
    assert ok
    assert est.value == pytest.approx(bound, abs=5 * est.stderr)
