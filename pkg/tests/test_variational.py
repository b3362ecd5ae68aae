import math

import numpy as np
import pytest

from neumann_rigidity import (Field, PositivityError, RangeError,
                              constant_field, estimate_lambda_star,
                              estimate_mu2, fit_scaling_exponent, j_lambda,
                              lambda_of_mu, minimize_quotient, spectral_gap)
from neumann_rigidity import variational as vmod

PI2 = math.pi**2


def test_j_lambda_constant_is_zero(interval128):
    for p in (0.5, 2.0, 3.0):
        for lam in (0.1, 5.0):
            assert j_lambda(constant_field(interval128, 2.0), lam, p) == \
                pytest.approx(0.0, abs=1e-12)
    assert j_lambda(constant_field(interval128, 2.0), 3.0, 1.0) == \
        pytest.approx(0.0, abs=1e-12)


def test_j_lambda_near_constant_asymptotics(interval256):
    g = interval256
    lam2 = spectral_gap(g).eigenvalue
    u2 = spectral_gap(g).eigenfunction.values
    eps = 1e-3
    u = Field(g, 1.0 + eps * u2)
    val = j_lambda(u, lam2 / 2.0, 2.0)
    pred = eps**2 * (lam2 - lam2 / 2.0)
    assert val == pytest.approx(pred, rel=0.05)
    assert j_lambda(u, 2.0 * lam2, 2.0) < 0.0


def test_j_lambda_log_case_needs_positive(interval128):
    g = interval128
    with pytest.raises(PositivityError):
        j_lambda(Field(g, np.cos(np.pi * g.axes[0])), 1.0, 1.0)
    # entropy deficit of a positive near-constant field is ~ (lam2 - Lam) eps^2
    u2 = spectral_gap(g).eigenfunction.values
    val = j_lambda(Field(g, 1.0 + 1e-3 * u2), 1.0, 1.0)
    assert val > 0.0


def test_quotient_rigid_regime(interval256):
    g = interval256
    lam = 0.25 * spectral_gap(g).eigenvalue
    sol = minimize_quotient(g, lam, 2.0)
    assert abs(sol.mu_out - lam) <= 1e-6 * lam
    assert sol.constant_deviation < 1e-6
    assert sol.minimizer.values.min() > 0.0
    assert sol.mu_out <= sol.lambda_in + 1e-9


def test_quotient_symmetry_breaking(interval256):
    g = interval256
    lam = 4.0 * spectral_gap(g).eigenvalue
    sol = minimize_quotient(g, lam, 2.0)
    assert sol.mu_out < lam - 1e-3 * lam
    assert sol.constant_deviation > 1e-3
    assert sol.minimizer.values.min() > 0.0


def test_quotient_small_lambda_ratio(interval128):
    sol = minimize_quotient(interval128, 1e-3, 2.0)
    assert sol.mu_out / 1e-3 == pytest.approx(1.0, abs=1e-6)


def test_quotient_monotone_concave_p2(interval128):
    g = interval128
    lam2 = spectral_gap(g).eigenvalue
    lams = np.linspace(0.5 * lam2, 3.0 * lam2, 7)
    mus = [minimize_quotient(g, float(x), 2.0).mu_out for x in lams]
    for lam, mu in zip(lams, mus):
        assert mu <= lam + 1e-9
    assert all(b >= a - 1e-9 for a, b in zip(mus, mus[1:]))
    # midpoint concavity with a small slack
    for k in range(len(mus) - 2):
        assert mus[k + 1] >= 0.5 * (mus[k] + mus[k + 2]) - 1e-6


def test_quotient_p_below_one_monotone_concave(interval128):
    g = interval128
    lam2 = spectral_gap(g).eigenvalue
    p = 0.5
    mus_in = np.linspace(0.5 * lam2, 5.0 * lam2, 7)
    lams = [minimize_quotient(g, float(x), p).mu_out for x in mus_in]
    for mu, lam in zip(mus_in, lams):
        assert lam <= mu + 1e-9
    assert all(b >= a - 1e-9 for a, b in zip(lams, lams[1:]))
    for k in range(len(lams) - 2):
        assert lams[k + 1] >= 0.5 * (lams[k] + lams[k + 2]) - 1e-6


def test_quotient_guards(interval128):
    with pytest.raises(RangeError):
        minimize_quotient(interval128, -1.0, 2.0)
    with pytest.raises(RangeError):
        minimize_quotient(interval128, 1.0, 1.0)


def test_lambda_of_mu_both_signs(interval256):
    g = interval256
    lam2 = spectral_gap(g).eigenvalue
    # p > 1: identity below the threshold, above the diagonal past it
    sol = lambda_of_mu(g, 0.3 * lam2, 2.0)
    assert sol.mu_out == pytest.approx(0.3 * lam2, rel=1e-9)
    sol = lambda_of_mu(g, 3.0 * lam2, 2.0)
    assert sol.mu_out > 3.0 * lam2
    # p < 1: the quotient itself, below the diagonal past the threshold
    sol = lambda_of_mu(g, 3.0 * lam2, 0.5)
    assert sol.mu_out < 3.0 * lam2


def test_estimate_mu2_interval(interval256):
    g = interval256
    br = estimate_mu2(g, 2.0, tol=0.01)
    assert not br.open_upper
    assert br.mu2_hi <= PI2 * 1.02
    assert br.mu2_hi - br.mu2_lo <= 0.01 * spectral_gap(g).eigenvalue * 1.01
    assert br.mu2_lo <= br.mu2_hi


def test_estimate_mu2_open_bracket(monkeypatch, interval128):
    # if the quotient never leaves the diagonal the upper end is flagged
    def never_breaks(grid, lam, p, seed=0, max_iter=0):
        return vmod.QuotientSolve(lam, lam, constant_field(grid, 1.0),
                                  0.0, 1, True, 1)
    monkeypatch.setattr(vmod, "minimize_quotient", never_breaks)
    br = vmod.estimate_mu2(interval128, 2.0, tol=0.02)
    assert br.open_upper


def test_fit_scaling_exponent_guards(interval128):
    with pytest.raises(RangeError):
        fit_scaling_exponent(interval128, 0.5, [10, 100, 1000])
    with pytest.raises(RangeError):
        fit_scaling_exponent(interval128, 3.0, [10.0, 20.0, 40.0])


def test_fit_scaling_exponent_interval():
    from neumann_rigidity import Domain, build_grid
    g = build_grid(Domain.interval(1.0), 512)
    lams = np.geomspace(1e2, 10**3.5, 8)
    slope = fit_scaling_exponent(g, 3.0, lams)
    assert abs(slope - 0.75) / 0.75 < 0.10


def test_estimate_lambda_star_interval(interval256):
    g = interval256
    lam2 = spectral_gap(g).eigenvalue
    est1 = estimate_lambda_star(g, 1.0)
    assert 0.99 * lam2 <= est1 <= 1.02 * lam2
    for p in (0.25, 0.75):
        est = estimate_lambda_star(g, p)
        assert 0.99 * lam2 <= est <= 1.03 * lam2
