import math

import numpy as np
import pytest

from sdicov.errors import NonPositiveCurvature, ZeroDirection
from sdicov.linesearch import (
    LineSearchSpec,
    LineSearchStatus,
    bisection_search,
    exact_quadratic_alpha,
)

SPEC = LineSearchSpec(shrink_factor=0.2)


def grid_acceptable_interval(phi_prime, c, lo=0.0, hi=2.0, n=2_000_001):
    """Brute-force oracle: the set of alpha with |phi'(alpha)| <= c |phi'(0)|."""
    a = np.linspace(lo, hi, n)
    ok = np.abs(phi_prime(a)) <= c * abs(phi_prime(0.0))
    return a[ok].min(), a[ok].max()


# -- exact step -------------------------------------------------------------

def test_exact_alpha_identity_hessian():
    p = np.array([3.0, -4.0, 0.5])
    assert exact_quadratic_alpha(lambda v: v, p) == 1.0


def test_exact_alpha_matches_grid_minimizer():
    A = np.diag([1.0, 2.0])
    w = np.array([1.0, 1.0])
    p = -A @ w
    alphas = np.linspace(0, 1, 900_001)
    pts = w[None, :] + alphas[:, None] * p[None, :]
    phi = 0.5 * np.einsum("ij,jk,ik->i", pts, A, pts)
    oracle = alphas[np.argmin(phi)]
    assert oracle == pytest.approx(5 / 9, abs=2e-6)
    assert exact_quadratic_alpha(lambda v: A @ v, p) == pytest.approx(5 / 9, rel=1e-15)


def test_exact_alpha_scalar_case():
    A = np.diag([2.0, 2.0])
    assert exact_quadratic_alpha(lambda v: A @ v, np.array([1.0, 0.0])) == 0.5


def test_exact_alpha_errors():
    with pytest.raises(ZeroDirection):
        exact_quadratic_alpha(lambda v: v, np.zeros(2))
    with pytest.raises(NonPositiveCurvature):
        exact_quadratic_alpha(lambda v: -v, np.ones(2))


# -- bisection search -------------------------------------------------------

def test_shifted_parabola():
    res = bisection_search(lambda a: (a - 1) ** 2, lambda a: 2 * (a - 1), SPEC)
    assert res.status is LineSearchStatus.CONVERGED
    assert 0.8 <= res.alpha <= 1.2
    assert abs(res.phi_alpha_slope) <= 0.4
    assert res.phi0_slope == -2.0


def test_quartic_against_grid_oracle():
    phi = lambda a: a**4 - a  # noqa: E731
    dphi = lambda a: 4 * a**3 - 1  # noqa: E731
    lo, hi = grid_acceptable_interval(dphi, 0.2)
    assert lo == pytest.approx(0.585, abs=1e-3)
    assert hi == pytest.approx(0.670, abs=1e-3)
    res = bisection_search(phi, dphi, SPEC)
    assert res.status is LineSearchStatus.CONVERGED
    assert lo <= res.alpha <= hi
    assert abs(dphi(res.alpha)) <= 0.2


def test_non_descent_direction():
    res = bisection_search(lambda a: a, lambda a: 1.0, SPEC)
    assert res.status is LineSearchStatus.NON_DESCENT
    assert res.alpha == 0.0


def test_expansion_finds_far_minimizer():
    res = bisection_search(lambda a: (a - 1000) ** 2, lambda a: 2 * (a - 1000), SPEC)
    assert res.status is LineSearchStatus.CONVERGED
    assert abs(res.alpha - 1000) <= 0.2 * 1000


def test_domain_safeguard_halves_into_domain():
    # phi is finite only for alpha < 0.01; the minimizer of -log(0.01 - a) - 200 a lies inside.
    def phi(a):
        return -math.log(0.01 - a) - 200 * a if a < 0.01 else math.inf

    def dphi(a):
        return 1 / (0.01 - a) - 200

    res = bisection_search(phi, dphi, SPEC)
    assert res.status is LineSearchStatus.CONVERGED
    assert 0 < res.alpha < 0.01
    assert abs(res.phi_alpha_slope) <= 0.2 * abs(res.phi0_slope)


def test_domain_safeguard_failure_when_nothing_finite():
    res = bisection_search(lambda a: 0.0 if a == 0 else math.nan, lambda a: -1.0,
                           LineSearchSpec(max_bisections=5))
    assert res.status is LineSearchStatus.DOMAIN_SAFEGUARD


def test_budget_exhaustion_returns_best_point():
    # Linear decrease forever: no bracket within two expansions.
    res = bisection_search(lambda a: -a, lambda a: -1.0, LineSearchSpec(max_expansions=2))
    assert res.status is LineSearchStatus.MAX_ITERATIONS
    assert res.alpha in (1.0, 2.0)


def test_converged_result_satisfies_criterion_on_convex_family(rng):
    for _ in range(200):
        m, s = rng.uniform(1e-3, 1e3), rng.uniform(1e-2, 1e2)
        c = rng.uniform(0.1, 0.9)
        res = bisection_search(lambda a: s * (a - m) ** 2, lambda a: 2 * s * (a - m),
                               LineSearchSpec(shrink_factor=c))
        assert res.status is LineSearchStatus.CONVERGED
        assert res.alpha > 0
        assert abs(res.phi_alpha_slope) <= c * abs(res.phi0_slope)


def test_evaluation_counts_are_exact():
    calls = {"f": 0, "g": 0}

    def phi(a):
        calls["f"] += 1
        return (a - 3) ** 2

    def dphi(a):
        calls["g"] += 1
        return 2 * (a - 3)

    res = bisection_search(phi, dphi, SPEC)
    assert (res.f_evals, res.g_evals) == (calls["f"], calls["g"])
    calls.update(f=0, g=0)
    res = bisection_search(phi, dphi, SPEC, phi0=9.0, phi0_slope=-6.0)
    assert (res.f_evals, res.g_evals) == (calls["f"], calls["g"])


def test_spec_validation():
    with pytest.raises(ValueError):
        LineSearchSpec(shrink_factor=1.0)
    with pytest.raises(ValueError):
        LineSearchSpec(max_bisections=0)
    with pytest.raises(ValueError):
        LineSearchSpec(initial_step=0.0)
