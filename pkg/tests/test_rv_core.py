import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heavytail import rv_core, tail_models
from heavytail._common import HeavyTailDomainError


def test_constant_sv_power():
    f = rv_core.RegVarSpec(-2.0, rv_core.constant_sv(3.0))
    assert f(10.0) == pytest.approx(0.03, rel=1e-14)


def test_log_sv_reproduces_log():
    L = rv_core.log_sv()
    for x in (math.e, 10.0, 1e6, 1e50):
        assert L(x) == pytest.approx(math.log(x), rel=1e-9)


def test_log_shift_sv_reproduces_log_e_plus_x():
    L = rv_core.log_shift_sv()
    for x in (1.0, 7.0, 1e4):
        assert L(x) == pytest.approx(math.log(math.e + x), rel=1e-9)


def test_eval_below_x0_raises():
    with pytest.raises(HeavyTailDomainError):
        rv_core.log_sv()(1.0)


def test_sv_spec_validation():
    with pytest.raises(HeavyTailDomainError):
        rv_core.SlowlyVaryingSpec(0.0, 1.0, lambda x: 1.0, lambda y: 0.0)
    with pytest.raises(HeavyTailDomainError):
        rv_core.SlowlyVaryingSpec(1.0, 0.0, lambda x: 1.0, lambda y: 0.0)


def test_karamata_integral_ratio_closed_forms():
    # int_x^inf t^-2 dt = 1/x equals its Karamata equivalent exactly.
    f = rv_core.RegVarSpec(-2.0, rv_core.constant_sv())
    assert rv_core.karamata_integral_ratio(f, 1.0, 50.0) == pytest.approx(1.0, rel=1e-9)
    # int_1^x t dt = (x^2 - 1)/2 against x^2/2.
    g = rv_core.RegVarSpec(1.0, rv_core.constant_sv())
    assert rv_core.karamata_integral_ratio(g, 1.0, 10.0) == pytest.approx(1.0 - 1e-2, rel=1e-9)


def test_karamata_integral_ratio_log_tends_to_one():
    f = rv_core.RegVarSpec(0.5, rv_core.log_sv())
    r = [rv_core.karamata_integral_ratio(f, math.e, x) for x in (1e2, 1e5, 1e10)]
    assert abs(r[-1] - 1.0) < abs(r[0] - 1.0)
    assert abs(r[-1] - 1.0) < 0.1


@given(st.floats(-3, 3), st.floats(0.01, 0.5), st.floats(1.0, 1e6))
def test_potter_bounds_sandwich_pure_power(rho, eps, x):
    lo, hi = rv_core.potter_bounds(rho, eps, x)
    assert lo <= x ** rho <= hi


def test_potter_threshold_log_function():
    f = lambda x: x ** -1.0 * math.log(x)
    t0 = rv_core.potter_threshold(f, -1.0, 0.1, [3.0, 10.0, 100.0, 1000.0], [1.0, 2.0, 10.0, 100.0])
    assert t0 is not None


def test_left_continuous_inverse_step():
    f = lambda s: math.floor(s)
    assert rv_core.left_continuous_inverse(f, 2.5, (0.0, 10.0)) == pytest.approx(3.0, abs=1e-10)
    assert rv_core.left_continuous_inverse(lambda s: s, 0.0, (0.0, 1.0)) == 0.0
    with pytest.raises(HeavyTailDomainError):
        rv_core.left_continuous_inverse(lambda s: s, 5.0, (0.0, 1.0))


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.5])
def test_tauberian_power_is_exact(alpha):
    # U(x) = x^alpha has Laplace-Stieltjes transform Gamma(1+alpha) s^-alpha.
    U = lambda x: x ** alpha if x > 0 else (1.0 if alpha == 0 else 0.0)
    rep = rv_core.tauberian_laplace_check(U, alpha, None, [1.0, 10.0, 100.0])
    assert np.allclose(rep.value, 1.0, rtol=1e-7)


def test_tauberian_slowly_varying_drifts_to_one():
    # U(x) = x log(e + x): index 1 with a slowly varying factor.
    U = lambda x: x * math.log(math.e + x) if x > 0 else 0.0
    rep = rv_core.tauberian_laplace_check(U, 1.0, rv_core.log_shift_sv(), [1e2, 1e4, 1e8])
    err = np.abs(rep.value - 1.0)
    assert err[-1] < err[0] and err[-1] < 0.05


def test_laplace_stieltjes_exponential_cdf():
    # U = 1 - e^-x: transform is 1/(1+s).
    assert rv_core.laplace_stieltjes(lambda x: 1 - math.exp(-x), 2.0) == pytest.approx(1 / 3, rel=1e-9)


@pytest.mark.parametrize("alpha,beta", [(1.5, 3.0), (1.0, 2.0), (2.0, 0.5), (3.0, 1.0)])
def test_karamata_df_ratio_pareto_closed_form(alpha, beta):
    F = tail_models.pareto(alpha)
    x = 50.0
    d = beta - alpha
    if beta >= alpha:
        exact = d / alpha * x ** d / (x ** d - 1.0)
    else:
        exact = -d / alpha
    assert rv_core.karamata_df_ratio(F, beta, x) == pytest.approx(exact, rel=1e-8)
    assert rv_core.karamata_df_limit(alpha, beta) == pytest.approx(abs(d) / alpha)


def test_hill_exact_quantiles():
    alpha = 1.5
    n = 20000
    u = (np.arange(1, n + 1) - 0.5) / n
    sample = (1.0 - u) ** (-1.0 / alpha)
    est = rv_core.hill_estimate(sample, 2000)
    assert est.alpha_hat == pytest.approx(alpha, rel=0.01)
    assert est.stderr == pytest.approx(est.alpha_hat / math.sqrt(2000))


@settings(max_examples=25)
@given(st.floats(0.1, 1e3))
def test_hill_scale_invariant(c):
    rng = np.random.default_rng(3)
    s = rng.pareto(2.0, 500) + 1.0
    a = rv_core.hill_estimate(s, 50).alpha_hat
    b = rv_core.hill_estimate(c * s, 50).alpha_hat
    assert b == pytest.approx(a, rel=1e-9)


def test_hill_errors():
    with pytest.raises(HeavyTailDomainError):
        rv_core.hill_estimate([1.0, 2.0, 3.0], 5)
    with pytest.raises(HeavyTailDomainError):
        rv_core.hill_estimate([-1.0, 2.0, 3.0, 4.0], 2)
    with pytest.raises(ZeroDivisionError):
        rv_core.hill_estimate([1.0, 2.0, 2.0, 2.0], 2)


def test_slope_check_pure_power_from_first_point():
    xs = [1.0, 10.0, 100.0]
    assert rv_core.slope_check(lambda x: x ** -2.0, -2.0, 3.0, xs) == 1.0

