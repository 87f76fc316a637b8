import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavytail import cevm
from heavytail import tail_models as tm
from heavytail._common import Verdict


@pytest.mark.parametrize("gamma", np.linspace(-2, 2, 21))
def test_gev_at_zero(gamma):
    assert float(cevm.gev_cdf(gamma, 0.0)) == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_gev_special_cases():
    assert float(cevm.gev_cdf(1.0, 1.0)) == pytest.approx(math.exp(-0.5))
    assert float(cevm.gev_cdf(0.0, 1.0)) == pytest.approx(math.exp(-math.exp(-1.0)))
    # outside the support
    assert float(cevm.gev_cdf(1.0, -2.0)) == 0.0
    assert float(cevm.gev_cdf(-1.0, 2.0)) == 1.0
    assert cevm.GEVParams(0.5).support == (-2.0, math.inf)


@given(st.floats(-3, 3))
def test_gev_continuous_in_gamma(x):
    assert float(cevm.gev_cdf(1e-9, x)) == pytest.approx(float(cevm.gev_cdf(0.0, x)), abs=1e-7)


def test_frechet_and_weibull_forms():
    assert float(cevm.frechet_cdf(2.0, 2.0)) == pytest.approx(math.exp(-0.25))
    assert float(cevm.weibull_max_cdf(2.0, -2.0)) == pytest.approx(math.exp(-4.0))


def test_normalizers():
    nz = cevm.doa_normalizers(tm.pareto(1.0), 1.0, 1000)
    assert nz.a_n == pytest.approx(1000.0, rel=1e-9) and nz.b_n == 0.0
    nz = cevm.doa_normalizers(tm.exponential(1.0), 0.0, 1000)
    assert nz.b_n == pytest.approx(math.log(1000), rel=1e-9)
    assert nz.a_n == pytest.approx(1.0, rel=1e-6)
    nz = cevm.doa_normalizers(tm.uniform01(), -1.0, 100)
    assert nz.b_n == 1.0 and nz.a_n == pytest.approx(0.01, rel=1e-9)


def test_doa_error_pareto():
    err = cevm.doa_max_error(tm.pareto(1.0), 1.0, 10 ** 4, np.linspace(0.5, 5, 451))
    assert err < 2e-4


def test_doa_wrong_domain():
    with pytest.raises(cevm.DomainClassificationError):
        cevm.doa_normalizers(tm.exponential(), 1.0, 10)


@pytest.mark.parametrize("case,rho,gamma,expected", [
    ("I", 1.0, 1.0, -0.5), ("I", 0.5, 2.0, -0.4), ("III", 1.0, -1.0, -1.0), ("IIa", -0.5, -1.0, -2.0),
    ("IId", -0.5, -2.0, -2.0), ("IIb", -1.0, -1.0, -0.5), ("IIc", -1.0, -0.5, -1.0), ("IV", -1.0, 2.0, -0.5),
])
def test_product_tail_index(case, rho, gamma, expected):
    assert cevm.product_tail_index(case, rho, gamma) == pytest.approx(expected)


def test_unknown_case():
    with pytest.raises(cevm.UnsupportedCase):
        cevm.product_tail_index("V", 1.0, 1.0)


def _spec(rho, gamma, **kw):
    return cevm.CEVMSpec(gamma, rho, lambda t: 1.0, lambda t: 1.0, lambda n, r: None, **kw)


def test_classify_examples():
    r = cevm.classify_case(_spec(-1.0, -1.0, beta_inf=1.0, b_inf=1.0, tilde_ratio_bounded=True))
    assert r.case == "IIa" and r.predicted_index == -1.0
    assert r.quantity(0.5, 0.5) == pytest.approx(1 / 0.75)
    r = cevm.classify_case(_spec(-1.0, 1.0, beta_inf=2.0))
    assert r.case == "IV" and r.predicted_index == -1.0


def test_classify_refusals():
    with pytest.raises(cevm.UnsupportedCase):
        cevm.classify_case(_spec(1.0, -1.0))  # missing b(inf)
    with pytest.raises(cevm.UnsupportedCase):
        cevm.classify_case(_spec(1.0, -0.5, b_inf=1.0))  # alpha not ~ 1/a
    with pytest.raises(cevm.UnsupportedCase):
        cevm.classify_case(_spec(-1.0, -1.0, beta_inf=1.0, b_inf=1.0))  # boundary gamma = rho
    with pytest.raises(cevm.UnsupportedCase):
        cevm.classify_case(_spec(-1.0, 1.0, beta_inf=0.0))
    with pytest.raises(Exception):
        _spec(0.0, 1.0)


def test_fit_loglog_slope_exact_power():
    z = np.geomspace(1, 100, 21)
    assert cevm.fit_loglog_slope(z, 3 * z ** -1.7) == pytest.approx(-1.7, abs=1e-12)


def test_case_four_degenerate_exact_limit():
    spec = cevm.case_four_reference(1.0, 2.0, degenerate=True)
    z = np.geomspace(1, 10, 11)
    rep = cevm.simulate_product_tail(spec, [100.0], z, 10 ** 6, seed=4)
    assert rep.case == "IV"
    # t P[2Y/t > z] = 2/z once z t >= 2
    assert np.allclose(rep.exact_limit, 2.0 / z)
    curve = rep.curves[100.0]
    se = np.sqrt(curve * 100.0 / 10 ** 6)
    assert np.all(np.abs(curve - rep.exact_limit) < 5 * se)


def test_case_one_limit_formula():
    spec = cevm.case_one_reference(1.0, 1.0)
    rep = cevm.simulate_product_tail(spec, [100.0], np.geomspace(1, 10, 6), 10 ** 6, seed=8)
    lim = cevm.case_one_limit(1.0, 1.0, rep.z_grid)
    assert np.allclose(rep.curves[100.0], lim, rtol=0.05)
    assert '"case": "I"' in rep.to_json()


def test_beta_min_limit_constant():
    assert float(cevm.beta_min_example_limit(1.0, 1.0, 1.0)) == pytest.approx(0.375)


def test_beta_min_example_mc_small():
    rep = cevm.beta_min_example_mc(1.0, 1.0, 1e4, [1.0, 2.0], 10 ** 6, seed=1)
    assert np.all(np.abs(rep.ratio - 1.0) < 0.15)


def test_moment_probe_runs():
    spec = cevm.case_one_reference(1.0, 1.0)
    p = cevm.moment_condition_probe(spec, 1.0, [0.1, 0.5, 1.0], [10.0, 100.0], 10 ** 5, seed=2)
    assert p.values.shape == (3, 2)
    assert p.sufficient_moment is not None


def test_hidden_rv_probe_independent_pair():
    def draw(n, rng):
        return rng.pareto(1.0, n) + 1, rng.pareto(1.0, n) + 1

    spec = cevm.CEVMSpec(1.0, 1.0, lambda t: t, lambda t: t, draw)
    rep = cevm.hidden_rv_probe(spec, lambda t: t, 1.0, 1.0, [10.0, 100.0, 1000.0], 10 ** 6, seed=3)
    assert rep.verdict == Verdict.PASS
