import math

import numpy as np
import pytest
from scipy import integrate

from heavytail._common import HeavyTailDomainError, Verdict
from heavytail.free_prob import measure as fm
from heavytail.free_prob import remainders as rm
from heavytail.free_prob import stieltjes as st


def _beta_constants(alpha, p):
    # limit of r_G(iy) / (y^p y^-alpha) for an exact Pareto tail: -alpha int s^k/(1+s^2) ds
    f = lambda k: integrate.quad(lambda s: s ** k / (1 + s * s), 0, np.inf, limit=200)[0]
    im = -alpha * f(p - alpha) if p - alpha > -1 else None
    re = -alpha * f(p + 1 - alpha) if p + 1 - alpha < 1 else None
    return im, re


def test_regime_of():
    assert rm.regime_of(1.5, 1) == "interior"
    assert rm.regime_of(2.0, 1) == "upper_edge"
    assert rm.regime_of(1.0, 1) == "lower_edge"
    assert rm.regime_of(0.0, 0) == "interior"
    with pytest.raises(HeavyTailDomainError):
        rm.regime_of(2.5, 1)


@pytest.mark.parametrize("alpha,p", [(0.5, 0), (0.3, 0), (1.5, 1), (1.2, 1), (2.0, 1), (2.5, 2)])
def test_corrected_constants_match_beta_integrals(alpha, p):
    im, re = _beta_constants(alpha, p)
    c = rm.corrected_constants(alpha, p)
    for got, want in ((c.imag, im), (c.real, re)):
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, rel=1e-8)


def test_corrected_constants_limits():
    assert rm.corrected_constants(0.0, 0) == rm.AsymptoticConstants(0.0, -1.0, "interior")
    assert rm.corrected_constants(2.0, 1).real == pytest.approx(-math.pi)
    # at p = 0 the real constant is minus the Karamata constant
    assert rm.corrected_constants(0.5, 0).real == pytest.approx(-st.karamata_constant(0.5))


def test_stated_constants_differ_from_corrected():
    stated, fixed = rm.asymptotic_constants(1.5, 1), rm.corrected_constants(1.5, 1)
    assert stated.real == pytest.approx(fixed.real)
    assert stated.imag != pytest.approx(fixed.imag, rel=0.1)


def test_remainder_routes_agree():
    mu = fm.pareto_measure(1.5)
    r = rm.remainder_rG(mu, 1, 1e3j)
    assert r.route_gap < 1e-10
    assert not r.precision_flag


def test_remainder_closed_form_pareto_p0():
    # alpha = 1/2, p = 0: r_G(z) = int t/(z - t) dmu, computed by quadrature
    mu = fm.pareto_measure(0.5)
    z = 50j
    f = lambda t: t / (z - t) * 0.5 * t ** -1.5
    re = integrate.quad(lambda t: f(t).real, 1, np.inf, limit=400)[0]
    im = integrate.quad(lambda t: f(t).imag, 1, np.inf, limit=400)[0]
    assert complex(rm.remainder_rG(mu, 0, z).value) == pytest.approx(complex(re, im), rel=1e-7)


def test_remainder_precision_flag_on_cancellation():
    mu = fm.pareto_measure(2.5, cutoff=5.0, n_body=200)
    r = rm.remainder_rG(mu, 2, 1e6j)
    assert r.precision_flag and r.value == r.identity


def test_rphi_of_point_mass_vanishes():
    assert abs(rm.remainder_rphi(fm.point_mass(0.3), 1, 10j)) < 1e-10


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_chain_heavy_tail(alpha):
    mu = fm.pareto_measure(alpha)
    z = -1j * np.geomspace(1e-2, 1e-8, 7)
    rep = rm.reciprocal_inverse_remainder_check(mu, int(alpha), z)
    # inverse and reciprocal steps each flip the sign, so the chain keeps it
    assert abs(rep.inverse_ratio[-1] + 1) < 1e-3
    assert abs(rep.reciprocal_ratio[-1] + 1) < 1e-3
    assert abs(rep.chain_ratio[-1] - 1) < 1e-3
    dev = np.abs(rep.inverse_ratio + 1)
    assert np.all(np.diff(dev) < 0)
    assert all(v == Verdict.PASS for v in rep.checks.values())


def test_chain_point_mass_is_taylor_dominated():
    # all moments finite: the next Taylor term dominates and r_L ~ +r_H
    rep = rm.reciprocal_inverse_remainder_check(fm.point_mass(1.0), 1, [-0.01j])
    assert rep.inverse_ratio[-1] == pytest.approx(1.0, abs=0.03)
    with pytest.raises(HeavyTailDomainError):
        rm.reciprocal_inverse_remainder_check(fm.point_mass(1.0), 1, [0.01j])


def test_verify_remainder_equivalence_pareto05():
    rep = rm.verify_remainder_equivalence(fm.pareto_measure(0.5), 0, 0.5, np.geomspace(100, 1e4, 5),
                                          constants=rm.corrected_constants(0.5, 0))
    assert rep.verdict == Verdict.PASS
    assert rep.to_csv().splitlines()[0].startswith("y,re_rG")
    with pytest.raises(HeavyTailDomainError):
        rm.verify_remainder_equivalence(fm.semicircle(), 1, 1.5, [10.0])


# -- Stieltjes / Karamata ----------------------------------------------------
def test_karamata_constant():
    assert st.karamata_constant(0.0) == 1.0
    assert st.karamata_constant(1.0) == pytest.approx(math.pi / 2)
    with pytest.raises(HeavyTailDomainError):
        st.karamata_constant(2.0)


def test_lebesgue_prop51_exact():
    rep = st.stieltjes_karamata(st.LebesgueMeasure(), 1.0, [1.0, 10.0, 1e3])
    assert np.allclose(rep.value, 1.0, atol=1e-14)
    with pytest.raises(HeavyTailDomainError):
        st.stieltjes_karamata(st.LebesgueMeasure(), 1.0, [1.0], which="prop52")


def test_pareto1_prop52_closed_form():
    # rho = Pareto(1): int t^2/(t^2+y^2) t^-2 dt = (pi/2 - arctan(1/y))/y, rho(y,inf) = 1/y
    rho = st.DensityMeasure(lambda t: t ** -2.0, lambda t: np.minimum(1.0, 1.0 / np.maximum(t, 1e-300)),
                            left=1.0)
    y = np.array([2.0, 10.0, 100.0])
    rep = st.stieltjes_karamata(rho, 1.0, y, which="prop52")
    assert np.allclose(rep.value, 1 - (2 / math.pi) * np.arctan(1 / y), rtol=1e-9)


def test_unknown_variant():
    with pytest.raises(HeavyTailDomainError):
        st.stieltjes_karamata(st.LebesgueMeasure(), 1.0, [1.0], which="prop53")
