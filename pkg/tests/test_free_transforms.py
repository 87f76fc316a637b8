import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from heavytail._common import HeavyTailDomainError
from heavytail.free_prob import measure as fm
from heavytail.free_prob import transforms as tr


def _quad_cauchy(density, a, b, z):
    re = integrate.quad(lambda t: (1 / (z - t)).real * density(t), a, b, limit=400, epsabs=0, epsrel=1e-12)[0]
    im = integrate.quad(lambda t: (1 / (z - t)).imag * density(t), a, b, limit=400, epsabs=0, epsrel=1e-12)[0]
    return complex(re, im)


def _semicircle_g(z):
    # branch with G(z) ~ 1/z at infinity
    s = cmath.sqrt(z - 2) * cmath.sqrt(z + 2)
    return (z - s) / 2


# -- measures ---------------------------------------------------------------
def test_power_tail_moments_and_mass():
    t = fm.PowerTail(2.0, 1.5, 0.5)
    assert t.mass == pytest.approx(0.5 * 2 ** -1.5)
    assert t.moment(1.0) == pytest.approx(0.5 * 1.5 * 2 ** -0.5 / 0.5)
    assert math.isinf(t.moment(1.5))


def test_mass_check():
    with pytest.raises(HeavyTailDomainError):
        fm.SpectralMeasure(atom_loc=[0.0], atom_weight=[0.5])
    with pytest.raises(HeavyTailDomainError):
        fm.SpectralMeasure(nodes=[0.0, 1.0, 0.5], density=[1.0, 1.0, 1.0], check_mass=False)


def test_pareto_measure_hybrid_matches_pure():
    pure, hyb = fm.pareto_measure(1.5), fm.pareto_measure(1.5, cutoff=30.0)
    xs = np.array([2.0, 29.0, 31.0, 1e3])
    assert np.allclose(hyb.survival(xs), xs ** -1.5, rtol=1e-3)
    assert np.allclose(pure.survival(xs), xs ** -1.5, rtol=1e-14)
    assert hyb.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert hyb.p == 1 and fm.pareto_measure(2.0).p == 1 and fm.pareto_measure(0.5).p == 0


def test_moments():
    sc = fm.semicircle(2.0, n=2000)
    assert sc.moment(1) == pytest.approx(0.0, abs=1e-12)
    assert sc.moment(2) == pytest.approx(2.0, rel=1e-5)
    assert fm.pareto_measure(1.5).moment(1) == pytest.approx(3.0)
    assert math.isinf(fm.pareto_measure(1.5).moment(2))
    assert fm.bernoulli_pm1().moment(2) == 1.0


def test_json_round_trip():
    mu = fm.pareto_measure(2.5, cutoff=5.0, n_body=50)
    back = fm.SpectralMeasure.from_json(mu.to_json())
    xs = np.array([1.5, 4.0, 6.0, 100.0])
    assert np.array_equal(back.survival(xs), mu.survival(xs))
    assert back.tail == mu.tail


def test_build_measure():
    assert fm.build_measure({"family": "point_mass", "a": 2.0}).atom_loc.tolist() == [2.0]
    with pytest.raises(HeavyTailDomainError):
        fm.build_measure({"family": "gaussian"})


@settings(max_examples=30)
@given(st.floats(1.0, 50.0), st.floats(0.0, 10.0))
def test_cdf_monotone_and_complementary(x, h):
    mu = fm.pareto_measure(1.5, cutoff=10.0, n_body=200)
    assert mu.cdf(x) <= mu.cdf(x + h) + 1e-15
    assert mu.cdf(x) + mu.survival(x) == pytest.approx(1.0, abs=1e-12)


def test_cone_spec():
    c = fm.ConeSpec(1.0, 2.0)
    assert c.contains_upper(3j) and not c.contains_upper(1j) and not c.contains_upper(5 + 3j)
    assert np.all(c.contains_upper(c.grid()))
    assert np.all(np.abs(c.boundary_points()) == pytest.approx(2.0))


# -- Cauchy transform -------------------------------------------------------
def test_point_mass_cauchy():
    z = np.array([1 + 1j, -3 + 0.5j])
    assert np.allclose(tr.cauchy_transform(fm.point_mass(0.5), z), 1 / (z - 0.5), rtol=1e-15)


@pytest.mark.parametrize("z", [3j, 0.5 + 0.1j, 2.5 + 0.01j, -1 + 2j])
def test_semicircle_cauchy_closed_form(z):
    g = complex(tr.cauchy_transform(fm.semicircle(n=2000), z))
    assert g == pytest.approx(_semicircle_g(z), abs=2e-5)


@pytest.mark.parametrize("alpha", [0.5, 1.5, 2.0, 2.5])
@pytest.mark.parametrize("z", [2 + 1j, 0.5 + 3j, 40 + 0.5j, 1e3j])
def test_pareto_tail_cauchy_against_quadrature(alpha, z):
    mu = fm.pareto_measure(alpha)
    dens = lambda t: alpha * t ** (-alpha - 1)
    ref = _quad_cauchy(dens, 1.0, abs(z.real) + 1.0, z) + _quad_cauchy(dens, abs(z.real) + 1.0, np.inf, z)
    assert complex(tr.cauchy_transform(mu, z)) == pytest.approx(ref, rel=1e-9)


def test_conjugate_symmetry_and_derivative():
    mu = fm.pareto_measure(1.5, cutoff=10.0, n_body=200)
    z = 3 + 2j
    g, dg = tr.cauchy_transform(mu, z, derivative=True)
    assert complex(tr.cauchy_transform(mu, z.conjugate())) == pytest.approx(complex(g).conjugate(), rel=1e-14)
    h = 1e-5
    fd = (tr.cauchy_transform(mu, z + h) - tr.cauchy_transform(mu, z - h)) / (2 * h)
    assert complex(dg) == pytest.approx(complex(fd), rel=1e-7)


def test_moment_integral_identity():
    # int t^k/(z-t) dmu = z^k G(z) - sum_{j<k} m_j z^(k-1-j)
    mu = fm.pareto_measure(2.5, cutoff=5.0, n_body=200)
    z = 7 + 3j
    g = complex(tr.cauchy_transform(mu, z))
    m = [mu.moment(j) for j in range(3)]
    for k in (1, 2):
        rhs = z ** k * g - sum(m[j] * z ** (k - 1 - j) for j in range(k))
        assert complex(tr.moment_integral(mu, z, k)) == pytest.approx(rhs, rel=1e-9)


def test_f_and_h_transforms():
    mu = fm.point_mass(2.0)
    assert complex(tr.f_transform(mu, 1 + 1j)) == pytest.approx(-1 + 1j)
    assert complex(tr.h_transform(mu, 0.1 - 0.1j)) == pytest.approx(1 / (1 / (0.1 - 0.1j) - 2.0))


# -- moment / cumulant recursion ------------------------------------------
def test_cumulants_semicircle_and_bernoulli():
    assert np.allclose(tr.cumulants_from_moments([1, 0, 1, 0, 2, 0, 5]), [0, 1, 0, 0, 0, 0])
    # symmetric Bernoulli: kappa_2n = (-1)^(n-1) Catalan(n-1)
    assert np.allclose(tr.cumulants_from_moments([1, 0, 1, 0, 1, 0, 1]), [0, 1, 0, -1, 0, 2])
    assert np.allclose(tr.cumulants_from_moments([1, 1, 1, 1]), [1, 0, 0])


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=7))
def test_moment_cumulant_round_trip(k):
    m = tr.moments_from_cumulants(k)
    assert m[0] == 1.0
    assert np.allclose(tr.cumulants_from_moments(m), k, atol=1e-9 * (1 + np.max(np.abs(m))))


def test_moments_and_cumulants_infinite_moment():
    md = tr.moments_and_cumulants(fm.pareto_measure(1.5), 1)
    assert md.moments[0] == 1.0 and md.cumulants[0] == pytest.approx(3.0)
    with pytest.raises(HeavyTailDomainError):
        tr.moments_and_cumulants(fm.pareto_measure(1.5), 2)


# -- Voiculescu transform --------------------------------------------------
def test_voiculescu_point_mass_and_semicircle():
    z = np.array([5j, 3 + 6j])
    assert np.allclose(tr.voiculescu_transform(fm.point_mass(0.7), z), 0.7, atol=1e-12)
    phi = tr.voiculescu_transform(fm.semicircle(n=2000), z)
    assert np.allclose(phi, 1 / z, atol=1e-5)


def test_voiculescu_two_atoms_series():
    mu = fm.discrete_measure([0.0, 1.0], [0.5, 0.5])
    z = 1e3j
    kap = tr.cumulants_from_moments([1.0, 0.5, 0.5, 0.5])
    series = kap[0] + kap[1] / z + kap[2] / z ** 2
    assert complex(tr.voiculescu_transform(mu, z)) == pytest.approx(series, abs=1e-9)


def test_r_transform_relation():
    mu = fm.semicircle(n=2000)
    w = -0.1j
    assert complex(tr.r_transform(mu, w)) == pytest.approx(complex(tr.voiculescu_transform(mu, 1 / w)))


def test_voiculescu_requires_upper_half_plane():
    with pytest.raises(tr.InversionError):
        tr.voiculescu_transform(fm.point_mass(0.0), -1j)


def test_calibrate_cone():
    cone = tr.calibrate_cone(fm.bernoulli_pm1())
    assert cone.bound > 0
    tr.voiculescu_transform(fm.bernoulli_pm1(), cone.grid())
