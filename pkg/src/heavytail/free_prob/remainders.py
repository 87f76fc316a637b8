"""Laurent remainders of the Cauchy and Voiculescu transforms and their asymptotics."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .._common import HeavyTailDomainError, Verdict, combine, format_float
from .measure import MomentData, SpectralMeasure
from .transforms import (
    InversionError,
    cauchy_transform,
    h_transform,
    moment_integral,
    moments_and_cumulants,
    voiculescu_transform,
)

# subtraction may lose at most this many digits before the quadrature route takes over
DIGIT_BUDGET = 10.0


@dataclass
class RemainderValue:
    value: complex
    definition: complex
    identity: complex
    digits_lost: float
    precision_flag: bool

    @property
    def route_gap(self) -> float:
        return abs(self.definition - self.identity) / abs(self.identity)


def remainder_rG(mu: SpectralMeasure, p: int, z, moments: MomentData | None = None) -> RemainderValue:
    """r_G(z) = z**(p+1) * (G(z) - sum_{j=1}^{p+1} m_{j-1} z**-j).

    Both the subtraction and the identity r_G(z) = int t**(p+1)/(z - t) dmu
    are evaluated. The subtraction is returned unless it cancels more than
    ten significant digits, in which case the identity value is returned and
    the precision flag is set.
    """
    z = complex(z)
    md = moments if moments is not None else moments_and_cumulants(mu, p)
    g = complex(cauchy_transform(mu, z))
    terms = [md.moments[j - 1] * z ** (-j) for j in range(1, p + 2)]
    diff = g - sum(terms)
    definition = z ** (p + 1) * diff
    identity = complex(moment_integral(mu, z, p + 1))
    scale = max([abs(g)] + [abs(t) for t in terms])
    lost = math.log10(scale / abs(diff)) if diff != 0 else math.inf
    flag = lost > DIGIT_BUDGET
    return RemainderValue(identity if flag else definition, definition, identity, lost, flag)


def remainder_rphi(mu: SpectralMeasure, p: int, z, moments: MomentData | None = None) -> complex:
    """r_phi(z) = z**(p-1) * (phi(z) - sum_{j=0}^{p-1} kappa_{j+1} z**-j)."""
    z = complex(z)
    md = moments if moments is not None else moments_and_cumulants(mu, p)
    phi = complex(voiculescu_transform(mu, z))
    poly = sum(md.cumulants[j] * z ** (-j) for j in range(p))
    return z ** (p - 1) * (phi - poly)


@dataclass(frozen=True)
class AsymptoticConstants:
    """C with Im r_G(iy) ~ C_im y**p mu(y,inf) and Re r_G(iy) ~ C_re y**p mu(y,inf).

    None marks a part without an equivalence (only bounds are available).
    """

    imag: float | None
    real: float | None
    regime: str


def regime_of(alpha: float, p: int) -> str:
    if not (p <= alpha <= p + 1):
        raise HeavyTailDomainError(f"alpha={alpha} is outside [p, p+1] for p={p}")
    if alpha == p + 1:
        return "upper_edge"
    if alpha == p and p >= 1:
        return "lower_edge"
    return "interior"


def asymptotic_constants(alpha: float, p: int, regime: str | None = None) -> AsymptoticConstants:
    """Published constants of the remainder equivalences.

    interior, p <= alpha < p+1 (including p = 0, alpha in [0, 1)):
        C_im = -(pi (p+1-alpha)/2) / cos(pi (alpha-p)/2)
        C_re = -(pi (p+2-alpha)/2) / sin(pi (alpha-p)/2), with C_re = -1 at p = alpha = 0
    lower edge alpha = p >= 1: C_im = -pi/2, real part undefined.
    upper edge alpha = p+1: C_re = -pi/2, imaginary part undefined.

    See :func:`corrected_constants` for the values the numerics support.
    """
    regime = regime or regime_of(alpha, p)
    h = math.pi / 2
    if regime == "upper_edge":
        return AsymptoticConstants(None, -h, regime)
    if regime == "lower_edge":
        return AsymptoticConstants(-h, None, regime)
    d = alpha - p
    c_im = -(h * (p + 1 - alpha)) / math.cos(h * d)
    c_re = -1.0 if (p == 0 and alpha == 0) else -(h * (p + 2 - alpha)) / math.sin(h * d)
    return AsymptoticConstants(c_im, c_re, regime)


def corrected_constants(alpha: float, p: int) -> AsymptoticConstants:
    """Constants obtained by evaluating the remainder identity against an exact power tail.

    Substituting t = y s in int t**(p+1)/(iy - t) dmu(t) with
    mu(dt) = alpha t**(-alpha-1) L(t) dt gives the Beta integrals
    int s**(a-1)/(1+s**2) ds = (pi/2)/sin(pi a/2), so

        C_im = -(pi alpha/2) / cos(pi (alpha-p)/2)
        C_re = -(pi alpha/2) / sin(pi (alpha-p)/2)

    with the limit C_re = -1 at p = alpha = 0 and C_im = 0 there.
    """
    regime = regime_of(alpha, p)
    h = math.pi / 2
    d = alpha - p
    if regime == "upper_edge":
        return AsymptoticConstants(None, -h * alpha, regime)
    if regime == "lower_edge":
        return AsymptoticConstants(-h * alpha, None, regime)
    if alpha == 0:
        return AsymptoticConstants(0.0, -1.0, regime)
    return AsymptoticConstants(-(h * alpha) / math.cos(h * d), -(h * alpha) / math.sin(h * d), regime)


@dataclass
class RemainderReport:
    y_grid: np.ndarray
    rG_values: np.ndarray
    rphi_values: np.ndarray
    scale: np.ndarray
    constants: AsymptoticConstants
    fitted_imag: float
    fitted_real: float
    checks: dict = field(default_factory=dict)
    precision_flags: np.ndarray | None = None
    route_gap: np.ndarray | None = None
    warnings: list = field(default_factory=list)

    @property
    def phi_ratio(self) -> np.ndarray:
        return np.abs(self.rphi_values / self.rG_values - 1.0)

    @property
    def verdict(self) -> Verdict:
        return combine(self.checks.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y", "re_rG", "im_rG", "re_rphi", "im_rphi", "scale", "re_rG_scaled",
                    "im_rG_scaled", "phi_ratio_gap"])
        for k, y in enumerate(self.y_grid):
            rg, rp, s = self.rG_values[k], self.rphi_values[k], self.scale[k]
            w.writerow([format_float(v) for v in (y, rg.real, rg.imag, rp.real, rp.imag, s,
                                                   rg.real / s, rg.imag / s, abs(rp / rg - 1.0))])
        return buf.getvalue()


def verify_remainder_equivalence(
    mu: SpectralMeasure,
    p: int,
    alpha: float,
    y_grid,
    beta: float = 0.25,
    tol_const: float = 0.02,
    tol_phi: float = 0.05,
    constants: AsymptoticConstants | None = None,
) -> RemainderReport:
    """Evaluate r_G(iy) and r_phi(iy) along the imaginary axis and grade the equivalences.

    Checks
    ------
    phi_equiv : |r_phi/r_G - 1| at the largest y is below ``tol_phi``
    lower_bound : y |r_G(iy)| is increasing along the grid (consistent with divergence)
    imag_const, real_const : scaled parts at the largest y within ``tol_const`` of the constants
    upper_bound : at alpha = p+1, |r_G(iy)| y**beta decreases along the grid
    """
    if mu.tail is None:
        raise HeavyTailDomainError("remainder asymptotics need a power-tail descriptor")
    md = moments_and_cumulants(mu, p)
    constants = constants or asymptotic_constants(alpha, p)
    ys = np.asarray(y_grid, dtype=float)
    notes = []
    rg = np.empty(ys.size, dtype=complex)
    rphi = np.full(ys.size, np.nan + 0j)
    flags = np.zeros(ys.size, dtype=bool)
    gap = np.zeros(ys.size)
    for k, y in enumerate(ys):
        r = remainder_rG(mu, p, 1j * y, md)
        rg[k], flags[k], gap[k] = r.value, r.precision_flag, r.route_gap
        try:
            rphi[k] = remainder_rphi(mu, p, 1j * y, md)
        except InversionError as exc:
            notes.append(f"y={y:g}: {exc}")
    keep = np.isfinite(rphi)
    if not np.all(keep):
        warnings.warn("phi inversion failed on part of the grid; truncated", RuntimeWarning)
        ys, rg, rphi, flags, gap = ys[keep], rg[keep], rphi[keep], flags[keep], gap[keep]
    scale = ys ** p * mu.survival(ys)
    checks = {}
    checks["phi_equiv"] = Verdict.PASS if abs(rphi[-1] / rg[-1] - 1.0) < tol_phi else Verdict.FAIL
    growth = ys * np.abs(rg)
    checks["lower_bound"] = Verdict.PASS if np.all(np.diff(growth) > 0) else Verdict.INCONCLUSIVE
    fit_im = float(rg[-1].imag / scale[-1])
    fit_re = float(rg[-1].real / scale[-1])
    for key, target, fitted in (("imag_const", constants.imag, fit_im), ("real_const", constants.real, fit_re)):
        if target is not None:
            ok = abs(fitted / target - 1.0) < tol_const
            checks[key] = Verdict.PASS if ok else Verdict.FAIL
    if constants.regime == "upper_edge":
        dec = np.abs(rg) * ys ** beta
        checks["upper_bound"] = Verdict.PASS if np.all(np.diff(dec) < 0) else Verdict.FAIL
    return RemainderReport(ys, rg, rphi, scale, constants, fit_im, fit_re, checks, flags, gap, notes)


# -- reciprocal and inverse steps ------------------------------------------
def _series_inverse(coef: np.ndarray) -> np.ndarray:
    """Coefficients of the compositional inverse of z + sum c_j z**(j+1), up to z**(p+1)."""
    p = coef.size
    h = np.concatenate([[0.0, 1.0], coef])  # h[k] = coefficient of z**k
    inv = np.zeros(p + 2)
    inv[1] = 1.0
    for n in range(2, p + 2):
        # coefficient of z**n in h(inv(z)) must vanish
        comp = np.zeros(p + 2)
        power = np.zeros(p + 2)
        power[0] = 1.0
        trial = inv.copy()
        for k in range(1, p + 2):
            power = np.convolve(power, trial)[: p + 2]
            comp += h[k] * power
        inv[n] -= comp[n]
    return inv[2:]


def _series_reciprocal(coef: np.ndarray) -> np.ndarray:
    """Coefficients v_j of z / (1 + sum c_j z**j) = z + sum v_j z**(j+1)."""
    p = coef.size
    a = np.concatenate([[1.0], coef])
    b = np.zeros(p + 1)
    b[0] = 1.0
    for n in range(1, p + 1):
        b[n] = -sum(a[k] * b[n - k] for k in range(1, n + 1))
    return b[1:]


def _remainder(values, z, coef, p):
    poly = z + sum(c * z ** (j + 2) for j, c in enumerate(coef))
    return (values - poly) / z ** (p + 1)


@dataclass
class ChainReport:
    z: np.ndarray
    r_H: np.ndarray
    r_L: np.ndarray
    r_V: np.ndarray
    checks: dict

    @property
    def inverse_ratio(self) -> np.ndarray:
        return self.r_L / self.r_H

    @property
    def reciprocal_ratio(self) -> np.ndarray:
        return self.r_V / self.r_L

    @property
    def chain_ratio(self) -> np.ndarray:
        return self.r_V / self.r_H


def reciprocal_inverse_remainder_check(
    mu: SpectralMeasure, p: int, z_grid, tol: float = 0.05, moments: MomentData | None = None
) -> ChainReport:
    """Remainders of H, of its inverse L and of z**2/L along points near zero.

    U = H; the inverse step compares r_L with -r_H and the reciprocal step
    compares r_V, V(z) = z**2 / L(z) = z K(z), with -r_L. Real and imaginary
    parts are graded separately at the last grid point.
    """
    md = moments if moments is not None else moments_and_cumulants(mu, p)
    zs = np.asarray(z_grid, dtype=complex)
    if np.any(zs.imag >= 0):
        raise HeavyTailDomainError("points must lie in the lower half-plane")
    hcoef = md.moments[1 : p + 1]
    H = h_transform(mu, zs)
    r_H = _remainder(H, zs, hcoef, p)
    # L(z) = 1 / F^{-1}(1/z), the inverse of H near zero
    w = 1.0 / zs
    keep = np.ones(zs.size, dtype=bool)
    Lval = np.full(zs.size, np.nan + 0j)
    for k, wk in enumerate(w):
        try:
            phi = complex(voiculescu_transform(mu, wk))
            Lval[k] = 1.0 / (wk + phi)
        except InversionError:
            keep[k] = False
    zs, r_H, Lval = zs[keep], r_H[keep], Lval[keep]
    lcoef = _series_inverse(hcoef)
    r_L = _remainder(Lval, zs, lcoef, p)
    vcoef = _series_reciprocal(lcoef)
    V = zs * zs / Lval
    r_V = _remainder(V, zs, vcoef, p)
    checks = {}
    for name, num, den in (("inverse", r_L, r_H), ("reciprocal", r_V, r_L)):
        rat = num[-1] / den[-1]
        checks[name] = Verdict.PASS if abs(rat + 1.0) < tol else Verdict.FAIL
        checks[name + "_real"] = Verdict.PASS if abs(num[-1].real / den[-1].real + 1.0) < tol else Verdict.FAIL
        checks[name + "_imag"] = Verdict.PASS if abs(num[-1].imag / den[-1].imag + 1.0) < tol else Verdict.FAIL
    return ChainReport(zs, r_H, r_L, r_V, checks)
