"""Cauchy, F, H, Voiculescu and R transforms, and the moment-cumulant recursion."""
from __future__ import annotations

import math

import numpy as np

from .._common import HeavyTailDomainError
from .measure import ConeSpec, MomentData, SpectralMeasure

_SERIES_TERMS = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(40)
_CHUNK = 2_000_000


class PoleError(HeavyTailDomainError):
    """Transform evaluated on the real axis inside the support."""


class InversionError(RuntimeError):
    """Newton inversion did not converge; the point lies outside the usable domain."""


# -- body: linear density on each segment, closed form --------------------
def _segment_kernels(zeta):
    """L = log((zeta+1)/(zeta-1)) and Q = zeta*L - 2 with their derivatives.

    Away from the segment the modulus and argument of (zeta+1)/(zeta-1) are
    formed from real expressions free of cancellation; Q and Q' then carry
    absolute (not relative) error of order 1e-16, which is what the sum
    over segments needs.
    """
    a, b = zeta.real, zeta.imag
    r2 = a * a + b * b
    L = np.empty_like(zeta)
    near = r2 <= 4.0
    far = ~near
    if np.any(far):
        af, bf, rf = a[far], b[far], r2[far]
        am = af - 1.0
        L[far] = 0.5 * np.log1p(4.0 * af / (am * am + bf * bf)) + 1j * np.arctan2(-2.0 * bf, rf - 1.0)
    if np.any(near):
        zs = zeta[near]
        L[near] = np.log(zs + 1.0) - np.log(zs - 1.0)
    inv = 1.0 / (zeta * zeta - 1.0)
    dL = -2.0 * inv
    Q = zeta * L - 2.0
    dQ = L + zeta * dL
    return L, dL, Q, dQ


def _body_cauchy(mu: SpectralMeasure, z: np.ndarray, derivative: bool):
    t, d = mu.nodes, mu.density
    c = 0.5 * (t[1:] + t[:-1])
    h = 0.5 * (t[1:] - t[:-1])
    dc = 0.5 * (d[1:] + d[:-1])
    s = (d[1:] - d[:-1]) / (t[1:] - t[:-1])
    keep = (dc > 0) | (s != 0)
    c, h, dc, s = c[keep], h[keep], dc[keep], s[keep]
    g = np.zeros(z.shape, dtype=complex)
    dg = np.zeros(z.shape, dtype=complex)
    step = max(1, _CHUNK // max(c.size, 1))
    for i in range(0, z.size, step):
        zz = z[i:i + step, None]
        zeta = (zz - c[None, :]) / h[None, :]
        if np.any((zeta.imag == 0) & (np.abs(zeta.real) < 1.0)):
            raise PoleError("Cauchy transform evaluated on the support of the body")
        L, dL, Q, dQ = _segment_kernels(zeta)
        g[i:i + step] = np.sum(dc * L + s * h * Q, axis=1)
        if derivative:
            dg[i:i + step] = np.sum((dc * dL + s * h * dQ) / h, axis=1)
    return g, dg


# -- tail: Phi_beta(w) = int_0^1 u**beta / (1 - w u) du ---------------------
def _phi_beta(w: np.ndarray, beta: float):
    """Closed forms and series for the power-tail kernel, with its derivative."""
    if beta <= -1.0:
        raise HeavyTailDomainError("power-tail kernel diverges at the origin")
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    n = np.arange(_SERIES_TERMS)
    aw = np.abs(w)
    near = aw <= 0.5
    if np.any(near):
        wn = w[near]
        out[near] = np.polyval((1.0 / (n + beta + 1.0))[::-1], wn)
    m = round(beta)
    integer = abs(beta - m) < 1e-12 and m >= 0
    far = ~near
    if integer and np.any(far):
        wf = w[far]
        poly = sum(wf ** j / j for j in range(1, m + 1)) if m >= 1 else 0.0
        out[far] = -(np.log(1.0 - wf) + poly) / wf ** (m + 1)
    elif np.any(far):
        outer = aw >= 2.0
        if np.any(outer):
            wo = w[outer]
            inv = 1.0 / wo
            series = inv * np.polyval((1.0 / (n - beta))[::-1], inv)
            out[outer] = -(-wo) ** (-beta - 1.0) * math.pi / math.sin(math.pi * beta) + series
        mid = far & ~outer
        if np.any(mid):
            out[mid] = _phi_mid(w[mid], beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        dout = np.where(
            near, 0.0, (1.0 / (1.0 - w) - (beta + 1.0) * out) / np.where(near, 1.0, w)
        )
    if np.any(near):
        wn = w[near]
        coef = (n[1:] / (n[1:] + beta + 1.0))
        dout[near] = np.polyval(coef[::-1], wn)
    return out, dout


def _phi_mid(w: np.ndarray, beta: float):
    """Split at s = 1/(2|w|): series on [0, s], subtracted pole plus Gauss-Legendre on [s, 1]."""
    n = np.arange(_SERIES_TERMS)
    s = 0.5 / np.abs(w)
    first = s ** (beta + 1.0) * np.polyval((1.0 / (n + beta + 1.0))[::-1], w * s)
    up = 1.0 / w
    cst = up ** beta
    a = s[:, None]
    u = a + (1.0 - a) * 0.5 * (_GL_X[None, :] + 1.0)
    wts = (1.0 - a) * 0.5 * _GL_W[None, :]
    integrand = (u ** beta - cst[:, None]) / (u - up[:, None])
    smooth = np.sum(wts * integrand, axis=1)
    logs = np.log(1.0 - up) - np.log(s - up)
    second = -(cst * logs + smooth) / w
    return first + second


def _tail_integral(tail, z: np.ndarray, k: int, derivative: bool):
    """Integral of t**k / (z - t) against the power-tail density."""
    if tail is None or tail.scale == 0:
        return np.zeros(z.shape, dtype=complex), np.zeros(z.shape, dtype=complex)
    xc, a, c = tail.cutoff, tail.index, tail.scale
    w = z / xc
    if np.any((w.imag == 0) & (w.real >= 1.0)):
        raise PoleError("Cauchy transform evaluated on the support of the tail")
    f, df = _phi_beta(w, a - k)
    pref = -c * a * xc ** (k - a - 1.0)
    return pref * f, (pref / xc) * df if derivative else np.zeros_like(f)


def _atoms_cauchy(mu: SpectralMeasure, z: np.ndarray, derivative: bool):
    if mu.atom_loc.size == 0:
        return np.zeros(z.shape, dtype=complex), np.zeros(z.shape, dtype=complex)
    diff = z[:, None] - mu.atom_loc[None, :]
    if np.any(diff == 0):
        raise PoleError("Cauchy transform evaluated at an atom")
    g = np.sum(mu.atom_weight / diff, axis=1)
    dg = -np.sum(mu.atom_weight / diff ** 2, axis=1) if derivative else np.zeros_like(g)
    return g, dg


def cauchy_transform(mu: SpectralMeasure, z, derivative: bool = False):
    """G(z) = integral of 1/(z - t) dmu(t).

    Atoms and each linear body segment are integrated in closed form (series
    for far segments), and the power tail through the substitution
    t = cutoff/u which yields a Lerch-type kernel evaluated by convergent
    series, a reflection formula, or a subtracted-pole Gauss-Legendre rule.

    Returns G, or (G, G') when ``derivative`` is set.
    """
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    lower = zz.imag < 0
    zq = np.where(lower, np.conj(zz), zz)
    g, dg = _atoms_cauchy(mu, zq, derivative)
    if mu.has_body:
        gb, dgb = _body_cauchy(mu, zq, derivative)
        g, dg = g + gb, dg + dgb
    gt, dgt = _tail_integral(mu.tail, zq, 0, derivative)
    g, dg = g + gt, dg + dgt
    g = np.where(lower, np.conj(g), g)
    dg = np.where(lower, np.conj(dg), dg)
    shape = np.shape(z)
    if derivative:
        return g.reshape(shape), dg.reshape(shape)
    return g.reshape(shape)


def moment_integral(mu: SpectralMeasure, z, k: int):
    """Integral of t**k / (z - t) dmu(t) by quadrature on the body and the tail kernel.

    This route does not subtract moments and serves as the cross-check of
    the Laurent remainder of G.
    """
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    out = np.zeros(zz.shape, dtype=complex)
    if mu.atom_loc.size:
        out += np.sum(mu.atom_weight * mu.atom_loc ** k / (zz[:, None] - mu.atom_loc[None, :]), axis=1)
    if mu.has_body:
        xg, wg = np.polynomial.legendre.leggauss(24)
        for i, zi in enumerate(zz):
            out[i] += _body_moment_integral(mu, zi, k, xg, wg)
    gt, _ = _tail_integral(mu.tail, zz, k, False)
    out += gt
    return out.reshape(np.shape(z))


def _body_moment_integral(mu, z, k, xg, wg):
    t, d = mu.nodes, mu.density
    a, b = t[:-1], t[1:]
    # split segments that are wide compared to their distance from z
    dist = np.hypot(np.maximum(np.maximum(a - z.real, z.real - b), 0.0), z.imag)
    pieces = np.maximum(1, np.ceil(2.0 * (b - a) / np.maximum(dist, 1e-300))).astype(int)
    pieces = np.minimum(pieces, 4096)
    total = 0.0 + 0.0j
    for m in np.unique(pieces):
        sel = pieces == m
        aa, bb = a[sel], b[sel]
        edges = aa[:, None] + (bb - aa)[:, None] * np.linspace(0.0, 1.0, m + 1)[None, :]
        lo, hi = edges[:, :-1].ravel(), edges[:, 1:].ravel()
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        tt = c[:, None] + h[:, None] * xg[None, :]
        dd = np.interp(tt, t, d)
        total += np.sum(h[:, None] * wg * tt ** k * dd / (z - tt))
    return total


def f_transform(mu: SpectralMeasure, z):
    """F = 1/G, mapping the upper half-plane into itself."""
    g = cauchy_transform(mu, z)
    f = 1.0 / g
    zi = np.asarray(z, dtype=complex)
    bad = (zi.imag > 0) & (np.asarray(f).imag < -1e-12 * np.abs(f))
    if np.any(bad):
        raise HeavyTailDomainError("F transform left the upper half-plane")
    return f


def h_transform(mu: SpectralMeasure, z):
    """H(z) = G(1/z), mapping the lower half-plane into itself."""
    zi = np.asarray(z, dtype=complex)
    h = cauchy_transform(mu, 1.0 / zi)
    bad = (zi.imag < 0) & (np.asarray(h).imag > 1e-12 * np.abs(h))
    if np.any(bad):
        raise HeavyTailDomainError("H transform left the lower half-plane")
    return h


# -- moments and free cumulants --------------------------------------------
def cumulants_from_moments(m) -> np.ndarray:
    """Free cumulants kappa_1..kappa_p from moments m_0..m_p.

    Solves m_n = sum_s kappa_s * [z**(n-s)] M(z)**s triangularly, where
    M(z) = sum m_j z**j; this is the coefficient form of C(z M(z)) = M(z).
    """
    m = np.asarray(m, dtype=float)
    p = m.size - 1
    kappa = np.zeros(p + 1)
    # powers[s][j] = coefficient of z**j in M(z)**s
    powers = [np.zeros(p + 1) for _ in range(p + 1)]
    powers[0][0] = 1.0
    for s in range(1, p + 1):
        powers[s] = np.convolve(powers[s - 1], m)[: p + 1]
    for n in range(1, p + 1):
        acc = sum(kappa[s] * powers[s][n - s] for s in range(1, n))
        kappa[n] = m[n] - acc
    return kappa[1:]


def moments_from_cumulants(kappa) -> np.ndarray:
    """Inverse of :func:`cumulants_from_moments`."""
    kappa = np.concatenate([[0.0], np.asarray(kappa, dtype=float)])
    p = kappa.size - 1
    m = np.zeros(p + 1)
    m[0] = 1.0
    for n in range(1, p + 1):
        powers = [np.zeros(p + 1) for _ in range(n + 1)]
        powers[0][0] = 1.0
        for s in range(1, n + 1):
            powers[s] = np.convolve(powers[s - 1], m)[: p + 1]
        m[n] = kappa[n] + sum(kappa[s] * powers[s][n - s] for s in range(1, n))
    return m


def moments_and_cumulants(mu: SpectralMeasure, p: int | None = None) -> MomentData:
    if p is None:
        p = mu.p
    moments = np.array([mu.moment(j) for j in range(p + 1)])
    if not np.all(np.isfinite(moments)):
        raise HeavyTailDomainError(f"moment of order {p} is infinite")
    moments[0] = 1.0
    return MomentData(p=p, moments=moments, cumulants=cumulants_from_moments(moments))


# -- inversion -------------------------------------------------------------
def _newton_inverse_f(mu: SpectralMeasure, z: np.ndarray, max_iter: int = 100):
    """Solve F(w) = z with damped Newton from w = z; vectorised."""
    w = z.copy()
    g, dg = cauchy_transform(mu, w, derivative=True)
    res = 1.0 / g - z
    done = np.zeros(z.shape, dtype=bool)
    for _ in range(max_iter):
        active = ~done
        if not np.any(active):
            break
        wa, ga, dga, ra = w[active], g[active], dg[active], res[active]
        fprime = -dga / ga ** 2
        step = ra / fprime
        lam = np.ones(wa.shape)
        for _ in range(12):
            cand = wa - lam * step
            ok = cand.imag > 0
            gc, dgc = cauchy_transform(mu, np.where(ok, cand, wa), derivative=True)
            rc = 1.0 / gc - z[active]
            better = ok & (np.abs(rc) <= np.abs(ra) * (1.0 - 1e-4 * lam) + 1e-15 * np.abs(z[active]))
            if np.all(better | (lam < 1e-3)):
                break
            lam = np.where(better, lam, lam * 0.5)
        accept = better
        idx = np.nonzero(active)[0]
        small = np.abs(lam * step) <= 4e-16 * np.abs(wa)
        w[idx[accept]] = cand[accept]
        g[idx[accept]] = gc[accept]
        dg[idx[accept]] = dgc[accept]
        res[idx[accept]] = rc[accept]
        stuck = ~accept
        done[idx[small | stuck]] = True
    return w, res


def voiculescu_transform(mu: SpectralMeasure, z, cone: ConeSpec | None = None, tol: float = 1e-10):
    """phi(z) = F^{-1}(z) - z on a Stolz angle at infinity.

    Raises InversionError where the Newton residual exceeds ``tol * |z|``
    or where z lies outside the supplied cone.
    """
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if cone is not None and not np.all(cone.contains_upper(zz)):
        raise InversionError("point outside the cone; enlarge |z|")
    if np.any(zz.imag <= 0):
        raise InversionError("Voiculescu transform needs Im z > 0")
    w, res = _newton_inverse_f(mu, zz)
    bad = ~(np.abs(res) < tol * np.abs(zz))
    if np.any(bad):
        raise InversionError(
            f"F inversion failed at {int(bad.sum())} point(s), e.g. z={zz[bad][0]:.6g}, "
            f"residual {np.abs(res[bad][0]):.3g}"
        )
    out = (w - zz).reshape(np.shape(z))
    return out


def r_transform(mu: SpectralMeasure, z, cone: ConeSpec | None = None):
    """R(z) = phi(1/z) for z near zero in the lower half-plane."""
    zz = np.asarray(z, dtype=complex)
    return voiculescu_transform(mu, 1.0 / zz, cone)


def calibrate_cone(mu: SpectralMeasure, eta: float = 1.0, n_points: int = 32, m_max: float = 2.0 ** 40) -> ConeSpec:
    """Smallest dyadic radius M where inversion succeeds on 32 arc points of the cone."""
    m = 1.0 / 16
    while m <= m_max:
        cone = ConeSpec(eta, m)
        pts = cone.boundary_points(n_points) * (1.0 + 1e-12)
        try:
            voiculescu_transform(mu, pts)
            return cone
        except (InversionError, PoleError):
            m *= 2.0
    raise InversionError("no radius found where the F transform inverts")
