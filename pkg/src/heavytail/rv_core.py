"""Regular-variation calculus.

Regularly varying functions are represented through the Karamata form
``f(x) = x**rho * c(x) * exp(int_{x0}^x eps(y)/y dy)``, with ``c(x) -> c0`` and
``eps(y) -> 0``. The module evaluates such functions, checks the classical
integral and Tauberian limits numerically and provides the generalized
inverse and the Hill estimator used elsewhere in the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from ._common import (
    HeavyTailDomainError,
    IntegrationError,
    RatioReport,
)

QUAD_RTOL = 1e-9
QUAD_LIMIT = 400


@dataclass(frozen=True)
class SlowlyVaryingSpec:
    """Karamata representation of a slowly varying function."""

    x0: float
    c_limit: float
    c_fn: Callable[[float], float]
    eps_fn: Callable[[float], float]
    name: str = "custom"

    def __post_init__(self):
        if not (self.x0 > 0):
            raise HeavyTailDomainError("x0 must be positive")
        if not (0 < self.c_limit < math.inf):
            raise HeavyTailDomainError("c_limit must lie in (0, inf)")

    def __call__(self, x: float) -> float:
        return eval_rv(RegVarSpec(0.0, self), x)


@dataclass(frozen=True)
class RegVarSpec:
    index: float
    sv: SlowlyVaryingSpec

    def __call__(self, x: float) -> float:
        return eval_rv(self, x)


@dataclass(frozen=True)
class TailIndexEstimate:
    alpha_hat: float
    k_used: int
    stderr: float


# Built-in slowly varying families.

def constant_sv(c: float = 1.0, x0: float = 1.0) -> SlowlyVaryingSpec:
    return SlowlyVaryingSpec(x0, c, lambda x: c, lambda y: 0.0, name=f"const({c})")


def log_sv() -> SlowlyVaryingSpec:
    """L(x) = log x on [e, inf)."""
    return SlowlyVaryingSpec(math.e, 1.0, lambda x: 1.0, lambda y: 1.0 / math.log(y), name="log")


def log_shift_sv() -> SlowlyVaryingSpec:
    """L(x) = log(e + x) on [1, inf)."""
    c0 = math.log(math.e + 1.0)
    return SlowlyVaryingSpec(
        1.0,
        c0,
        lambda x: c0,
        lambda y: y / ((math.e + y) * math.log(math.e + y)),
        name="log(e+x)",
    )


def inverse_log_sv() -> SlowlyVaryingSpec:
    """eps(y) = 1/log(e + y) starting at 1; used as a quadrature stress case."""
    return SlowlyVaryingSpec(1.0, 1.0, lambda x: 1.0, lambda y: 1.0 / math.log(math.e + y), name="eps=1/log(e+y)")


def _log_integral(eps_fn, a: float, b: float) -> float:
    """int_a^b eps(y)/y dy computed in u = log y."""
    if a == b:
        return 0.0
    lo, hi = math.log(a), math.log(b)
    # Breaking long log-ranges keeps the adaptive rule honest.
    edges = np.linspace(lo, hi, max(2, int(math.ceil(hi - lo)) + 1))
    total = 0.0
    for u0, u1 in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(
            lambda u: eps_fn(math.exp(u)), u0, u1, epsabs=0.0, epsrel=QUAD_RTOL, limit=QUAD_LIMIT
        )
        total += val
    return total


def eval_rv(spec: RegVarSpec, x: float) -> float:
    """Evaluate ``x**rho * c(x) * exp(int_{x0}^x eps(y)/y dy)``."""
    sv = spec.sv
    if x < sv.x0:
        raise HeavyTailDomainError(f"x={x} below x0={sv.x0}")
    return x ** spec.index * sv.c_fn(x) * math.exp(_log_integral(sv.eps_fn, sv.x0, x))


def karamata_integral_ratio(spec: RegVarSpec, x0: float, x: float) -> float:
    """Ratio of the power-weighted integral of L to its Karamata equivalent.

    For alpha > -1 the integral runs over [x0, x] and is compared with
    ``x**(alpha+1) L(x) / (alpha+1)``; for alpha < -1 it runs over [x, inf)
    and is compared with ``-x**(alpha+1) L(x) / (alpha+1)``. For alpha = -1 the
    slowly varying integral over [x0, x] itself is returned.
    """
    alpha = spec.index
    sv = spec.sv
    if x <= x0:
        raise HeavyTailDomainError("need x > x0")
    L = lambda t: eval_rv(RegVarSpec(0.0, sv), t)

    def integrand(u):
        t = math.exp(u)
        return t ** (alpha + 1.0) * L(t)

    if alpha == -1.0:
        return _quad_pieces(integrand, math.log(x0), math.log(x))
    Lx = L(x)
    if alpha > -1.0:
        num = _quad_pieces(integrand, math.log(x0), math.log(x))
        return num / (x ** (alpha + 1.0) * Lx / (alpha + 1.0))
    num = _quad_to_infinity(integrand, math.log(x))
    return num / (-(x ** (alpha + 1.0)) * Lx / (alpha + 1.0))


def _quad_pieces(f, a: float, b: float) -> float:
    edges = np.linspace(a, b, max(2, int(math.ceil(b - a)) + 1))
    total = 0.0
    for u0, u1 in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, u0, u1, epsabs=0.0, epsrel=QUAD_RTOL, limit=QUAD_LIMIT)[0]
    return total


def _quad_to_infinity(f, a: float, max_span: float = 2000.0) -> float:
    """int_a^inf f(u) du over unit log-blocks until the contribution dies out."""
    total = 0.0
    u = a
    while u - a < max_span:
        piece = integrate.quad(f, u, u + 1.0, epsabs=0.0, epsrel=QUAD_RTOL, limit=QUAD_LIMIT)[0]
        total += piece
        u += 1.0
        if not math.isfinite(total):
            break
        if abs(piece) <= 1e-13 * abs(total):
            return total
    raise IntegrationError("tail integral does not converge")


def potter_bounds(rho: float, eps: float, x: float) -> tuple[float, float]:
    """Potter sandwich ((1-eps) x**(rho-eps), (1+eps) x**(rho+eps)) for x >= 1."""
    if eps <= 0 or x < 1:
        raise HeavyTailDomainError("need eps > 0 and x >= 1")
    return (1.0 - eps) * x ** (rho - eps), (1.0 + eps) * x ** (rho + eps)


def potter_threshold(f: Callable[[float], float], rho: float, eps: float, t_grid, x_grid):
    """Smallest t0 in `t_grid` such that f(tx)/f(t) obeys the Potter bounds
    for every grid t >= t0 and every x in `x_grid`; None if no such t0."""
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    x_grid = np.asarray(x_grid, dtype=float)
    bounds = np.array([potter_bounds(rho, eps, x) for x in x_grid])
    ok = np.empty(t_grid.size, dtype=bool)
    for i, t in enumerate(t_grid):
        ft = f(t)
        r = np.array([f(t * x) / ft for x in x_grid])
        ok[i] = bool(np.all((r >= bounds[:, 0]) & (r <= bounds[:, 1])))
    for i in range(t_grid.size):
        if ok[i:].all():
            return float(t_grid[i])
    return None


def left_continuous_inverse(
    f: Callable[[float], float], y: float, bracket: tuple[float, float], atol: float = 1e-12
) -> float:
    """inf{s : f(s) >= y} for nondecreasing f, by bisection on `bracket`."""
    lo, hi = map(float, bracket)
    if f(hi) < y:
        raise HeavyTailDomainError(f"f(hi)={f(hi)} < y={y}: enlarge the bracket")
    if f(lo) >= y:
        return lo
    # Invariant: f(lo) < y <= f(hi).
    while hi - lo > atol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) >= y:
            hi = mid
        else:
            lo = mid
    return hi


def laplace_stieltjes(U: Callable[[float], float], s: float) -> float:
    """int_0^inf e^{-sx} dU(x) = s int_0^inf e^{-sx} U(x) dx, assuming U(0) = 0."""
    f = lambda v: U(v / s) * math.exp(-v)
    # v = s*x scales the kernel to e^{-v}.
    total = 0.0
    edges = [0.0, 1.0, 5.0, 20.0, 60.0, 200.0, 800.0]
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=QUAD_LIMIT)
        total += val
    if not math.isfinite(total):
        raise IntegrationError("Laplace-Stieltjes transform diverges")
    return total


def tauberian_laplace_check(U, alpha: float, L: SlowlyVaryingSpec | None, x_grid) -> RatioReport:
    """Report U(x) Gamma(1+alpha) / U_hat(1/x) along `x_grid`."""
    if alpha < 0:
        raise HeavyTailDomainError("alpha must be nonnegative")
    xs = np.asarray(x_grid, dtype=float)
    vals = np.array([U(x) * special.gamma(1.0 + alpha) / laplace_stieltjes(U, 1.0 / x) for x in xs])
    meta = {"alpha": alpha, "L": None if L is None else L.name}
    return RatioReport(xs, vals, 1.0, label="tauberian", meta=meta)


def karamata_df_ratio(F, beta: float, x: float) -> float:
    """Distribution form of Karamata's theorem.

    Returns ``x**beta Fbar(x) / int_0^x y**beta F(dy)`` when beta >= alpha and
    ``x**beta Fbar(x) / int_x^inf y**beta F(dy)`` when beta < alpha, where
    alpha is the tail index of F (``None`` for tails lighter than any power,
    which always use the first branch).
    """
    if F.density is None:
        raise HeavyTailDomainError("karamata_df_ratio needs a density")
    alpha = F.tail_index
    num = x ** beta * F.survival(x)
    lo = F.left_end
    g = lambda y: y ** beta * F.density(y)
    if alpha is None or beta >= alpha:
        den = _quad_log_or_lin(g, max(lo, 0.0), x)
    else:
        den = _quad_upper(g, x)
    return num / den


def karamata_df_limit(alpha: float, beta: float) -> float:
    """Limit of `karamata_df_ratio` for a tail of index -alpha: |beta - alpha| / alpha."""
    return abs(beta - alpha) / alpha


def _quad_log_or_lin(g, a: float, b: float) -> float:
    if a <= 0:
        head = integrate.quad(g, a, min(b, 1.0), epsabs=0.0, epsrel=QUAD_RTOL, limit=QUAD_LIMIT)[0]
        if b <= 1.0:
            return head
        a = 1.0
    else:
        head = 0.0
    return head + _quad_pieces(lambda u: g(math.exp(u)) * math.exp(u), math.log(a), math.log(b))


def _quad_upper(g, x: float) -> float:
    return _quad_to_infinity(lambda u: g(math.exp(u)) * math.exp(u), math.log(x))


def hill_estimate(sample, k: int) -> TailIndexEstimate:
    """Hill estimator from the k largest order statistics."""
    xs = np.sort(np.asarray(sample, dtype=float))
    n = xs.size
    if not (2 <= k < n):
        raise HeavyTailDomainError("need 2 <= k < n")
    if np.any(xs <= 0):
        raise HeavyTailDomainError("Hill estimator needs positive data")
    top = xs[n - k:]
    threshold = xs[n - k - 1]
    mean_log = float(np.mean(np.log(top / threshold)))
    if mean_log <= 0:
        raise ZeroDivisionError("degenerate sample: all top order statistics coincide")
    alpha_hat = 1.0 / mean_log
    return TailIndexEstimate(alpha_hat, k, alpha_hat / math.sqrt(k))


def slope_check(f: Callable[[float], float], rho: float, t: float, x_grid, tol: float = 0.01):
    """First grid x beyond which |f(tx)/f(x) - t**rho| < tol holds on the rest of the grid."""
    xs = np.asarray(x_grid, dtype=float)
    ok = np.array([abs(f(t * x) / f(x) - t ** rho) < tol for x in xs])
    for i in range(xs.size):
        if ok[i:].all():
            return float(xs[i])
    return None
