"""Heavy-tailed one-dimensional laws and numeric class-membership diagnostics.

Each model carries its survival function, an optional density and a quantile
function for sampling. The diagnostics evaluate the defining limit of a class
(heavy-tailed, long-tailed, subexponential, dominated variation, ...) along a
growing grid and return a verdict together with the curve that backs it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, stats

from ._common import (
    HeavyTailDomainError,
    IntegrationError,
    Verdict,
    combine,
    geometric_grid,
    limit_verdict,
    settled,
)

QUAD_RTOL = 1e-10


@dataclass
class TailModel:
    family: str
    params: dict
    survival: Callable
    density: Callable | None
    left_end: float
    right_end: float = math.inf
    quantile: Callable | None = None
    log_survival: Callable | None = None
    tail_index: float | None = None
    hazard_rate: Callable | None = None

    def sf(self, x):
        return self.survival(x)

    def hazard_fn(self, x):
        """R(x) = -log Fbar(x), computed from log_survival when available."""
        if self.log_survival is not None:
            return -self.log_survival(x)
        with np.errstate(divide="ignore"):
            return -np.log(self.survival(x))

    def sample(self, size, rng: np.random.Generator):
        if self.quantile is None:
            raise NotImplementedError(f"{self.family} has no quantile function")
        return self.quantile(rng.random(size))


@dataclass
class HazardProfile:
    R: Callable
    r: Callable


@dataclass
class ClassReport:
    model: str
    heavy: Verdict
    long_gamma: dict
    subexp: Verdict
    dominated: Verdict
    gamma_grid: list
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "model": self.model,
            "heavy": str(self.heavy),
            "long_gamma": {str(k): str(v) for k, v in self.long_gamma.items()},
            "subexp": str(self.subexp),
            "dominated": str(self.dominated),
            "gamma_grid": list(self.gamma_grid),
            "diagnostics": self.diagnostics,
        }
        return json.dumps(payload, sort_keys=True, allow_nan=False, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, Verdict):
        return str(v)
    raise TypeError(type(v))


# Families.

def pareto(alpha: float, scale: float = 1.0) -> TailModel:
    """Fbar(x) = (x/scale)^-alpha for x >= scale."""
    a, c = float(alpha), float(scale)

    def sf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < c, 1.0, (np.maximum(x, c) / c) ** (-a))

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < c, 0.0, a / c * (np.maximum(x, c) / c) ** (-a - 1.0))

    def logsf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < c, 0.0, -a * np.log(np.maximum(x, c) / c))

    return TailModel(
        "Pareto", {"alpha": a, "scale": c}, sf, pdf, c,
        quantile=lambda u: c * (1.0 - np.asarray(u)) ** (-1.0 / a),
        log_survival=logsf, tail_index=a,
        hazard_rate=lambda x: np.where(np.asarray(x) < c, 0.0, a / np.maximum(np.asarray(x, dtype=float), c)),
    )


def exponential(rate: float = 1.0) -> TailModel:
    lam = float(rate)
    return TailModel(
        "Exponential", {"rate": lam},
        lambda x: np.exp(-lam * np.maximum(np.asarray(x, dtype=float), 0.0)),
        lambda x: np.where(np.asarray(x) < 0, 0.0, lam * np.exp(-lam * np.maximum(np.asarray(x, dtype=float), 0.0))),
        0.0,
        quantile=lambda u: -np.log1p(-np.asarray(u)) / lam,
        log_survival=lambda x: -lam * np.maximum(np.asarray(x, dtype=float), 0.0),
        hazard_rate=lambda x: np.full_like(np.asarray(x, dtype=float), lam),
    )


def weibull(shape: float, scale: float = 1.0) -> TailModel:
    """Fbar(x) = exp(-(x/scale)^shape)."""
    a, s = float(shape), float(scale)

    def logsf(x):
        return -(np.maximum(np.asarray(x, dtype=float), 0.0) / s) ** a

    def pdf(x):
        x = np.maximum(np.asarray(x, dtype=float), 1e-300)
        return a / s * (x / s) ** (a - 1.0) * np.exp(-(x / s) ** a)

    return TailModel(
        "Weibull", {"shape": a, "scale": s},
        lambda x: np.exp(logsf(x)), pdf, 0.0,
        quantile=lambda u: s * (-np.log1p(-np.asarray(u))) ** (1.0 / a),
        log_survival=logsf,
        hazard_rate=lambda x: a / s * (np.maximum(np.asarray(x, dtype=float), 1e-300) / s) ** (a - 1.0),
    )


def lognormal(mu: float = 0.0, sigma: float = 1.0) -> TailModel:
    """Survival via the normal log-survival, which stays accurate where Fbar underflows."""
    m, s = float(mu), float(sigma)

    def z(x):
        x = np.maximum(np.asarray(x, dtype=float), 1e-300)
        return (np.log(x) - m) / s

    return TailModel(
        "Lognormal", {"mu": m, "sigma": s},
        lambda x: stats.norm.sf(z(x)),
        lambda x: stats.norm.pdf(z(x)) / (s * np.maximum(np.asarray(x, dtype=float), 1e-300)),
        0.0,
        quantile=lambda u: np.exp(m + s * stats.norm.ppf(np.asarray(u))),
        log_survival=lambda x: stats.norm.logsf(z(x)),
        hazard_rate=lambda x: np.exp(stats.norm.logpdf(z(x)) - stats.norm.logsf(z(x)))
        / (s * np.maximum(np.asarray(x, dtype=float), 1e-300)),
    )


def discrete(values, probs) -> TailModel:
    v = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    order = np.argsort(v)
    v, p = v[order], p[order]
    if abs(p.sum() - 1.0) > 1e-12 or np.any(p < 0):
        raise HeavyTailDomainError("probabilities must be nonnegative and sum to 1")
    cum = np.cumsum(p)

    def sf(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - np.where(x[..., None] >= v, p, 0.0).sum(axis=-1)

    def q(u):
        return v[np.minimum(np.searchsorted(cum, np.asarray(u), side="right"), v.size - 1)]

    return TailModel("Discrete", {"values": v.tolist(), "probs": p.tolist()}, sf, None,
                     float(v[0]), float(v[-1]), quantile=q)


def grid_density(nodes, density) -> TailModel:
    """Piecewise-linear density on a node grid, normalized to unit mass."""
    x = np.asarray(nodes, dtype=float)
    f = np.asarray(density, dtype=float)
    mass = np.trapezoid(f, x)
    f = f / mass
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
    cdf /= cdf[-1]

    def pdf(t):
        t = np.asarray(t, dtype=float)
        return np.where((t < x[0]) | (t > x[-1]), 0.0, np.interp(t, x, f))

    def sf(t):
        t = np.asarray(t, dtype=float)
        # Exact integral of the linear interpolant.
        i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 2)
        h = np.clip(t - x[i], 0.0, None)
        slope = (f[i + 1] - f[i]) / (x[i + 1] - x[i])
        part = cdf[i] + f[i] * h + 0.5 * slope * h * h
        out = 1.0 - part
        return np.where(t < x[0], 1.0, np.where(t >= x[-1], 0.0, out))

    inv = interpolate.interp1d(cdf, x, bounds_error=False, fill_value=(x[0], x[-1]))
    return TailModel("GridDensity", {"n_nodes": int(x.size)}, sf, pdf, float(x[0]), float(x[-1]),
                     quantile=lambda u: inv(np.asarray(u)))


def uniform01() -> TailModel:
    return grid_density([0.0, 1.0], [1.0, 1.0])


FAMILIES = {
    "pareto": pareto,
    "exponential": exponential,
    "weibull": weibull,
    "lognormal": lognormal,
    "discrete": discrete,
    "grid_density": grid_density,
}


def build_model(spec: dict) -> TailModel:
    """Build a model from a config block {'family': name, **params}."""
    spec = dict(spec)
    family = spec.pop("family").lower()
    if family == "uniform":
        return uniform01()
    if family not in FAMILIES:
        raise HeavyTailDomainError(f"unknown family {family!r}")
    return FAMILIES[family](**spec)


# Hazard machinery.

def hazard(model: TailModel) -> HazardProfile:
    def check(x):
        if np.any(np.asarray(model.hazard_fn(x)) == np.inf):
            raise HeavyTailDomainError("support exceeded: Fbar(x) = 0")

    def R(x):
        check(x)
        return model.hazard_fn(x)

    if model.hazard_rate is not None:
        def r(x):
            check(x)
            return model.hazard_rate(x)
    elif model.density is not None:
        def r(x):
            check(x)
            return model.density(x) * np.exp(model.hazard_fn(x))
    else:
        def r(x, h=1e-6):
            x = np.asarray(x, dtype=float)
            dx = h * np.maximum(np.abs(x), 1.0)
            return (R(x + dx) - R(x - dx)) / (2 * dx)

    return HazardProfile(R, r)


# Class diagnostics.

DEFAULT_X = geometric_grid(1.0, 40)


def _bounded(model: TailModel) -> bool:
    """A finite right endpoint rules out every heavy-tailed class."""
    return math.isfinite(model.right_end)


def heavy_tail_check(model: TailModel, lambda_grid=(1.0, 0.1, 0.01), x_grid=DEFAULT_X) -> Verdict:
    """pass iff e^{lambda x} Fbar(x) grows without bound for every lambda."""
    if _bounded(model):
        return Verdict.FAIL
    xs = np.asarray(x_grid, dtype=float)
    R = np.asarray(model.hazard_fn(xs), dtype=float)
    verdicts = []
    for lam in lambda_grid:
        g = lam * xs - R  # log of e^{lambda x} Fbar(x)
        tail = g[-3:]
        if np.all(np.diff(tail) > 0) and tail[-1] > 0:
            verdicts.append(Verdict.PASS)
        elif np.all(np.diff(tail) < 0) and tail[-1] < 0:
            verdicts.append(Verdict.FAIL)
        else:
            verdicts.append(Verdict.INCONCLUSIVE)
    v = combine(verdicts)
    # Cross-check: R(x)/x must keep falling toward zero for heavy tails.
    ratio = R[-3:] / xs[-3:]
    if v == Verdict.PASS and not (np.all(np.diff(ratio) < 0) and ratio[-1] < min(lambda_grid)):
        return Verdict.INCONCLUSIVE
    return v


def long_tail_curve(model: TailModel, gamma: float, u_grid, x_grid) -> np.ndarray:
    """max_u |Fbar(x-u)/Fbar(x) - e^{gamma u}| along x_grid."""
    xs = np.asarray(x_grid, dtype=float)
    out = np.empty(xs.size)
    for i, x in enumerate(xs):
        dev = 0.0
        for u in u_grid:
            d = float(model.hazard_fn(x)) - float(model.hazard_fn(x - u))
            if math.isnan(d):
                return np.full(xs.size, math.nan)
            ratio = math.exp(d) if d < 700.0 else math.inf
            dev = max(dev, abs(ratio - math.exp(gamma * u)))
        out[i] = dev
    return out


def long_tail_check(model: TailModel, gamma: float = 0.0, u_grid=(0.5, 1.0, 5.0), x_grid=DEFAULT_X,
                    tol: float = 1e-2):
    """Returns (verdict, curve). gamma = 0 is the long-tailed class."""
    if _bounded(model):
        return Verdict.FAIL, np.array([])
    xs = np.asarray(x_grid, dtype=float)
    xs = xs[xs - max(u_grid) > model.left_end]
    curve = long_tail_curve(model, gamma, u_grid, xs)
    return limit_verdict(curve, 0.0, tol), curve


def pitman_check(model: TailModel, x_grid=None):
    """Pitman's criterion for subexponentiality.

    Returns (verdict, curve of int_0^x e^{y r(x)} F(dy), sufficient integral).
    Inconclusive by design when the hazard rate does not decrease to zero.
    """
    if model.density is None:
        raise HeavyTailDomainError("Pitman's criterion needs a density")
    xs = np.asarray(geometric_grid(8.0, 16) if x_grid is None else x_grid, dtype=float)
    hp = hazard(model)
    rs = np.asarray(hp.r(xs), dtype=float)
    tail = rs[xs.size // 2:]
    monotone = np.all(np.diff(tail) <= 1e-12 * tail[:-1])
    vanishing = rs[-1] < 0.05 * rs.max()
    if not (monotone and vanishing):
        return Verdict.INCONCLUSIVE, None, None
    curve = []
    lo = model.left_end
    for x, rx in zip(xs, rs):
        if model.hazard_rate is not None:
            # f(y) = r(y) exp(-R(y)), kept in log form against underflow.
            g = lambda y: math.exp(y * rx - float(model.hazard_fn(y))) * float(model.hazard_rate(y))
        else:
            g = lambda y: math.exp(y * rx) * float(model.density(y))
        pts = [p for p in (1.0, 10.0, 100.0) if lo < p < x]
        val = integrate.quad(g, lo, x, points=pts or None, epsrel=1e-10, limit=500)[0]
        curve.append(val)
    curve = np.array(curve)

    def suff(u):
        x = math.exp(u)
        return math.exp(x * float(hp.r(x)) - float(hp.R(x))) * float(hp.r(x)) * x

    try:
        start = math.log(max(lo, 1e-8) if lo > 0 else 1e-8)
        head = integrate.quad(lambda u: suff(u), start, 0.0, limit=200)[0] if start < 0 else 0.0
        total = head
        u = max(start, 0.0)
        for _ in range(200):
            piece = integrate.quad(suff, u, u + 1.0, limit=200)[0]
            total += piece
            u += 1.0
            if piece < 1e-12 * max(total, 1e-300):
                break
        else:
            total = math.inf
    except (OverflowError, ValueError):
        total = math.inf
    v = limit_verdict(curve, 1.0, 1e-2)
    return v, curve, total


def _logsf(model: TailModel, x):
    if model.log_survival is not None:
        return float(model.log_survival(x))
    sf = float(model.survival(x))
    return math.log(sf) if sf > 0 else -math.inf


def _survival_of_sum_two(F: TailModel, G: TailModel, x: float, log_scale: float = 0.0) -> float:
    """P[X + Y > x] * exp(-log_scale) for independent X ~ F (with density) and Y ~ G.

    Uses P[X+Y>x] = Fbar(x - lg) + int_{lf}^{x-lg} Gbar(x-y) f(y) dy, with the
    survival factors taken in log space so that tiny tails do not underflow.
    """
    lf, lg = F.left_end, G.left_end
    if x <= lf + lg:
        return math.exp(-log_scale)
    g = lambda y: math.exp(_logsf(G, x - y) - log_scale) * float(F.density(y))
    pts = _break_points(lf, x - lg)
    val = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val += integrate.quad(g, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)[0]
    return val + math.exp(_logsf(F, x - lg) - log_scale)


def _break_points(a: float, b: float) -> list:
    """Geometric breakpoints from both ends toward the middle of [a, b]."""
    pts = {a, b}
    width = b - a
    s = 1.0
    while s < width / 2:
        pts.add(a + s)
        pts.add(b - s)
        s *= 4.0
    pts.add(0.5 * (a + b))
    return sorted(pts)


@dataclass(frozen=True)
class TailProbability:
    value: float
    stderr: float
    method: str


def _tabulated_sum_survival(model: TailModel, k: int, x_max: float):
    """Survival of X_1+...+X_k on a log grid, interpolated in log-log space."""
    lo = k * model.left_end
    base = max(lo, 1e-3)
    grid = lo + np.geomspace(1e-3 * max(base, 1.0), (x_max - lo) * 1.01 + 1e-3, 240)
    if k == 1:
        return lambda t: float(model.survival(t))
    prev = _tabulated_sum_survival(model, k - 1, x_max)
    vals = []
    for x in grid:
        vals.append(_convolve_with(prev, (k - 1) * model.left_end, model, x))
    vals = np.clip(np.array(vals), 1e-300, 1.0)
    spline = interpolate.PchipInterpolator(np.log(grid - lo), np.log(vals), extrapolate=True)

    def sf(t):
        if t <= lo:
            return 1.0
        return float(min(1.0, math.exp(spline(math.log(t - lo)))))

    return sf


def _convolve_with(sf_prev, lo_prev: float, model: TailModel, x: float) -> float:
    lf = model.left_end
    if x <= lo_prev + lf:
        return 1.0
    g = lambda y: sf_prev(x - y) * float(model.density(y))
    pts = _break_points(lf, x - lo_prev)
    val = sum(
        integrate.quad(g, a, b, epsabs=0.0, epsrel=1e-9, limit=200)[0] for a, b in zip(pts[:-1], pts[1:])
    )
    return val + float(model.survival(x - lo_prev))


def convolution_tail(model: TailModel, n: int, x: float, method: str = "quadrature",
                     n_samples: int = 10**6, seed: int | None = None) -> TailProbability:
    """P[X_1 + ... + X_n > x] for iid summands."""
    if n < 1:
        raise HeavyTailDomainError("n must be positive")
    if method == "quadrature":
        if model.density is None:
            raise NotImplementedError("quadrature convolution needs a density")
        if n > 5:
            raise HeavyTailDomainError("quadrature supports n <= 5")
        if n == 1:
            return TailProbability(float(model.survival(x)), 0.0, method)
        if n == 2:
            return TailProbability(_survival_of_sum_two(model, model, x), 0.0, method)
        prev = _tabulated_sum_survival(model, n - 1, x)
        return TailProbability(_convolve_with(prev, (n - 1) * model.left_end, model, x), 0.0, method)
    if method == "montecarlo":
        if seed is None:
            raise HeavyTailDomainError("Monte Carlo needs a seed")
        rng = np.random.default_rng(seed)
        hits = 0
        done = 0
        chunk = 10**6
        while done < n_samples:
            m = min(chunk, n_samples - done)
            s = np.zeros(m)
            for _ in range(n):
                s += model.sample(m, rng)
            hits += int(np.count_nonzero(s > x))
            done += m
        p = hits / n_samples
        return TailProbability(p, math.sqrt(p * (1 - p) / n_samples), method)
    raise ValueError(f"unknown method {method!r}")


def _max_tail(model: TailModel, n: int, x):
    sf = np.asarray(model.survival(x), dtype=float)
    return -np.expm1(n * np.log1p(-np.minimum(sf, 1.0 - 1e-300))) if np.all(sf < 1) else np.where(
        sf >= 1, 1.0, -np.expm1(n * np.log1p(-np.minimum(sf, 1.0 - 1e-16))))


def one_large_jump_ratio(model: TailModel, n: int, x_grid, method: str = "quadrature",
                         n_samples: int = 10**6, seed: int | None = None) -> np.ndarray:
    """P[sum > x] / P[max > x] along x_grid."""
    out = []
    for x in np.asarray(x_grid, dtype=float):
        s = convolution_tail(model, n, x, method, n_samples, seed).value
        out.append(s / float(_max_tail(model, n, x)))
    return np.array(out)


def mgf(model: TailModel, gamma: float) -> float:
    """int e^{gamma y} F(dy); DomainError when it diverges."""
    if gamma == 0:
        return 1.0
    if model.density is None:
        raise HeavyTailDomainError("mgf needs a density")
    g = lambda u: math.exp(gamma * u) * float(model.density(u))
    total = 0.0
    a = model.left_end
    step = 1.0
    for _ in range(400):
        piece = integrate.quad(g, a, a + step, epsrel=1e-10, limit=200)[0]
        total += piece
        a += step
        step = min(step * 1.5, 50.0)
        if piece < 1e-14 * total:
            return total
        if not math.isfinite(total) or total > 1e12:
            break
    raise HeavyTailDomainError(f"moment generating value at gamma={gamma} diverges")


def s_gamma_check(model: TailModel, gamma: float, x_grid, tol: float = 2e-2):
    """Class S(gamma): Fbar*2(x)/Fbar(x) -> 2 int e^{gamma y} F(dy)."""
    target = 2.0 * mgf(model, gamma)
    xs = _representable(model, np.asarray(x_grid, dtype=float))
    curve = np.array([_survival_of_sum_two(model, model, x, _logsf(model, x)) for x in xs])
    return limit_verdict(curve, target, tol), curve, target


def _representable(model: TailModel, xs: np.ndarray) -> np.ndarray:
    """Drop grid points where the survival function underflows double precision."""
    keep = np.array([_logsf(model, x) > -600.0 for x in xs], dtype=bool)
    return xs[keep]


def subexp_check(model: TailModel, x_grid=None, tol: float = 2e-2):
    """Fbar*2(x) / (2 Fbar(x)) -> 1 (subexponential class)."""
    if _bounded(model):
        return Verdict.FAIL, np.array([])
    xs = np.asarray(geometric_grid(10.0, 12) if x_grid is None else x_grid, dtype=float)
    xs = _representable(model, xs)
    curve = np.array([0.5 * _survival_of_sum_two(model, model, x, _logsf(model, x)) for x in xs])
    return limit_verdict(curve, 1.0, tol), curve


def dominated_variation_check(model: TailModel, x_grid=DEFAULT_X, tol: float = 1e-2):
    """Returns (verdict, sup of Fbar(x)/Fbar(2x), curve)."""
    if _bounded(model):
        return Verdict.FAIL, math.inf, np.array([])
    xs = np.asarray(x_grid, dtype=float)
    logr = np.asarray(model.hazard_fn(2 * xs), dtype=float) - np.asarray(model.hazard_fn(xs), dtype=float)
    curve = np.exp(np.minimum(logr, 700.0))
    sup = float(np.max(curve))
    if np.all(np.diff(logr[-4:]) > 0) and logr[-1] > math.log(1e3):
        return Verdict.FAIL, sup, curve
    if settled(curve, tol):
        return Verdict.PASS, sup, curve
    return Verdict.INCONCLUSIVE, sup, curve


def _log_add(a: float, b: float) -> float:
    return float(np.logaddexp(a, b))


def max_sum_equivalence_check(F: TailModel, G: TailModel, x_grid, tol: float = 2e-2):
    """Fbar*G(x) / (Fbar(x) + Gbar(x)) -> 1."""
    if F.density is None and G.density is None:
        raise HeavyTailDomainError("need a density for at least one model")
    A, B = (F, G) if F.density is not None else (G, F)
    xs = np.asarray(x_grid, dtype=float)
    curve = np.array([
        _survival_of_sum_two(A, B, x, _log_add(_logsf(F, x), _logsf(G, x))) for x in xs
    ])
    if np.all(np.isfinite(curve)) and curve[-1] > 10 and np.all(np.diff(curve[-3:]) > 0):
        return Verdict.FAIL, curve
    return limit_verdict(curve, 1.0, tol), curve


def class_report(model: TailModel, gamma_grid=(0.0,), name: str | None = None) -> ClassReport:
    heavy = heavy_tail_check(model)
    long_g = {}
    curves = {}
    for g in gamma_grid:
        v, c = long_tail_check(model, g)
        long_g[g] = v
        curves[f"long_{g}"] = c
    if model.density is not None or _bounded(model):
        subexp, sc = subexp_check(model)
        curves["subexp"] = sc
    else:
        subexp = Verdict.INCONCLUSIVE
    dom, sup, dc = dominated_variation_check(model)
    curves["dominated"] = dc
    curves["dominated_sup"] = sup
    return ClassReport(name or model.family, heavy, long_g, subexp, dom, list(gamma_grid), curves)


def containment_violations(report: ClassReport) -> list:
    """Containment subexp => long => heavy; returns the broken implications."""
    bad = []
    if report.subexp == Verdict.PASS and report.long_gamma.get(0.0) != Verdict.PASS:
        bad.append("subexp => long")
    if report.long_gamma.get(0.0) == Verdict.PASS and report.heavy != Verdict.PASS:
        bad.append("long => heavy")
    return bad
