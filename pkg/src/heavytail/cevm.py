"""Conditional extreme value models and the tails of products XY.

GEV distribution functions and domain-of-attraction normalizers, the case
split by the signs of (rho, gamma) and the endpoints, the product-tail index
for each case, Monte Carlo slope estimates and the worked Beta-minimum example.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from ._common import HeavyTailDomainError, Verdict
from .rv_core import left_continuous_inverse
from .tail_models import TailModel

EXCEEDANCE_FLOOR = 200


class UnsupportedCase(HeavyTailDomainError):
    """Parameter and endpoint combination outside the handled cases."""


class DomainClassificationError(HeavyTailDomainError):
    """Model family not in the requested domain of attraction."""


# GEV.

@dataclass(frozen=True)
class GEVParams:
    gamma: float

    @property
    def support(self) -> tuple[float, float]:
        g = self.gamma
        if g > 0:
            return (-1.0 / g, math.inf)
        if g < 0:
            return (-math.inf, -1.0 / g)
        return (-math.inf, math.inf)


def gev_cdf(params: GEVParams | float, x):
    """G_gamma(x) = exp(-(1 + gamma x)^(-1/gamma)), exp(-e^-x) at gamma = 0."""
    g = params.gamma if isinstance(params, GEVParams) else float(params)
    x = np.asarray(x, dtype=float)
    if g == 0:
        return np.exp(-np.exp(-x))
    u = 1.0 + g * x
    with np.errstate(divide="ignore", invalid="ignore"):
        # log1p keeps the gamma -> 0 limit continuous.
        inner = np.exp(-np.log1p(g * x) / g)
        val = np.exp(-inner)
    outside = 0.0 if g > 0 else 1.0
    return np.where(u > 0, val, outside)


def frechet_cdf(alpha: float, x):
    """Phi_alpha(x) = exp(-x^-alpha), x > 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(-np.maximum(x, 1e-300) ** -alpha), 0.0)


def weibull_max_cdf(alpha: float, x):
    """Psi_alpha(x) = exp(-(-x)^alpha), x < 0."""
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, np.exp(-np.abs(np.minimum(x, 0.0)) ** alpha), 1.0)


def declared_gev_index(model: TailModel) -> float | None:
    """Extreme value index implied by the family, None when undeclared."""
    fam = model.family
    if fam == "Pareto":
        return 1.0 / model.params["alpha"]
    if fam in ("Exponential", "Weibull", "Lognormal"):
        return 0.0
    if fam == "GridDensity":
        # A density bounded away from 0 at the right endpoint gives gamma = -1.
        f_end = float(model.density(model.right_end - 1e-12 * max(1.0, abs(model.right_end))))
        return -1.0 if f_end > 0 else None
    return None


@dataclass(frozen=True)
class Normalizers:
    a_n: float
    b_n: float
    gamma: float

    def limit_cdf(self, x):
        """Standard form of the limit: Frechet, reversed Weibull or Gumbel."""
        g = self.gamma
        if g > 0:
            return frechet_cdf(1.0 / g, x)
        if g < 0:
            return weibull_max_cdf(-1.0 / g, x)
        return gev_cdf(0.0, x)


def _inverse_one_over_sf(F: TailModel, n: float) -> float:
    """(1/Fbar)^<-(n), bracketed on a log scale from the left endpoint."""
    lo = F.left_end
    hi = F.right_end
    f = lambda s: 1.0 / max(float(F.survival(s)), 1e-300)
    if not math.isfinite(hi):
        hi = max(lo, 1.0)
        while f(hi) < n:
            hi = 2 * hi + 1.0
    return left_continuous_inverse(f, n, (lo, hi), atol=1e-15)


def doa_normalizers(F: TailModel, gamma: float, n: int) -> Normalizers:
    """Normalizers with F^n(a_n x + b_n) converging to the standard extreme value law."""
    declared = declared_gev_index(F)
    if declared is None or (np.sign(declared) != np.sign(gamma)):
        raise DomainClassificationError(f"{F.family} is not declared in D(G_{gamma})")
    q = _inverse_one_over_sf(F, n)
    if gamma > 0:
        return Normalizers(q, 0.0, gamma)
    if gamma < 0:
        xF = F.right_end
        if not math.isfinite(xF):
            raise DomainClassificationError("negative index needs a finite right endpoint")
        return Normalizers(xF - q, xF, gamma)
    # gamma = 0: auxiliary function f(t) = int_t^xF Fbar / Fbar(t).
    ls_t = float(F.hazard_fn(q))
    g = lambda u: math.exp(ls_t - float(F.hazard_fn(q + u)))
    tail = 0.0
    a, step = 0.0, 1.0
    for _ in range(500):
        piece = integrate.quad(g, a, a + step, epsrel=1e-12, limit=200)[0]
        tail += piece
        a += step
        step *= 1.5
        if piece < 1e-15 * tail or q + a >= F.right_end:
            break
    return Normalizers(tail, q, gamma)


def doa_max_error(F: TailModel, gamma: float, n: int, x_grid) -> float:
    """max over x_grid of |F^n(a_n x + b_n) - limit(x)|."""
    nz = doa_normalizers(F, gamma, n)
    xs = np.asarray(x_grid, dtype=float)
    sf = np.asarray(F.survival(nz.a_n * xs + nz.b_n), dtype=float)
    fn = np.exp(n * np.log1p(-np.minimum(sf, 1.0)))
    return float(np.max(np.abs(fn - nz.limit_cdf(xs))))


# Model specification.

@dataclass
class CEVMSpec:
    """(X, Y) with t P[((X - beta(t))/alpha(t), (Y - b(t))/a(t)) in .] converging.

    psi_nonzero selects the branch of the tilde scaling for negative rho; it
    is declared rather than inferred from samples.
    """

    gamma: float
    rho: float
    alpha_fn: Callable[[float], float]
    a_fn: Callable[[float], float]
    sampler: Callable[[int, np.random.Generator], tuple]
    beta_fn: Callable[[float], float] = lambda t: 0.0
    b_fn: Callable[[float], float] = lambda t: 0.0
    beta_inf: float | None = None
    b_inf: float | None = None
    psi_nonzero: bool = False
    tilde_ratio_bounded: bool | None = None
    name: str = ""

    def __post_init__(self):
        if self.rho == 0 and not self.psi_nonzero:
            raise HeavyTailDomainError("(rho, psi) = (0, 0) is excluded")

    def alpha_tilde(self, t: float) -> float:
        if self.psi_nonzero:
            return 1.0 / (abs(self.rho) * (self.beta_inf - self.beta_fn(t)))
        return 1.0 / self.alpha_fn(t)

    def a_tilde(self, t: float) -> float:
        return 1.0 / self.a_fn(t)


@dataclass
class CaseRecipe:
    case: str
    quantity: Callable
    scaling: Callable
    description: str
    scaling_description: str
    predicted_index: float


def product_tail_index(case: str, rho: float, gamma: float) -> float:
    """Index of regular variation of the transformed product per case."""
    r, g = abs(rho), abs(gamma)
    if case == "I":
        return -1.0 / (gamma + rho)
    if case in ("IIa", "IIc", "IId"):
        return -1.0 / r
    if case == "IIb":
        return -1.0 / (g + r)
    if case == "III":
        return -1.0 / g
    if case == "IV":
        return -1.0 / gamma
    raise UnsupportedCase(f"unknown case {case!r}")


def _is(v: float | None, sign: str) -> bool:
    if v is None:
        return False
    return {"+": v > 0, "0": v == 0, "-": v < 0}[sign]


def classify_case(spec: CEVMSpec) -> CaseRecipe:
    r, g = spec.rho, spec.gamma
    if g == 0 or r == 0:
        raise UnsupportedCase("gamma = 0 or rho = 0 is not handled")
    if r > 0 and g > 0:
        return CaseRecipe("I", lambda x, y: x * y, lambda t: spec.alpha_fn(t) * spec.a_fn(t),
                          "XY", "alpha(t) a(t)", product_tail_index("I", r, g))
    if r > 0 and g < 0:
        if not _is(spec.b_inf, "+"):
            raise UnsupportedCase("rho > 0, gamma < 0 needs b(inf) > 0")
        if not math.isclose(r, -g, rel_tol=1e-9):
            raise UnsupportedCase("rho > 0, gamma < 0 needs alpha ~ 1/a, i.e. rho = |gamma|")
        return CaseRecipe("III", lambda x, y: x * y, spec.a_tilde,
                          "XY", "1/a(t)", product_tail_index("III", r, g))
    if r < 0 and g > 0:
        if not _is(spec.beta_inf, "+"):
            raise UnsupportedCase("rho < 0, gamma > 0 needs beta(inf) > 0")
        return CaseRecipe("IV", lambda x, y: x * y, spec.a_fn,
                          "XY", "a(t)", product_tail_index("IV", r, g))
    # Both negative: split by the endpoints.
    bi, bb = spec.beta_inf, spec.b_inf
    if bi is None or bb is None:
        raise UnsupportedCase("negative indices need both right endpoints")
    if _is(bi, "+") and _is(bb, "+") or _is(bi, "-") and _is(bb, "-"):
        if not (g < r or spec.tilde_ratio_bounded):
            raise UnsupportedCase("needs gamma < rho or alpha~(t)/a~(t) bounded")
        c = bi * bb
        if bi > 0:
            return CaseRecipe("IIa", lambda x, y: 1.0 / (c - x * y), spec.alpha_tilde,
                              "(beta(inf) b(inf) - XY)^-1", "alpha~(t)", product_tail_index("IIa", r, g))
        return CaseRecipe("IId", lambda x, y: 1.0 / (x * y - c), spec.alpha_tilde,
                          "(XY - beta(inf) b(inf))^-1", "alpha~(t)", product_tail_index("IId", r, g))
    if bi == 0 and bb == 0:
        return CaseRecipe("IIb", lambda x, y: 1.0 / (x * y), lambda t: spec.alpha_tilde(t) * spec.a_tilde(t),
                          "(XY)^-1", "alpha~(t) a~(t)", product_tail_index("IIb", r, g))
    if bi == 0 and bb > 0:
        return CaseRecipe("IIc", lambda x, y: -1.0 / (x * y), spec.alpha_tilde,
                          "-(XY)^-1", "alpha~(t)", product_tail_index("IIc", r, g))
    raise UnsupportedCase(f"endpoint combination beta(inf)={bi}, b(inf)={bb} is not handled")


# Simulation.

@dataclass
class ProductTailReport:
    case: str
    transformed_quantity: str
    predicted_index: float
    empirical_index: float
    scaling_used: str
    t_used: float | None
    z_grid: np.ndarray
    curves: dict
    counts: dict
    verdict: Verdict
    exact_limit: np.ndarray | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        def f(v):
            return None if v is None or not math.isfinite(v) else float(v)

        return json.dumps({
            "case": self.case, "transformed_quantity": self.transformed_quantity,
            "predicted_index": f(self.predicted_index), "empirical_index": f(self.empirical_index),
            "scaling_used": self.scaling_used, "t_used": self.t_used,
            "z_grid": [float(z) for z in self.z_grid],
            "curves": {str(k): [float(v) for v in c] for k, c in self.curves.items()},
            "counts": {str(k): [int(v) for v in c] for k, c in self.counts.items()},
            "verdict": str(self.verdict),
            "exact_limit": None if self.exact_limit is None else [float(v) for v in self.exact_limit],
            "notes": self.notes,
        }, sort_keys=True)


def fit_loglog_slope(z, values, counts=None, trim: float = 0.1) -> float:
    """Weighted least squares slope of log values on log z over the central 80% of the grid."""
    z = np.asarray(z, dtype=float)
    v = np.asarray(values, dtype=float)
    n = z.size
    lo, hi = int(math.floor(trim * n)), int(math.ceil((1 - trim) * n))
    sel = slice(lo, max(hi, lo + 2))
    zz, vv = z[sel], v[sel]
    w = np.ones_like(zz) if counts is None else np.asarray(counts, dtype=float)[sel]
    ok = (vv > 0) & (w > 0)
    if ok.sum() < 2:
        return math.nan
    X = np.log(zz[ok])
    Y = np.log(vv[ok])
    W = w[ok]
    xm = np.sum(W * X) / W.sum()
    ym = np.sum(W * Y) / W.sum()
    return float(np.sum(W * (X - xm) * (Y - ym)) / np.sum(W * (X - xm) ** 2))


def simulate_product_tail(spec: CEVMSpec, t_grid, z_grid, n_samples: int, seed: int,
                          tol: float = 0.07) -> ProductTailReport:
    """Estimate t P[Q / s(t) > z] on the grid and fit the log-log slope in z.

    The slope is taken at the largest t whose cells all carry at least
    EXCEEDANCE_FLOOR exceedances; without such a t the report is inconclusive.
    """
    recipe = classify_case(spec)
    rng = np.random.default_rng(seed)
    x, y = spec.sampler(n_samples, rng)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.sort(recipe.quantity(x, y))
    q = q[np.isfinite(q)] if np.any(~np.isfinite(q)) else q
    zs = np.asarray(z_grid, dtype=float)
    curves, counts = {}, {}
    t_used = None
    for t in t_grid:
        thr = recipe.scaling(t) * zs
        cnt = n_samples - np.searchsorted(q, thr, side="right")
        counts[t] = cnt
        curves[t] = t * cnt / n_samples
        if np.all(cnt >= EXCEEDANCE_FLOOR):
            t_used = t
    notes = []
    if t_used is None:
        slope = math.nan
        verdict = Verdict.INCONCLUSIVE
        notes.append("exceedance floor not met at any t")
    else:
        slope = fit_loglog_slope(zs, curves[t_used], counts[t_used])
        verdict = Verdict.PASS if abs(slope - recipe.predicted_index) <= tol else Verdict.FAIL
    exact = None
    if recipe.case == "IV":
        exact = zs ** (-1.0 / spec.gamma) * spec.beta_inf ** (1.0 / spec.gamma)
    return ProductTailReport(recipe.case, recipe.description, recipe.predicted_index, slope,
                             recipe.scaling_description, t_used, zs, curves, counts, verdict, exact, notes)


# Reference models.

def case_one_reference(rho: float, gamma: float) -> CEVMSpec:
    """Y Pareto with P[Y > y] = y^(-1/gamma), X = Y^(rho/gamma) W with W ~ Uniform(0, 1).

    Scalings alpha(t) = t^rho, a(t) = t^gamma. The limit measure is not a
    product, and t P[XY / t^(rho+gamma) > z] = E[W^(1/(rho+gamma))] z^(-1/(rho+gamma))
    holds exactly once z t^(rho+gamma) >= 1.
    """

    def draw(n, rng):
        yv = rng.random(n) ** (-gamma)
        return yv ** (rho / gamma) * rng.random(n), yv

    return CEVMSpec(gamma, rho, lambda t: t ** rho, lambda t: t ** gamma, draw, name="case-I-reference")


def case_one_limit(rho: float, gamma: float, z):
    k = 1.0 / (rho + gamma)
    return np.asarray(z, dtype=float) ** -k / (1.0 + k)


def case_four_reference(gamma: float, beta_inf: float = 2.0, degenerate: bool = False) -> CEVMSpec:
    """Y Pareto(1/gamma); X = beta_inf - W / Y (or X = beta_inf when degenerate)."""

    def draw(n, rng):
        yv = rng.random(n) ** (-gamma)
        if degenerate:
            return np.full(n, beta_inf), yv
        return beta_inf - rng.random(n) / yv, yv

    return CEVMSpec(gamma, -gamma, lambda t: t ** -gamma, lambda t: t ** gamma, draw,
                    beta_fn=lambda t: beta_inf, beta_inf=beta_inf, name="case-IV-reference")


# Beta-minimum example.

def beta_min_example_limit(a: float, b: float, y) -> np.ndarray:
    """a y^-(a+b) int_0^(1/2) (1-z)^b z^(a-1) dz."""
    if a <= 0 or b <= 0:
        raise HeavyTailDomainError("a and b must be positive")
    c = integrate.quad(lambda z: (1 - z) ** b * z ** (a - 1), 0.0, 0.5, epsabs=0.0, epsrel=1e-13)[0]
    return a * np.asarray(y, dtype=float) ** -(a + b) * c


def beta_min_example_spec(a: float, b: float) -> CEVMSpec:
    """X ~ Beta(1, a), Z with P[Z > z] = (1 - z)^b independent, Y = min(X, Z).

    The tilde scaling is a~(t) = t^(1/(a+b)), and rho = gamma = -1/(a+b).
    """

    def draw(n, rng):
        xv = 1.0 - rng.random(n) ** (1.0 / a)
        zv = 1.0 - rng.random(n) ** (1.0 / b)
        return xv, np.minimum(xv, zv)

    k = 1.0 / (a + b)
    return CEVMSpec(-k, -k, lambda t: t ** -k, lambda t: t ** -k, draw,
                    beta_fn=lambda t: 1.0 - t ** -k, b_fn=lambda t: 1.0 - t ** -k,
                    beta_inf=1.0, b_inf=1.0, psi_nonzero=False, tilde_ratio_bounded=True,
                    name="beta-min-example")


@dataclass
class ExampleReport:
    y: np.ndarray
    limit: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    plain_counts: np.ndarray
    t: float
    n_samples: int
    moment_condition_holds: bool = False

    @property
    def ratio(self) -> np.ndarray:
        return self.estimate / self.limit


def beta_min_example_mc(a: float, b: float, t: float, y_grid, n_samples: int, seed: int) -> ExampleReport:
    """t P[(1 - XY)^-1 / a~(t) > y] by Monte Carlo.

    With c = 1 - 1/(a~(t) y), P[XY > c | X] = 1{X > sqrt c} (1 - c/X)^b, so
    the estimate averages that over draws of X, integrating Z out exactly.
    Plain exceedance counts of the simulated product are reported alongside.
    """
    rng = np.random.default_rng(seed)
    at = t ** (1.0 / (a + b))
    xv = 1.0 - rng.random(n_samples) ** (1.0 / a)
    zv = 1.0 - rng.random(n_samples) ** (1.0 / b)
    prod = xv * np.minimum(xv, zv)
    ys = np.asarray(y_grid, dtype=float)
    est, err, plain = [], [], []
    for yy in ys:
        c = 1.0 - 1.0 / (at * yy)
        contrib = np.where(xv > math.sqrt(c), (1.0 - c / np.maximum(xv, 1e-300)) ** b, 0.0)
        est.append(t * contrib.mean())
        err.append(t * contrib.std(ddof=1) / math.sqrt(n_samples))
        plain.append(int(np.count_nonzero(prod > c)))
    return ExampleReport(ys, beta_min_example_limit(a, b, ys), np.array(est), np.array(err),
                         np.array(plain), t, n_samples)


# Moment condition and hidden regular variation.

@dataclass
class ProbeSurface:
    eps: np.ndarray
    t: np.ndarray
    values: np.ndarray
    verdict: Verdict
    sufficient_moment: float | None = None


def moment_condition_probe(spec: CEVMSpec, z: float, eps_grid, t_grid, n_samples: int, seed: int,
                           delta: float = 0.1) -> ProbeSurface:
    """Empirical t P[|X| / alpha(t) > z / eps] over (eps, t)."""
    rng = np.random.default_rng(seed)
    x, _ = spec.sampler(n_samples, rng)
    ax = np.sort(np.abs(x))
    es = np.asarray(eps_grid, dtype=float)
    ts = np.asarray(t_grid, dtype=float)
    vals = np.empty((es.size, ts.size))
    for i, e in enumerate(es):
        for j, t in enumerate(ts):
            thr = spec.alpha_fn(t) * z / e
            vals[i, j] = t * (n_samples - np.searchsorted(ax, thr, side="right")) / n_samples
    last = vals[:, -1]
    order = np.argsort(es)
    lv = last[order]
    if lv[0] <= 1e-12 or (np.all(np.diff(lv) >= 0) and lv[0] < 0.1 * lv[-1]):
        verdict = Verdict.PASS
    elif np.all(vals[:, -1] >= vals[:, 0]) and vals[0, -1] > 2 * vals[0, 0]:
        verdict = Verdict.FAIL
    else:
        verdict = Verdict.INCONCLUSIVE
    suff = None
    if spec.rho > 0:
        p = 1.0 / spec.rho + delta
        suff = float(np.mean(ax ** p))
    return ProbeSurface(es, ts, vals, verdict, suff)


@dataclass
class HiddenReport:
    t: np.ndarray
    joint: np.ndarray
    marginal_x: np.ndarray
    marginal_y: np.ndarray
    verdict: Verdict


def hidden_rv_probe(spec: CEVMSpec, A: Callable[[float], float], x: float, y: float, t_grid,
                    n_samples: int, seed: int) -> HiddenReport:
    """t P[X/A(t) > x, Y/a(t) > y] alongside the two marginal terms."""
    rng = np.random.default_rng(seed)
    xv, yv = spec.sampler(n_samples, rng)
    ts = np.asarray(t_grid, dtype=float)
    joint, mx, my = [], [], []
    for t in ts:
        ex = xv > A(t) * x
        ey = yv > spec.a_fn(t) * y
        joint.append(t * np.count_nonzero(ex & ey) / n_samples)
        mx.append(t * np.count_nonzero(ex) / n_samples)
        my.append(t * np.count_nonzero(ey) / n_samples)
    joint, mx, my = map(np.array, (joint, mx, my))
    shrinking = joint[-1] < 0.5 * joint[0] or joint[-1] == 0
    verdict = Verdict.PASS if shrinking and mx[-1] > 0 and my[-1] > 0 else Verdict.FAIL
    return HiddenReport(ts, joint, mx, my, verdict)
