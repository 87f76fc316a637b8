"""Spectral measures: atoms, a piecewise-linear body and an exact power tail."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .._common import HeavyTailDomainError

MASS_TOL = 1e-9


@dataclass(frozen=True)
class PowerTail:
    """mu(x, inf) = scale * x**(-index) for x >= cutoff."""

    cutoff: float
    index: float
    scale: float

    def __post_init__(self):
        if not (self.cutoff > 0 and self.index > 0 and self.scale >= 0):
            raise HeavyTailDomainError(f"invalid tail descriptor {self}")

    @property
    def mass(self) -> float:
        return self.scale * self.cutoff ** (-self.index)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x >= self.cutoff, self.scale * np.maximum(x, self.cutoff) ** (-self.index), self.mass)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            d = self.scale * self.index * np.maximum(x, self.cutoff) ** (-self.index - 1.0)
        return np.where(x >= self.cutoff, d, 0.0)

    def moment(self, j: float) -> float:
        if j >= self.index:
            return math.inf
        return self.scale * self.index * self.cutoff ** (j - self.index) / (self.index - j)


@dataclass(frozen=True)
class ConeSpec:
    """Stolz angle: Gamma_{eta,M} at infinity (upper) or Delta_{eta,delta} at zero (lower)."""

    eta: float
    bound: float

    def contains_upper(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (np.abs(z.real) < self.eta * z.imag) & (np.abs(z) > self.bound)

    def contains_lower(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (np.abs(z.real) < -self.eta * z.imag) & (np.abs(z) < self.bound)

    def boundary_points(self, n: int = 32, upper: bool = True) -> np.ndarray:
        """Points on the arc |z| = bound strictly inside the cone."""
        half = math.atan(self.eta)
        theta = np.linspace(-0.95 * half, 0.95 * half, n)
        if upper:
            return self.bound * 1j * np.exp(1j * theta)
        return -self.bound * 1j * np.exp(1j * theta)

    def grid(self, n_radii: int = 5, angles=(-0.9, -0.3, 0.3, 0.9), span: float = 10.0) -> np.ndarray:
        """Points of the upper cone on radii 2M..2M*span and the given fractions of the half-angle."""
        r = 2.0 * max(self.bound, 1.0) * np.geomspace(1.0, span, n_radii)
        ang = np.asarray(angles, dtype=float) * math.atan(self.eta)
        return (r[:, None] * 1j * np.exp(1j * ang[None, :])).ravel()


@dataclass
class MomentData:
    p: int
    moments: np.ndarray
    cumulants: np.ndarray

    def __post_init__(self):
        self.moments = np.asarray(self.moments, dtype=float)
        self.cumulants = np.asarray(self.cumulants, dtype=float)


@dataclass
class SpectralMeasure:
    """Probability measure on the real line.

    Parameters
    ----------
    atoms : array of (location, weight) pairs
    nodes, density : body density, linear between strictly increasing nodes
    tail : optional exact power tail added beyond its cutoff
    """

    atom_loc: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atom_weight: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail: PowerTail | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)
    check_mass: bool = True

    def __post_init__(self):
        self.atom_loc = np.atleast_1d(np.asarray(self.atom_loc, dtype=float))
        self.atom_weight = np.atleast_1d(np.asarray(self.atom_weight, dtype=float))
        self.nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        self.density = np.atleast_1d(np.asarray(self.density, dtype=float))
        if self.atom_loc.shape != self.atom_weight.shape:
            raise HeavyTailDomainError("atom locations and weights differ in length")
        if self.nodes.shape != self.density.shape:
            raise HeavyTailDomainError("body nodes and density differ in length")
        if self.nodes.size == 1:
            raise HeavyTailDomainError("body needs at least two nodes")
        if self.nodes.size and np.any(np.diff(self.nodes) <= 0):
            raise HeavyTailDomainError("body nodes must be strictly increasing")
        if np.any(self.atom_weight < 0) or np.any(self.density < 0):
            raise HeavyTailDomainError("negative weight or density")
        if self.check_mass and abs(self.total_mass() - 1.0) > MASS_TOL:
            raise HeavyTailDomainError(f"total mass {self.total_mass():.12g} differs from 1")

    # -- basic quantities -------------------------------------------------
    @property
    def has_body(self) -> bool:
        return self.nodes.size >= 2

    def body_mass(self) -> float:
        if not self.has_body:
            return 0.0
        return float(np.sum(0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.nodes)))

    def total_mass(self) -> float:
        tail = self.tail.mass if self.tail is not None else 0.0
        return float(self.atom_weight.sum()) + self.body_mass() + tail

    @property
    def support_min(self) -> float:
        cands = []
        if self.atom_loc.size:
            cands.append(self.atom_loc[self.atom_weight > 0].min(initial=np.inf))
        if self.has_body:
            pos = np.nonzero(self.density > 0)[0]
            if pos.size:
                cands.append(self.nodes[max(pos[0] - 1, 0)])
        if self.tail is not None and self.tail.scale > 0:
            cands.append(self.tail.cutoff)
        return float(min(cands))

    @property
    def support_max(self) -> float:
        if self.tail is not None and self.tail.scale > 0:
            return math.inf
        cands = []
        if self.atom_loc.size:
            cands.append(self.atom_loc[self.atom_weight > 0].max(initial=-np.inf))
        if self.has_body:
            pos = np.nonzero(self.density > 0)[0]
            if pos.size:
                cands.append(self.nodes[min(pos[-1] + 1, self.nodes.size - 1)])
        return float(max(cands))

    @property
    def p(self) -> int:
        """Largest integer p with a finite p-th moment (capped at 8 without a tail)."""
        if self.tail is None or self.tail.scale == 0:
            return 8
        a = self.tail.index
        return int(a) - 1 if float(a).is_integer() else int(math.floor(a))

    def _body_cdf(self, x):
        x = np.asarray(x, dtype=float)
        if not self.has_body:
            return np.zeros_like(x)
        t, d = self.nodes, self.density
        seg = 0.5 * (d[1:] + d[:-1]) * np.diff(t)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        k = np.clip(np.searchsorted(t, x, side="right") - 1, 0, t.size - 2)
        h = np.clip(x - t[k], 0.0, t[k + 1] - t[k])
        slope = (d[k + 1] - d[k]) / (t[k + 1] - t[k])
        part = d[k] * h + 0.5 * slope * h * h
        out = cum[k] + part
        out = np.where(x < t[0], 0.0, out)
        return np.where(x >= t[-1], cum[-1], out)

    def cdf(self, x):
        """mu(-inf, x]."""
        x = np.asarray(x, dtype=float)
        atoms = (self.atom_weight[None, :] * (self.atom_loc[None, :] <= x.reshape(-1, 1))).sum(axis=1)
        out = atoms.reshape(x.shape) + self._body_cdf(x)
        if self.tail is not None:
            out = out + self.tail.mass - self.tail.survival(x)
        return out

    def survival(self, x):
        """mu(x, inf), computed without cancellation in the power tail."""
        x = np.asarray(x, dtype=float)
        atoms = (self.atom_weight[None, :] * (self.atom_loc[None, :] > x.reshape(-1, 1))).sum(axis=1)
        body = self.body_mass() - self._body_cdf(x)
        out = atoms.reshape(x.shape) + np.maximum(body, 0.0)
        if self.tail is not None:
            out = out + self.tail.survival(x)
        return out

    def density_at(self, x):
        """Absolutely continuous part of the density."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.has_body:
            inside = (x >= self.nodes[0]) & (x <= self.nodes[-1])
            out = np.where(inside, np.interp(x, self.nodes, self.density), 0.0)
        if self.tail is not None:
            out = out + self.tail.density(x)
        return out

    def moment(self, j: int) -> float:
        """Integral of t**j, exact for the piecewise-linear body."""
        m = float(np.sum(self.atom_weight * self.atom_loc ** j)) if self.atom_loc.size else 0.0
        if self.has_body:
            xg, wg = np.polynomial.legendre.leggauss(j // 2 + 2)
            a, b = self.nodes[:-1], self.nodes[1:]
            c, h = 0.5 * (a + b), 0.5 * (b - a)
            t = c[:, None] + h[:, None] * xg[None, :]
            d = np.interp(t, self.nodes, self.density)
            m += float(np.sum(h[:, None] * wg[None, :] * t ** j * d))
        if self.tail is not None and self.tail.scale > 0:
            tm = self.tail.moment(j)
            if not math.isfinite(tm):
                return math.inf
            m += tm
        return m

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "atoms": [[float(a), float(w)] for a, w in zip(self.atom_loc, self.atom_weight)],
            "grid": [float(v) for v in self.nodes],
            "density": [float(v) for v in self.density],
            "tail": None if self.tail is None else {
                "cutoff": self.tail.cutoff, "index": self.tail.index, "scale": self.tail.scale,
            },
            "name": self.name,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralMeasure":
        atoms = np.asarray(d.get("atoms") or np.zeros((0, 2)), dtype=float).reshape(-1, 2)
        tail = d.get("tail")
        return cls(
            atom_loc=atoms[:, 0], atom_weight=atoms[:, 1],
            nodes=d.get("grid", []), density=d.get("density", []),
            tail=None if tail is None else PowerTail(tail["cutoff"], tail["index"], tail["scale"]),
            name=d.get("name", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "SpectralMeasure":
        return cls.from_dict(json.loads(text))


# -- constructors ----------------------------------------------------------
def point_mass(a: float = 0.0) -> SpectralMeasure:
    return SpectralMeasure(atom_loc=[a], atom_weight=[1.0], name=f"delta({a:g})")


def discrete_measure(locations, weights) -> SpectralMeasure:
    w = np.asarray(weights, dtype=float)
    return SpectralMeasure(atom_loc=locations, atom_weight=w / w.sum(), name="discrete")


def bernoulli_pm1() -> SpectralMeasure:
    """Half mass at -1 and at +1."""
    return discrete_measure([-1.0, 1.0], [0.5, 0.5])


def semicircle(variance: float = 1.0, n: int = 2000, center: float = 0.0) -> SpectralMeasure:
    """Wigner law of radius 2*sqrt(variance) with Chebyshev-clustered nodes at the edges."""
    r = 2.0 * math.sqrt(variance)
    theta = np.linspace(math.pi, 0.0, n + 1)
    x = r * np.cos(theta)
    x[0], x[-1] = -r, r
    d = np.sqrt(np.maximum(r * r - x * x, 0.0)) / (math.pi * r * r / 2.0)
    mu = SpectralMeasure(nodes=x + center, density=d, check_mass=False, name=f"semicircle({variance:g})")
    mu.density = mu.density / mu.body_mass()
    return mu


def body_measure(nodes, density, name: str = "body") -> SpectralMeasure:
    """Piecewise-linear density normalised to unit mass."""
    nodes = np.asarray(nodes, dtype=float)
    density = np.asarray(density, dtype=float)
    mass = float(np.sum(0.5 * (density[1:] + density[:-1]) * np.diff(nodes)))
    return SpectralMeasure(nodes=nodes, density=density / mass, name=name)


def pareto_measure(alpha: float, cutoff: float = 1.0, n_body: int = 2000) -> SpectralMeasure:
    """Pareto(alpha) law on [1, inf).

    With ``cutoff == 1`` the whole law is the exact power tail. A larger
    cutoff puts [1, cutoff] into a geometric-node piecewise-linear body and
    rescales the tail so the total mass is one.
    """
    if cutoff <= 1.0:
        return SpectralMeasure(tail=PowerTail(1.0, alpha, 1.0), name=f"pareto({alpha:g})")
    nodes = np.geomspace(1.0, cutoff, n_body + 1)
    dens = alpha * nodes ** (-alpha - 1.0)
    mu = SpectralMeasure(nodes=nodes, density=dens, check_mass=False)
    scale = (1.0 - mu.body_mass()) * cutoff ** alpha
    return SpectralMeasure(nodes=nodes, density=dens, tail=PowerTail(cutoff, alpha, scale),
                           name=f"pareto({alpha:g})")


def build_measure(spec: dict) -> SpectralMeasure:
    """Construct a measure from a small config dictionary."""
    spec = dict(spec)
    kind = spec.pop("family")
    if kind == "point_mass":
        return point_mass(**spec)
    if kind == "bernoulli":
        return bernoulli_pm1()
    if kind == "discrete":
        return discrete_measure(spec["locations"], spec["weights"])
    if kind == "semicircle":
        return semicircle(**spec)
    if kind == "pareto":
        return pareto_measure(**spec)
    if kind == "body":
        return body_measure(spec["nodes"], spec["density"])
    if kind == "json":
        return SpectralMeasure.from_dict(spec["measure"])
    raise HeavyTailDomainError(f"unknown measure family {kind!r}")
